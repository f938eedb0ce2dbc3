#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace blindsr {

using Index = Eigen::Index;
using Shape = std::vector<Index>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

std::string shape_string(const Shape& shape);
Index shape_numel(const Shape& shape);

/// Dense row-major array of doubles with an optional gradient slot.
///
/// A tensor is a plain value: copying it copies the data. Gradients are
/// written by Tape::backward into the tensors that were bound as parameters.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, Eigen::VectorXd data);

  static Tensor scalar(double value);
  static Tensor from_matrix(const RowMatrix& m);

  const Shape& shape() const { return shape_; }
  Index dim() const { return static_cast<Index>(shape_.size()); }
  Index extent(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const { return data_.size(); }

  Eigen::VectorXd& data() { return data_; }
  const Eigen::VectorXd& data() const { return data_; }
  double& operator[](Index i) { return data_[i]; }
  double operator[](Index i) const { return data_[i]; }
  double item() const;

  // First axis as rows, all remaining axes flattened into columns.
  MatrixMap matrix();
  ConstMatrixMap matrix() const;

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool on) { requires_grad_ = on; }
  const std::optional<Eigen::VectorXd>& grad() const { return grad_; }
  void set_grad(Eigen::VectorXd g);
  void clear_grad() { grad_.reset(); }

  Tensor reshaped(Shape shape) const;
  bool all_finite() const { return data_.allFinite(); }

 private:
  Shape shape_;
  Eigen::VectorXd data_;
  bool requires_grad_ = false;
  std::optional<Eigen::VectorXd> grad_;
};

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Append-only record of operations for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so the sequence is already a
/// topological order and backward simply walks it in reverse. One tape per
/// thread; a tape supports exactly one backward pass.
///
/// Parameter tensors bound with parameter() must outlive the tape: backward
/// writes d(loss)/d(parameter) into their grad slot.
class Tape {
 public:
  // Accumulates d(loss)/d(input_k) into input_grads[k]; entries are null for
  // inputs that do not need a gradient.
  using BackwardFn = std::function<void(const Eigen::VectorXd& out_grad,
                                        std::span<Eigen::VectorXd* const> input_grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var parameter(Tensor& tensor);
  Var constant(Tensor value);
  // Owned leaf that always receives a gradient, readable through grad().
  Var variable(Tensor value);

  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  const Tensor& value(const Var& v) const;
  bool needs_grad(const Var& v) const;
  // Gradient of the loss w.r.t. a leaf after backward(); zeros if unreachable.
  Eigen::VectorXd grad(const Var& v) const;

  void backward(const Var& loss);
  bool backward_done() const { return backward_done_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool needs_grad = false;
    bool is_leaf = false;
    Tensor* target = nullptr;
    Eigen::VectorXd adjoint;
  };

  void check_owned(const Var& v) const;

  std::deque<Node> nodes_;  // stable references across appends
  std::unordered_map<const Tensor*, std::size_t> bound_;
  bool backward_done_ = false;
};

}  // namespace blindsr
