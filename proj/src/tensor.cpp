#include "blindsr/tensor.hpp"

#include <numeric>
#include <sstream>
#include <utility>

#include "blindsr/errors.hpp"

namespace blindsr {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Index shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

namespace {

void check_shape(const Shape& shape) {
  for (Index e : shape) {
    if (e <= 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_ = Eigen::VectorXd::Constant(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, Eigen::VectorXd data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != shape_numel(shape_)) {
    throw DimensionError("data length " + std::to_string(data_.size()) + " does not match shape " +
                         shape_string(shape_));
  }
}

Tensor Tensor::scalar(double value) { return Tensor({1}, value); }

Tensor Tensor::from_matrix(const RowMatrix& m) {
  Tensor t({m.rows(), m.cols()});
  t.matrix() = m;
  return t;
}

double Tensor::item() const {
  if (data_.size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

MatrixMap Tensor::matrix() {
  const Index rows = shape_.empty() ? 0 : shape_[0];
  return MatrixMap(data_.data(), rows, rows ? data_.size() / rows : 0);
}

ConstMatrixMap Tensor::matrix() const {
  const Index rows = shape_.empty() ? 0 : shape_[0];
  return ConstMatrixMap(data_.data(), rows, rows ? data_.size() / rows : 0);
}

void Tensor::set_grad(Eigen::VectorXd g) {
  if (g.size() != data_.size()) {
    throw DimensionError("gradient length " + std::to_string(g.size()) + " does not match tensor " +
                         shape_string(shape_));
  }
  grad_ = std::move(g);
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

const Tensor& Var::value() const {
  if (!tape_) throw StateError("value() on an unbound Var");
  return tape_->value(*this);
}

void Tape::check_owned(const Var& v) const {
  if (!v.valid() || &v.tape() != this || v.id() >= nodes_.size()) {
    throw ContractError("Var does not belong to this tape");
  }
}

Var Tape::parameter(Tensor& tensor) {
  if (auto it = bound_.find(&tensor); it != bound_.end()) return Var(this, it->second);
  Node node;
  node.value = tensor;
  node.value.clear_grad();
  node.needs_grad = tensor.requires_grad();
  node.is_leaf = true;
  node.target = &tensor;
  nodes_.push_back(std::move(node));
  bound_.emplace(&tensor, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  node.value.clear_grad();
  node.is_leaf = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  Node node;
  node.value = std::move(value);
  node.value.clear_grad();
  node.needs_grad = true;
  node.is_leaf = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  if (backward_done_) throw StateError("cannot record on a tape after backward()");
  Node node;
  node.value = std::move(value);
  node.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    check_owned(in);
    node.inputs.push_back(in.id());
    node.needs_grad = node.needs_grad || nodes_[in.id()].needs_grad;
  }
  if (node.needs_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(const Var& v) const {
  check_owned(v);
  return nodes_[v.id()].value;
}

bool Tape::needs_grad(const Var& v) const {
  check_owned(v);
  return nodes_[v.id()].needs_grad;
}

Eigen::VectorXd Tape::grad(const Var& v) const {
  check_owned(v);
  const Node& node = nodes_[v.id()];
  if (node.adjoint.size() == 0) return Eigen::VectorXd::Zero(node.value.size());
  return node.adjoint;
}

void Tape::backward(const Var& loss) {
  check_owned(loss);
  if (backward_done_) throw StateError("backward() already ran on this tape");
  Node& root = nodes_[loss.id()];
  if (root.value.size() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " + shape_string(root.value.shape()));
  }
  backward_done_ = true;

  root.adjoint = Eigen::VectorXd::Ones(1);
  std::vector<Eigen::VectorXd*> slots;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (node.is_leaf || !node.needs_grad || node.adjoint.size() == 0) continue;
    slots.assign(node.inputs.size(), nullptr);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      Node& in = nodes_[node.inputs[k]];
      if (!in.needs_grad) continue;
      if (in.adjoint.size() == 0) in.adjoint = Eigen::VectorXd::Zero(in.value.size());
      slots[k] = &in.adjoint;
    }
    node.backward(node.adjoint, slots);
    // Interior adjoints are dead once propagated.
    node.adjoint = Eigen::VectorXd();
    node.backward = nullptr;
  }

  for (Node& node : nodes_) {
    if (node.target && node.needs_grad) {
      node.target->set_grad(node.adjoint.size() ? node.adjoint
                                                : Eigen::VectorXd::Zero(node.value.size()));
    }
  }
}

}  // namespace blindsr
