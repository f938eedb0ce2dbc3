#include "blindsr/optim.hpp"

#include <cmath>
#include <numbers>

#include "blindsr/errors.hpp"

namespace blindsr {

std::vector<AdamMoments> make_moments(std::span<const Tensor* const> params) {
  std::vector<AdamMoments> moments;
  moments.reserve(params.size());
  for (const Tensor* p : params) {
    moments.push_back({Eigen::VectorXd::Zero(p->size()), Eigen::VectorXd::Zero(p->size())});
  }
  return moments;
}

void adam_update(std::span<Tensor* const> params, std::span<const Eigen::VectorXd* const> grads,
                 std::span<AdamMoments> moments, std::int64_t step, double lr, const AdamHyper& hyper) {
  if (params.size() != grads.size() || params.size() != moments.size()) {
    throw ContractError("adam_update: parameter, gradient and moment counts differ");
  }
  if (step < 1) throw ContractError("adam_update: step must be >= 1");
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!grads[k]) continue;
    Eigen::VectorXd& p = params[k]->data();
    const Eigen::VectorXd& g = *grads[k];
    AdamMoments& m = moments[k];
    if (g.size() != p.size() || m.first.size() != p.size() || m.second.size() != p.size()) {
      throw ContractError("adam_update: shape mismatch for parameter " + std::to_string(k));
    }
    m.first = hyper.beta1 * m.first + (1.0 - hyper.beta1) * g;
    m.second = hyper.beta2 * m.second + (1.0 - hyper.beta2) * g.cwiseAbs2();
    p.array() -= lr * (m.first.array() / c1) / ((m.second.array() / c2).sqrt() + hyper.eps);
  }
}

double cosine_lr(std::int64_t step, std::int64_t total, double base_lr, double min_lr) {
  if (total <= 0 || step < 0 || step > total) throw ContractError("cosine_lr: need 0 <= step <= total");
  const double phase = std::numbers::pi * static_cast<double>(step) / static_cast<double>(total);
  return min_lr + (base_lr - min_lr) * (1.0 + std::cos(phase)) / 2.0;
}

}  // namespace blindsr
