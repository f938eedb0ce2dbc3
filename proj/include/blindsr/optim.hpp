#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "blindsr/tensor.hpp"

namespace blindsr {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool operator==(const AdamHyper&) const = default;
};

struct AdamMoments {
  Eigen::VectorXd first;
  Eigen::VectorXd second;
};

// Moment buffers matching each parameter, zero initialized.
std::vector<AdamMoments> make_moments(std::span<const Tensor* const> params);

/// Bias-corrected Adam. `step` counts from 1. Parameters without a gradient are skipped.
void adam_update(std::span<Tensor* const> params, std::span<const Eigen::VectorXd* const> grads,
                 std::span<AdamMoments> moments, std::int64_t step, double lr, const AdamHyper& hyper);

// min_lr + (base_lr - min_lr) (1 + cos(pi step / total)) / 2.
double cosine_lr(std::int64_t step, std::int64_t total, double base_lr, double min_lr);

}  // namespace blindsr
