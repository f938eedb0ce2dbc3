#pragma once

#include <cstdint>
#include <string_view>

#include <Eigen/Dense>

#include "blindsr/tensor.hpp"

namespace blindsr {

enum class AlignmentMode { Linear, Nonlinear };

// Standard: sample covariance over the N spatial positions, 1/(N-1) and 1/N.
// PaperLiteral: the same expression with the channel count C in place of N.
enum class CovarianceConvention { Standard, PaperLiteral };

/// Frozen random Fourier feature sample: n pairs (omega ~ N(0, 1), phi ~ U(0, 2pi)).
/// Each scalar z maps to sqrt(2) cos(omega_k z + phi_k), k = 0..n-1, whose inner
/// products approximate the unit-bandwidth RBF kernel exp(-(x - y)^2 / 2).
class RffProjector {
 public:
  RffProjector(std::uint64_t seed, Index n);
  // Explicit frequencies, for degenerate and analytic cases.
  RffProjector(Eigen::VectorXd omegas, Eigen::VectorXd phases, std::uint64_t seed = 0);

  Index dim() const { return omegas_.size(); }
  std::uint64_t seed() const { return seed_; }
  const Eigen::VectorXd& omegas() const { return omegas_; }
  const Eigen::VectorXd& phases() const { return phases_; }

  // Mapped features of one scalar, length dim().
  Eigen::VectorXd map(double z) const;

 private:
  Eigen::VectorXd omegas_;
  Eigen::VectorXd phases_;
  std::uint64_t seed_ = 0;
};

struct AlignmentConfig {
  AlignmentMode mode = AlignmentMode::Linear;
  Index rff_dim = 8;
  std::uint64_t rff_seed = 0;
  double weight = 1.0;
  CovarianceConvention covariance_convention = CovarianceConvention::Standard;
  bool operator==(const AlignmentConfig&) const = default;
};

void validate(const AlignmentConfig& config);

std::string_view mode_name(AlignmentMode mode);
AlignmentMode mode_from_name(std::string_view name);
std::string_view convention_name(CovarianceConvention convention);
CovarianceConvention convention_from_name(std::string_view name);

// All feature arguments below are [N x C] feature matrices (see feature_matrix()).

// [1 x C] average over the N spatial positions.
Var spatial_mean(Var features);

// [C x C] channel covariance, (z^T z - (1/N)(1^T z)^T (1^T z)) / (N - 1) in the
// standard convention.
Var channel_covariance(Var features, CovarianceConvention convention = CovarianceConvention::Standard);

// ||Cov(x) - Cov(x')||_F^2 + ||mu(x) - mu(x')||^2.
Var linear_alignment_loss(Var x, Var x_prime, CovarianceConvention convention = CovarianceConvention::Standard);

// [N x C] -> [N x (n*C)], column k*C + c holds sqrt(2) cos(omega_k z_c + phi_k).
Var rff_map(Var features, const RffProjector& projector);

// Linear alignment of the RFF-mapped features; one projector shared by both sides.
Var nonlinear_alignment_loss(Var x, Var x_prime, const RffProjector& projector,
                             CovarianceConvention convention = CovarianceConvention::Standard);

// weight * (selected loss). The projector is rebuilt from (rff_seed, rff_dim).
Var alignment_loss(Var x, Var x_prime, const AlignmentConfig& config);

}  // namespace blindsr
