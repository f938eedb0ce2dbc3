#include "blindsr/alignment.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "blindsr/errors.hpp"
#include "blindsr/ops.hpp"
#include "blindsr/seed.hpp"

namespace blindsr {

RffProjector::RffProjector(std::uint64_t seed, Index n) : seed_(seed) {
  if (n < 1) throw ConfigError("RFF dimension must be >= 1");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  omegas_.resize(n);
  phases_.resize(n);
  for (Index k = 0; k < n; ++k) {
    omegas_[k] = normal(rng);
    phases_[k] = phase(rng);
  }
}

RffProjector::RffProjector(Eigen::VectorXd omegas, Eigen::VectorXd phases, std::uint64_t seed)
    : omegas_(std::move(omegas)), phases_(std::move(phases)), seed_(seed) {
  if (omegas_.size() < 1 || omegas_.size() != phases_.size()) {
    throw ConfigError("RFF projector needs matching, non-empty omega and phase vectors");
  }
}

Eigen::VectorXd RffProjector::map(double z) const {
  return std::numbers::sqrt2 * (omegas_.array() * z + phases_.array()).cos().matrix();
}

void validate(const AlignmentConfig& config) {
  if (!std::isfinite(config.weight) || config.weight < 0.0) {
    throw ConfigError("alignment weight must be finite and nonnegative");
  }
  if (config.mode == AlignmentMode::Nonlinear && config.rff_dim < 1) {
    throw ConfigError("rff_dim must be >= 1");
  }
}

std::string_view mode_name(AlignmentMode mode) {
  return mode == AlignmentMode::Linear ? "linear" : "nonlinear";
}

AlignmentMode mode_from_name(std::string_view name) {
  if (name == "linear") return AlignmentMode::Linear;
  if (name == "nonlinear") return AlignmentMode::Nonlinear;
  throw ConfigError("unknown alignment mode '" + std::string(name) + "'");
}

std::string_view convention_name(CovarianceConvention convention) {
  return convention == CovarianceConvention::Standard ? "standard" : "paper-literal";
}

CovarianceConvention convention_from_name(std::string_view name) {
  if (name == "standard") return CovarianceConvention::Standard;
  if (name == "paper-literal") return CovarianceConvention::PaperLiteral;
  throw ConfigError("unknown covariance convention '" + std::string(name) + "'");
}

namespace {

void require_matrix(const char* op, const Var& v) {
  if (v.value().dim() != 2) {
    throw DimensionError(std::string(op) + ": expected an [N x C] feature matrix, got " + shape_string(v.shape()));
  }
}

void require_pair(const char* op, const Var& x, const Var& xp) {
  require_matrix(op, x);
  if (x.shape() != xp.shape()) {
    throw ContractError(std::string(op) + ": feature shapes differ, " + shape_string(x.shape()) + " vs " +
                        shape_string(xp.shape()));
  }
}

}  // namespace

Var spatial_mean(Var features) {
  require_matrix("spatial_mean", features);
  return column_mean(features);
}

Var channel_covariance(Var features, CovarianceConvention convention) {
  require_matrix("channel_covariance", features);
  const Index n = features.shape()[0];
  const Index c = features.shape()[1];
  const double count = static_cast<double>(convention == CovarianceConvention::Standard ? n : c);
  if (count < 2.0) {
    throw DegenerateInputError(convention == CovarianceConvention::Standard
                                   ? "channel_covariance: need at least 2 spatial positions"
                                   : "channel_covariance: paper-literal convention needs at least 2 channels");
  }
  Var gram = matmul(transpose(features), features);
  Var totals = column_sum(features);
  Var outer = matmul(transpose(totals), totals);
  return scale(sub(gram, scale(outer, 1.0 / count)), 1.0 / (count - 1.0));
}

Var linear_alignment_loss(Var x, Var x_prime, CovarianceConvention convention) {
  require_pair("linear_alignment_loss", x, x_prime);
  Var cov_term = sum_squares(sub(channel_covariance(x, convention), channel_covariance(x_prime, convention)));
  Var mean_term = sum_squares(sub(spatial_mean(x), spatial_mean(x_prime)));
  return add(cov_term, mean_term);
}

Var rff_map(Var features, const RffProjector& projector) {
  require_matrix("rff_map", features);
  const Tensor& z = features.value();
  const Index rows = z.extent(0), c = z.extent(1), n = projector.dim();
  Tensor out({rows, n * c});
  MatrixMap om = out.matrix();
  ConstMatrixMap zm = z.matrix();
  for (Index k = 0; k < n; ++k) {
    const double w = projector.omegas()[k], phi = projector.phases()[k];
    om.middleCols(k * c, c) = std::numbers::sqrt2 * (w * zm.array() + phi).cos();
  }
  return features.tape().record(
      std::move(out), {features},
      [features, omegas = projector.omegas(), phases = projector.phases(), rows, c](const Eigen::VectorXd& g,
                                                                                    auto grads) {
        ConstMatrixMap zm = features.value().matrix();
        ConstMatrixMap gm(g.data(), rows, omegas.size() * c);
        MatrixMap dz(grads[0]->data(), rows, c);
        for (Index k = 0; k < omegas.size(); ++k) {
          const double w = omegas[k];
          dz.array() -= (std::numbers::sqrt2 * w) * (w * zm.array() + phases[k]).sin() *
                        gm.middleCols(k * c, c).array();
        }
      });
}

Var nonlinear_alignment_loss(Var x, Var x_prime, const RffProjector& projector, CovarianceConvention convention) {
  require_pair("nonlinear_alignment_loss", x, x_prime);
  return linear_alignment_loss(rff_map(x, projector), rff_map(x_prime, projector), convention);
}

Var alignment_loss(Var x, Var x_prime, const AlignmentConfig& config) {
  validate(config);
  Var loss = config.mode == AlignmentMode::Linear
                 ? linear_alignment_loss(x, x_prime, config.covariance_convention)
                 : nonlinear_alignment_loss(x, x_prime, RffProjector(config.rff_seed, config.rff_dim),
                                            config.covariance_convention);
  return scale(loss, config.weight);
}

}  // namespace blindsr
