#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>

#include "blindsr/tensor.hpp"

namespace blindsr {

// Builds a scalar loss on `tape` from the differentiable input `x`.
using ScalarFunction = std::function<Var(Tape& tape, Var x)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  Index worst_coordinate = -1;
  bool passed = false;
  // Coordinates judged by one-sided differences because a kink was within one step.
  Index kink_coordinates = 0;
  // Set when the function was non-finite at some probe.
  std::optional<std::string> failure;
};

/// Compares reverse-mode gradients with central differences (f(x+h) - f(x-h)) / 2h.
///
/// The per-coordinate error is |analytic - numeric| / max(|analytic|, |numeric|, floor)
/// where floor = 1e-3 * max_i |numeric_i| (and at least 1e-10), so coordinates
/// that are negligible relative to the whole gradient are judged on the
/// gradient's own scale rather than their own. Where the forward and backward
/// one-sided differences disagree by more than 1%, a non-differentiable point
/// (ReLU or L1 kink) lies within one step; such a coordinate passes if the
/// analytic value matches either one-sided difference.
GradCheckReport grad_check(const ScalarFunction& f, const Tensor& point, double step, double tol);

// Builds a scalar loss that binds the checked tensors with tape.parameter().
using ParameterFunction = std::function<Var(Tape& tape)>;

// Same comparison for tensors bound as parameters, flattened in order. The
// tensors are perturbed in place and restored.
GradCheckReport grad_check_parameters(const ParameterFunction& f, std::span<Tensor* const> params, double step,
                                      double tol);

}  // namespace blindsr
