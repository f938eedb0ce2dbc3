#include "blindsr/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "blindsr/errors.hpp"

namespace blindsr {

namespace {

double evaluate(const ScalarFunction& f, const Tensor& x) {
  Tape tape;
  Var in = tape.constant(x);
  return f(tape, in).value().item();
}

struct Probe {
  double base;
  double plus;
  double minus;
};

// Central difference, except where the two one-sided differences disagree:
// then a kink lies within one step of the point, the central difference mixes
// two pieces, and the analytic gradient is compared with the one-sided
// difference on each side instead.
void compare(const Eigen::VectorXd& analytic, const std::vector<Probe>& probes, double step, double tol,
             GradCheckReport& report) {
  const Index n = analytic.size();
  Eigen::VectorXd central(n), forward(n), backward(n);
  for (Index i = 0; i < n; ++i) {
    const Probe& p = probes[static_cast<std::size_t>(i)];
    central[i] = (p.plus - p.minus) / (2.0 * step);
    forward[i] = (p.plus - p.base) / step;
    backward[i] = (p.base - p.minus) / step;
  }
  const double floor = std::max(1e-10, 1e-3 * central.cwiseAbs().maxCoeff());
  auto rel = [floor](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor}); };
  for (Index i = 0; i < n; ++i) {
    double err = rel(analytic[i], central[i]);
    if (err > tol && rel(forward[i], backward[i]) > 1e-2) {
      ++report.kink_coordinates;
      err = std::min(rel(analytic[i], forward[i]), rel(analytic[i], backward[i]));
    }
    if (report.worst_coordinate < 0 || err > report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_coordinate = i;
    }
  }
  report.passed = report.max_relative_error <= tol;
}

}  // namespace

GradCheckReport grad_check(const ScalarFunction& f, const Tensor& point, double step, double tol) {
  if (!(step > 0.0)) throw ContractError("grad_check: step must be positive");
  GradCheckReport report;

  Eigen::VectorXd analytic;
  double base = 0.0;
  {
    Tape tape;
    Var x = tape.variable(point);
    Var loss = f(tape, x);
    base = loss.value().item();
    if (!std::isfinite(base)) {
      report.failure = "non-finite function value at the base point";
      return report;
    }
    tape.backward(loss);
    analytic = tape.grad(x);
  }

  const Index n = point.size();
  std::vector<Probe> probes(static_cast<std::size_t>(n));
  Tensor probe = point;
  for (Index i = 0; i < n; ++i) {
    const double orig = probe[i];
    probe[i] = orig + step;
    const double fp = evaluate(f, probe);
    probe[i] = orig - step;
    const double fm = evaluate(f, probe);
    probe[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      report.failure = "non-finite function value when perturbing coordinate " + std::to_string(i);
      report.worst_coordinate = i;
      return report;
    }
    probes[static_cast<std::size_t>(i)] = {base, fp, fm};
  }

  compare(analytic, probes, step, tol, report);
  return report;
}

GradCheckReport grad_check_parameters(const ParameterFunction& f, std::span<Tensor* const> params, double step,
                                      double tol) {
  if (!(step > 0.0)) throw ContractError("grad_check_parameters: step must be positive");
  GradCheckReport report;
  Index total = 0;
  for (Tensor* p : params) total += p->size();
  Eigen::VectorXd analytic = Eigen::VectorXd::Zero(total);
  double base = 0.0;
  {
    Tape tape;
    Var loss = f(tape);
    base = loss.value().item();
    if (!std::isfinite(base)) {
      report.failure = "non-finite function value at the base point";
      return report;
    }
    tape.backward(loss);
    Index offset = 0;
    for (Tensor* p : params) {
      if (p->grad()) analytic.segment(offset, p->size()) = *p->grad();
      p->clear_grad();
      offset += p->size();
    }
  }
  auto value = [&f] {
    Tape tape;
    return f(tape).value().item();
  };
  std::vector<Probe> probes(static_cast<std::size_t>(total));
  Index flat = 0;
  for (Tensor* p : params) {
    for (Index i = 0; i < p->size(); ++i, ++flat) {
      const double orig = (*p)[i];
      (*p)[i] = orig + step;
      const double fp = value();
      (*p)[i] = orig - step;
      const double fm = value();
      (*p)[i] = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        report.failure = "non-finite function value when perturbing coordinate " + std::to_string(flat);
        report.worst_coordinate = flat;
        return report;
      }
      probes[static_cast<std::size_t>(flat)] = {base, fp, fm};
    }
  }
  compare(analytic, probes, step, tol, report);
  return report;
}

}  // namespace blindsr
