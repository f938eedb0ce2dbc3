#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blindsr/grad_check.hpp"

namespace blindsr {

struct GradCheckCase {
  std::string name;
  std::uint64_t seed = 0;
  GradCheckReport report;
};

// Names of the checked graphs, in run order.
std::vector<std::string> gradcheck_case_names();

/// Finite-difference check of every differentiable operation and of complete
/// training-step graphs on a miniature model, for `seeds` consecutive seeds.
std::vector<GradCheckCase> run_gradcheck_suite(int seeds = 10, std::uint64_t base_seed = 0, double tol = 1e-4,
                                               double step = 1e-6);

}  // namespace blindsr
