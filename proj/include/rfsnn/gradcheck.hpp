#pragma once

// Finite-difference verification of every analytic derivative in the
// library, in 64-bit arithmetic.

#include <cstdint>
#include <string>
#include <vector>

namespace rfsnn {

struct GradCheckOptions {
  double tolerance = 1e-5;
  /// Tolerance for the whole-network check, as a multiple of `tolerance`.
  double composite_factor = 10.0;
  std::uint64_t seed = 1;
  /// Test hook: perturbs the resonator weight derivative by 0.1 %.
  bool inject_fault = false;
};

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t checked = 0;  // coordinates compared
  std::size_t skipped = 0;  // coordinates whose stencil crossed a kink
  bool passed = false;
};

/// |a - n| / max(|a|, |n|, floor); 0 when both vanish.
double relative_error(double analytic, double numeric, double floor);

std::vector<GradCheckResult> run_gradient_suite(const GradCheckOptions& opts);

}  // namespace rfsnn
