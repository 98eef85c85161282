#pragma once

#include <functional>
#include <vector>

namespace crowdbelief {

struct NelderMeadOptions {
  int max_iterations = 400;
  double tolerance = 1e-10;  // spread of simplex values at convergence
  double initial_step = 0.25;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
};

/// Derivative-free simplex minimization (reflection / expansion /
/// contraction / shrink with the classic coefficients). Deterministic.
NelderMeadResult nelder_mead_minimize(const std::function<double(const std::vector<double>&)>& fn,
                                      const std::vector<double>& start,
                                      const NelderMeadOptions& options = {});

}  // namespace crowdbelief
