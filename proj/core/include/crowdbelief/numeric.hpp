#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace crowdbelief {

/// Regularized incomplete beta function I_x(a, b) for a, b > 0 and
/// x in [0, 1], via the Lentz continued fraction with the symmetry switch
/// at x > (a + 1) / (a + b + 2). Absolute error target 1e-12.
double regularized_incomplete_beta(double x, double a, double b);

/// Standard normal CDF.
double normal_cdf(double z);

double mean(std::span<const double> xs);

/// Sample variance (n - 1 denominator); zero for fewer than two points.
double sample_variance(std::span<const double> xs);

double sample_sd(std::span<const double> xs);

/// Empirical quantile with linear interpolation between order statistics.
/// q in [0, 1]; the input need not be sorted.
double quantile(std::vector<double> xs, double q);

double median(std::vector<double> xs);

}  // namespace crowdbelief
