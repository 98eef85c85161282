#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "crowdbelief/domain.hpp"

namespace crowdbelief {

/// Smoothed expertise-weighted mean of probabilities.
struct EwmaParams {
  double alpha = 1.0;
  std::vector<double> weights;  // simplex over the J expertise groups
};

/// Smoothed odds-product aggregate with per-group exponents.
struct EwmlaParams {
  double alpha = 1.0;
  std::vector<double> bias;  // unconstrained, one per group
};

/// Smoothed Beta-CDF transform of the weighted mean. `shape1` is the CDF's
/// first shape (nu); the second shape is renamed from the source notation to
/// avoid clashing with the state variance.
struct EwmbaParams {
  double alpha = 1.0;
  double shape1 = 1.0;
  double shape2 = 1.0;
  std::vector<double> weights;
};

enum class BaselineFamily { kEwma, kEwmla, kEwmba };

std::string to_string(BaselineFamily family);
BaselineFamily baseline_family_from_string(const std::string& name);

/// Weighted mean of a day's probabilities: within-group means combined with
/// the weights renormalized over the groups actually present. Empty slice
/// means "no update" (nullopt). A present-group weight total of zero falls
/// back to equal weighting over the present groups.
std::optional<double> group_weighted_mean(const std::vector<LogitForecast>& slice,
                                          const std::vector<double>& weights);

/// Odds-product aggregate: odds_i^(b_{g(i)}/N) multiplied over the slice and
/// mapped back to a probability. Empty slice means "no update".
std::optional<double> ewmla_aggregate(const std::vector<LogitForecast>& slice,
                                      const std::vector<double>& bias);

/// Beta-CDF transform of the weighted mean. Empty slice means "no update".
std::optional<double> ewmba_aggregate(const std::vector<LogitForecast>& slice,
                                      const EwmbaParams& params);

/// Per-day aggregate paths. The first day with data starts the recursion;
/// later empty days carry the previous value forward; days before any data
/// emit the 0.5 baseline.
std::vector<double> ewma_path(const QuestionPanel& panel, const EwmaParams& params);
std::vector<double> ewmla_path(const QuestionPanel& panel, const EwmlaParams& params);
std::vector<double> ewmba_path(const QuestionPanel& panel, const EwmbaParams& params);

using BaselineParams = std::variant<EwmaParams, EwmlaParams, EwmbaParams>;

std::vector<double> baseline_path(const QuestionPanel& panel, const BaselineParams& params);

struct BaselineFitResult {
  BaselineParams params;
  double objective = 0.0;  // achieved sum of squared errors against outcomes
};

/// Least-squares fit of a family against resolved outcomes over the training
/// panels (sum over questions and days of (Z - p_hat)^2). The simplex is
/// reparameterized through a normalized exponential map and optimized by
/// Nelder-Mead from the family defaults plus `restarts` random starts, so
/// the fitted objective never exceeds the default-parameter objective.
BaselineFitResult fit_baseline(const Dataset& training, BaselineFamily family,
                               std::uint64_t seed, int restarts = 10);

/// Fitted-parameter report (one JSON record).
void write_baseline_params(const std::filesystem::path& path, const BaselineFitResult& fit);
BaselineFitResult read_baseline_params(const std::filesystem::path& path);

}  // namespace crowdbelief
