#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "crowdbelief/calibrate.hpp"
#include "crowdbelief/domain.hpp"
#include "crowdbelief/methods.hpp"

namespace crowdbelief {

/// Cross-validation folds: question counts per fold differ by at most one
/// and day totals are balanced greedily.
struct FoldPlan {
  int n_folds = 0;
  std::vector<std::vector<std::size_t>> folds;  // question indices per fold
};

/// Greedy balanced folds: questions in descending horizon order go to the
/// fold with the smallest running day total among folds still below their
/// count cap. The seed shuffles questions before the (stable) sort, so
/// equal-horizon ties vary across seeds while a fixed seed reproduces the
/// plan exactly.
FoldPlan make_folds(const Dataset& dataset, int n, std::uint64_t seed);

enum class LengthClass { kShort, kMedium, kLong };  // horizons <=30 / 31..59 / >=60

LengthClass length_class(int horizon);
std::string to_string(LengthClass c);

struct ScoreRecord {
  std::string method;
  std::string question_id;
  int day = 0;
  double brier = 0.0;  // (Z - p_hat)^2, lower is better
};

struct EvaluationReport {
  std::vector<ScoreRecord> scores;
  std::map<std::string, int> horizons;  // question_id -> T
  /// Aggregate probability / outcome pairs per method, for calibration
  /// diagnostics over the out-of-sample aggregates.
  std::map<std::string, std::vector<std::pair<double, int>>> method_forecasts;
  /// One entry per skipped (method, fold) with the failure reason.
  std::vector<std::string> annotations;
};

/// Out-of-sample evaluation: for each fold, every method trains on the other
/// folds and aggregates each test question sequentially, scoring days
/// 2..T_k against the outcome with the Brier score. Methods never see a test
/// question's outcome: panels are stripped before aggregation. A method whose
/// training fails is skipped for that fold with an annotation.
EvaluationReport run_cv(const Dataset& dataset, const std::vector<std::string>& method_names,
                        const MethodConfig& method_config, const FoldPlan& plan,
                        std::uint64_t seed, int threads = 1);

enum class SummaryMode { kByDay, kByProblem };

struct Summary {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

/// By-day: mean and sample SD over every (question, day) score. By-problem:
/// questions weighted equally, SD over the per-question means.
Summary summarize(const EvaluationReport& report, const std::string& method, SummaryMode mode,
                  std::optional<LengthClass> filter = std::nullopt);

struct ReliabilityBin {
  double center = 0.0;  // mean forecast in the bin
  double freq = 0.0;    // empirical event frequency
  std::size_t count = 0;
  double lo = 0.0;      // consistency band under the calibration null
  double hi = 0.0;
};

using ReliabilityTable = std::vector<ReliabilityBin>;

/// Equal-count bins by forecast value; bands are per-bin quantiles of the
/// bootstrap null (outcomes resampled as Bernoulli of the forecast),
/// Bonferroni-corrected across bins.
ReliabilityTable reliability(const std::vector<std::pair<double, int>>& forecasts, int bins = 10,
                             int n_boot = 10000, double level = 0.95, std::uint64_t seed = 0);

/// Posterior probabilities of ordering events of the group loadings.
/// Standard events: largest_j for each group, strictly_increasing,
/// strictly_decreasing, all_below_1, all_above_1. Each extra ordering is a
/// permutation of 1..J asserting b[perm_1] < b[perm_2] < ... < b[perm_J],
/// keyed "ordering_i<j<...".
std::map<std::string, double> bias_ordering(
    const std::vector<std::vector<double>>& bias_draws,
    const std::vector<std::vector<int>>& extra_orderings = {});

struct GroupQuantiles {
  double q025 = 0.0, q25 = 0.0, q50 = 0.0, q75 = 0.0, q975 = 0.0;
};

/// Per-group posterior quantiles (boxplot-style table).
std::vector<GroupQuantiles> bias_quantiles(const std::vector<std::vector<double>>& bias_draws);

/// Per-question parameter readout with interpretation labels: sigma^2 as
/// expert disagreement, tau^2 as circumstance volatility, gamma as drift.
struct QuestionDifficulty {
  std::string question_id;
  double disagreement = 0.0;  // sigma^2
  double volatility = 0.0;    // tau^2
  double drift = 0.0;         // gamma
};

std::vector<QuestionDifficulty> question_difficulty(const CalibrationResult& fit,
                                                    const std::vector<std::string>& question_ids);

// Report exports.
void write_scores_csv(const std::filesystem::path& path, const EvaluationReport& report);
void write_summary_csv(const std::filesystem::path& path, const EvaluationReport& report,
                       const std::vector<std::string>& methods);
void write_reliability_csv(const std::filesystem::path& path, const ReliabilityTable& table);

}  // namespace crowdbelief
