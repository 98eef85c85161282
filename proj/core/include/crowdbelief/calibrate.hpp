#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "crowdbelief/gibbs.hpp"

namespace crowdbelief {

enum class ScoringRule { kBrier, kLogarithmic };

std::string to_string(ScoringRule rule);
ScoringRule scoring_rule_from_string(const std::string& name);

/// Probabilities are clamped this far inside (0, 1) before the logarithmic
/// score so the calibration objective stays finite.
inline constexpr double kScoreClamp = 1e-12;

/// Reward (<= 0) of the logit-scale estimate x against the outcome.
/// Brier: -(z - p)^2; logarithmic: z log p + (1-z) log(1-p), p = invlogit(x).
double score(ScoringRule rule, int outcome, double x);

/// Sum of scores of paths/beta against outcomes; the quantity maximized by
/// the calibration step.
double calibration_objective(const std::vector<StatePath>& paths,
                             const std::vector<int>& outcomes, ScoringRule rule,
                             double beta);

/// Scale recovered by maximizing the summed proper score of x/beta over
/// beta > 0 (log-spaced grid plus golden-section refinement, tolerance 1e-6
/// on beta). Requires at least two questions and both outcome labels.
double estimate_beta(const std::vector<StatePath>& paths, const std::vector<int>& outcomes,
                     ScoringRule rule);

/// The unconstrained estimates implied by a scale: paths X/beta, loadings
/// b * beta, state variances tau^2 / beta^2; observation variances and
/// drifts carried over bit-for-bit.
struct CalibrationResult {
  double beta = 1.0;
  std::vector<double> bias;
  std::vector<double> obs_var;
  std::vector<double> drift;
  std::vector<double> state_var;
  std::vector<StatePath> paths;
};

CalibrationResult apply_beta(const ConstrainedDraw& constrained, double beta);

/// Point-estimate calibration record (the external report format).
struct CalibrationReport {
  double beta = 1.0;
  double objective = 0.0;
  ScoringRule rule = ScoringRule::kLogarithmic;
  std::size_t n_questions = 0;
  std::size_t n_days = 0;
  /// Objective at -beta, reported as a sign-convention diagnostic.
  double objective_at_negated = 0.0;
};

void write_calibration_report(const std::filesystem::path& path, const CalibrationReport& report);
CalibrationReport read_calibration_report(const std::filesystem::path& path);

/// Calibrates the posterior-mean paths of a chain (the point-estimate
/// procedure) and returns the report.
CalibrationReport calibrate_chain(const std::vector<ConstrainedDraw>& chain,
                                  const std::vector<int>& outcomes, ScoringRule rule);

/// Fills each draw's beta by calibrating that draw's paths, producing the
/// (b(1), beta) sequence consumed by out-of-sample aggregation.
void calibrate_draws(std::vector<ConstrainedDraw>& chain, const std::vector<int>& outcomes,
                     ScoringRule rule);

/// One training draw's conditioning values for out-of-sample runs.
struct TrainedPair {
  std::vector<double> bias;
  double beta = 1.0;
};

std::vector<TrainedPair> trained_pairs(const std::vector<ConstrainedDraw>& chain);

/// Out-of-sample aggregate for one panel. Entry t is computed from days
/// <= t only, so rerunning on a prefix reproduces the stored values exactly.
struct SacAggregate {
  std::vector<double> mean_logit;  // posterior mean of x_t / beta
  std::vector<double> mean_prob;   // inverse_logit of the above
  std::vector<double> lo95;        // point-wise 95% posterior interval, probability scale
  std::vector<double> hi95;
};

/// Sequential aggregation: for each day t a Gibbs pass over the first t days
/// conditions on (b, beta) read per iteration from the trained sequence
/// (cycling); the panel's outcome is never consulted.
SacAggregate sac_out_of_sample(const QuestionPanel& panel, const std::vector<TrainedPair>& trained,
                               const GibbsConfig& config);

/// Controls for the fully Bayesian variant, which targets the product of the
/// model conditional and the outcome likelihood and samples the scale beta
/// alongside the states.
struct BsacConfig {
  GibbsConfig gibbs;
  /// Weight on the outcome-likelihood factor. Zero reduces the target to the
  /// constrained model (used by the reduction check).
  double outcome_weight = 1.0;
  /// Random-walk step-size adaptation phase before the recorded run.
  int pilot_iterations = 200;
};

struct BsacResult {
  std::vector<ConstrainedDraw> draws;  // beta always present
  double state_accept_rate = 0.0;      // post-pilot averages
  double beta_accept_rate = 0.0;
};

BsacResult bsac_sample(const Dataset& dataset, const BsacConfig& config);

}  // namespace crowdbelief
