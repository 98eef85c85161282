#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crowdbelief/csv.hpp"
#include "crowdbelief/domain.hpp"
#include "crowdbelief/gibbs.hpp"
#include "crowdbelief/rng.hpp"

namespace crowdbelief {

/// Group loadings before scaling: five expertise groups running from
/// strongly underconfident to strongly overconfident.
inline const std::vector<double> kSynthBaseBias = {0.5, 0.75, 1.0, 4.0 / 3.0, 2.0};

struct SynthConfig {
  int horizon = 101;          // T; forecasts cover days 1..T-1
  int experts_per_group = 10; // across 5 expertise groups
  double obs_var = 1.0;       // noise added to expert logits
  double beta = 1.0;          // scales the base loading vector
  int questions = 20;         // K
  std::uint64_t seed = 0;
};

/// Ground truth behind one generated question. The hidden path is
/// x_t = logit(Phi(z_t / sqrt(T - t))) for t < T: the calibrated probability
/// that the driving random walk ends above zero.
struct SynthTruth {
  std::vector<double> brownian;  // z_t, t = 1..T
  std::vector<double> hidden;    // x_t, t = 1..T-1 (logit scale)
  int outcome = 0;               // indicator(z_T > 0)
  std::vector<double> bias;      // the scaled loading vector
};

SynthTruth generate_truth(int horizon, Rng& rng);

/// One question: a unit-step Gaussian random walk drives the hidden path;
/// every expert reports once per day for t < T with logit
/// b_group * x_t + noise. The final day carries the outcome only.
std::pair<QuestionPanel, SynthTruth> generate_question(const SynthConfig& config,
                                                       const std::string& question_id, Rng& rng);

struct SynthDataset {
  Dataset dataset;
  std::vector<SynthTruth> truths;
};

SynthDataset generate_dataset(const SynthConfig& config);

/// Export helpers. Panels only keep (logit, group) pairs, so exported expert
/// ids are positional within each slice.
std::vector<ForecastRow> to_forecast_rows(const Dataset& dataset);
std::vector<OutcomeRow> to_outcome_rows(const Dataset& dataset);
std::vector<TruthRow> to_truth_rows(const Dataset& dataset, const std::vector<SynthTruth>& truths);

enum class StudyMethod { kSacBrier, kSacLog, kEwma, kOracle };

std::string to_string(StudyMethod method);

/// One loss measurement: `quantity` is "hidden" or "bias", `loss_type` is
/// "quadratic" or "absolute", `value` the loss averaged within the replicate.
struct StudyRow {
  std::string method;
  double sigma2 = 0.0;
  double beta = 0.0;
  int questions = 0;
  int replicate = 0;
  std::string quantity;
  std::string loss_type;
  double value = 0.0;
};

struct StudyConfig {
  std::vector<double> sigma2_grid = {0.5, 1.0, 1.5, 2.0, 2.5};
  std::vector<double> beta_grid = {0.5, 0.75, 1.0, 4.0 / 3.0, 2.0};
  std::vector<int> k_grid = {20, 40, 60, 80, 100};
  int replicates = 40;
  std::vector<StudyMethod> methods = {StudyMethod::kSacBrier, StudyMethod::kSacLog,
                                      StudyMethod::kEwma};
  SynthConfig base;              // horizon / experts carried into each cell
  GibbsConfig sac = GibbsConfig::study_defaults();
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Runs every method over the (sigma^2, beta, K) grid with `replicates`
/// fresh datasets per cell. Each cell-replicate derives its seed from the
/// master seed by mixing in the grid indices, so cells are reproducible and
/// independent of evaluation order. Hidden-process losses compare the
/// estimated probabilities with the calibrated truth over days 1..T-1;
/// loading losses apply to the SAC variants only. The oracle method emits
/// the truth itself and is meant for harness checks.
std::vector<StudyRow> run_study(const StudyConfig& config);

void write_study_csv(const std::filesystem::path& path, const std::vector<StudyRow>& rows);

/// Mean `value` over rows matching the filters (empty string matches all).
double study_mean(const std::vector<StudyRow>& rows, const std::string& method,
                  const std::string& quantity, const std::string& loss_type,
                  double beta_filter = -1.0);

}  // namespace crowdbelief
