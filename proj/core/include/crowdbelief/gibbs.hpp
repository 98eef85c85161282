#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crowdbelief/dlm.hpp"
#include "crowdbelief/domain.hpp"
#include "crowdbelief/rng.hpp"

namespace crowdbelief {

/// Run-length and prior controls for the constrained Gibbs sampler.
struct GibbsConfig {
  int iterations = 3000;
  int burn_in = 500;
  int thin = 5;
  std::uint64_t seed = 0;
  /// Reference group whose loading is pinned to 1; 0 selects the highest
  /// group (the one believed a priori most extreme).
  int ref_group = 0;
  /// Exponent e in the observation-variance prior p(sigma^2) ~ (sigma^2)^e.
  /// +1 is the model's stated prior; -1 gives the Jeffreys-style form. The
  /// conditional is proper only when a question carries more than
  /// 2 * (e + 1) forecasts.
  double prior_exponent_obs = 1.0;
  /// Same for the state variance; proper when the horizon exceeds 2 * (e + 1).
  double prior_exponent_state = 1.0;
  /// Pins every group loading to 1 (the plain smoothing model, no shared
  /// bias estimation).
  bool pin_all_biases = false;
  int threads = 1;

  /// 3000 / 500 / thin 5 — the full training schedule.
  static GibbsConfig training_defaults();
  /// 500 / 200 / thin 2 — out-of-sample aggregation schedule.
  static GibbsConfig aggregation_defaults();
  /// 200 / 100 / thin 1 — the synthetic-study schedule.
  static GibbsConfig study_defaults();

  int retained() const { return (iterations - burn_in + thin - 1) / thin; }
};

/// One retained Gibbs iteration under the b_ref = 1 constraint. `beta` is
/// absent until the calibration step has processed the draw.
struct ConstrainedDraw {
  std::vector<double> bias;        // b(1); bias[ref-1] == 1 exactly
  std::vector<double> obs_var;     // sigma^2_k(1), one per question
  std::vector<double> drift;       // gamma_k(1)
  std::vector<double> state_var;   // tau^2_k(1)
  std::vector<StatePath> paths;    // X(1), one per question
  std::optional<double> beta;
};

/// Posterior sample of the constrained model. Every group 1..J must carry at
/// least one forecast somewhere unless all loadings are pinned; a variance
/// conditional left improper by too little data raises, naming the question.
/// A fixed seed reproduces the chain bit-for-bit.
std::vector<ConstrainedDraw> sample_posterior(const Dataset& dataset, const GibbsConfig& config);

/// Element-wise average of the retained draws (paths and parameters).
ConstrainedDraw posterior_mean(const std::vector<ConstrainedDraw>& chain);

/// One draw of a Gibbs pass over a single panel whose group loadings were
/// held fixed; `pair_index` records which entry of the conditioning cycle
/// produced it.
struct ConditionedDraw {
  StatePath path;
  double obs_var = 1.0;
  double drift = 1.0;
  double state_var = 1.0;
  std::size_t pair_index = 0;
};

/// Gibbs pass over one panel with the loading vector fixed per iteration,
/// cycling through `bias_cycle`. Question-local parameters are still
/// sampled; conditionals left improper by a short panel keep their current
/// values rather than failing (out-of-sample runs must handle two-day
/// prefixes). The panel's outcome is never consulted.
std::vector<ConditionedDraw> sample_conditioned(const QuestionPanel& panel,
                                                const std::vector<std::vector<double>>& bias_cycle,
                                                const GibbsConfig& config);

/// Chain persistence: header line plus one JSON record per retained draw.
struct ChainFile {
  std::vector<std::string> question_ids;
  int groups = 0;
  int ref_group = 0;
  std::vector<ConstrainedDraw> draws;
};

void write_chain(const std::filesystem::path& path, const ChainFile& chain);
ChainFile read_chain(const std::filesystem::path& path);

namespace detail {

/// Orientation of a panel: true when its logits should be negated so the
/// canonical form has positive total logit mass (ties broken by the first
/// nonzero logit). Running the sampler on the canonical orientation makes
/// per-question mirroring an exact symmetry of every estimate.
bool canonical_flip(const QuestionPanel& panel);

struct NormalParams {
  double mean = 0.0;
  double variance = 0.0;
};

struct InvGammaParams {
  double shape = 0.0;
  double rate = 0.0;
};

/// Adds one question's contribution to the per-group loading conditionals.
void accumulate_bias_stats(const PanelStats& stats, const StatePath& path, double obs_var,
                           std::vector<double>& precision, std::vector<double>& weighted);

/// Residual sum of squares of the observations around bias * path.
double residual_ss(const PanelStats& stats, const StatePath& path,
                   const std::vector<double>& bias);

InvGammaParams obs_var_conditional(const PanelStats& stats, const StatePath& path,
                                   const std::vector<double>& bias, double prior_exponent);

NormalParams drift_conditional(const StatePath& path, double x0, double state_var);

InvGammaParams state_var_conditional(const StatePath& path, double x0, double drift,
                                     double prior_exponent);

}  // namespace detail

}  // namespace crowdbelief
