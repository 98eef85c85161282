#pragma once

#include <cstddef>
#include <vector>

#include "crowdbelief/domain.hpp"
#include "crowdbelief/rng.hpp"

namespace crowdbelief {

/// Variances computed by the recursions are floored here to keep rounding
/// from flipping their sign.
inline constexpr double kVarianceFloor = 1e-12;

/// Parameters of the scalar-state, vector-observation linear-Gaussian model
///   y_it = b_{group(i)} x_t + N(0, obs_var),  x_t = drift x_{t-1} + N(0, state_var).
struct DlmParams {
  std::vector<double> bias;   // one loading per expertise group
  double obs_var = 1.0;       // sigma^2
  double drift = 1.0;         // gamma
  double state_var = 1.0;     // tau^2 (zero allowed: degenerate deterministic state)
  double init_mean = 0.0;     // mu_0
  double init_var = 1.0;      // sigma_0^2
};

/// Per-(day, group) sufficient statistics of a panel. Values within a cell
/// are accumulated in sorted order so any permutation of a day's forecasts
/// produces identical statistics bit-for-bit.
struct GroupStat {
  int group = 1;
  int count = 0;
  double sum_y = 0.0;
  double sum_yy = 0.0;
};

struct PanelStats {
  int horizon = 0;
  std::vector<std::vector<GroupStat>> days;  // ascending group order per day
  int max_group = 0;
  std::size_t n_forecasts = 0;
};

PanelStats compute_panel_stats(const QuestionPanel& panel);

/// Kalman recursion state: one entry per day t = 1..T.
struct FilterOutput {
  std::vector<double> pred_mean;      // a_t
  std::vector<double> pred_var;       // R_t
  std::vector<double> filt_mean;      // m_t
  std::vector<double> filt_var;       // C_t
  double loglik = 0.0;                // marginal log-likelihood of the observations

  std::size_t days() const { return filt_mean.size(); }
};

struct StatePath {
  std::vector<double> x;  // logit scale, one entry per day
};

/// Forward pass; days with no forecasts propagate the prior.
FilterOutput forward_filter(const PanelStats& stats, const DlmParams& params);
FilterOutput forward_filter(const QuestionPanel& panel, const DlmParams& params);

/// One exact draw from the joint smoothing distribution, obtained by sampling
/// x_T ~ N(m_T, C_T) and recursing x_t | x_{t+1} backwards.
StatePath backward_sample(const FilterOutput& filter, const DlmParams& params, Rng& rng);

/// Draw of the initial state x_0 given the first path entry, from the same
/// backward conditional extended one step past the data.
double sample_initial_state(const FilterOutput& filter, const DlmParams& params,
                            double x1, Rng& rng);

/// Mean and variance of x_{t+steps} given x_t.
struct ForwardPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

ForwardPrediction predict_forward(double x_t, const DlmParams& params, int steps);

}  // namespace crowdbelief
