#include "crowdbelief/dlm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace crowdbelief {

namespace {

void validate(const DlmParams& params, int max_group) {
  if (!(params.obs_var > 0.0)) {
    throw std::invalid_argument("DlmParams: obs_var must be positive");
  }
  if (!(params.state_var >= 0.0)) {
    throw std::invalid_argument("DlmParams: state_var must be nonnegative");
  }
  if (!(params.init_var > 0.0)) {
    throw std::invalid_argument("DlmParams: init_var must be positive");
  }
  if (max_group > static_cast<int>(params.bias.size())) {
    throw std::invalid_argument("DlmParams: bias vector is missing groups present in the data");
  }
}

}  // namespace

PanelStats compute_panel_stats(const QuestionPanel& panel) {
  PanelStats stats;
  stats.horizon = panel.horizon;
  stats.days.resize(panel.slices.size());
  for (std::size_t d = 0; d < panel.slices.size(); ++d) {
    std::map<int, std::vector<double>> by_group;
    for (const auto& f : panel.slices[d]) {
      by_group[f.group].push_back(f.y);
    }
    for (auto& [group, ys] : by_group) {
      std::sort(ys.begin(), ys.end());
      GroupStat g;
      g.group = group;
      g.count = static_cast<int>(ys.size());
      for (double y : ys) {
        g.sum_y += y;
        g.sum_yy += y * y;
      }
      stats.days[d].push_back(g);
      stats.max_group = std::max(stats.max_group, group);
      stats.n_forecasts += ys.size();
    }
  }
  return stats;
}

FilterOutput forward_filter(const PanelStats& stats, const DlmParams& params) {
  validate(params, stats.max_group);
  const double gamma = params.drift;
  const double sigma2 = params.obs_var;
  const double tau2 = params.state_var;
  const std::size_t horizon = stats.days.size();

  FilterOutput out;
  out.pred_mean.resize(horizon);
  out.pred_var.resize(horizon);
  out.filt_mean.resize(horizon);
  out.filt_var.resize(horizon);

  double m = params.init_mean;
  double c = params.init_var;
  for (std::size_t t = 0; t < horizon; ++t) {
    const double a = gamma * m;
    const double r = std::max(gamma * gamma * c + tau2, kVarianceFloor);
    out.pred_mean[t] = a;
    out.pred_var[t] = r;

    const auto& day = stats.days[t];
    if (day.empty()) {
      m = a;
      c = r;
    } else {
      double lam_lam = 0.0;   // lambda' lambda
      double lam_y = 0.0;     // lambda' y
      double yy = 0.0;        // y' y
      std::size_t n = 0;
      for (const auto& g : day) {
        const double b = params.bias[static_cast<std::size_t>(g.group - 1)];
        lam_lam += g.count * b * b;
        lam_y += b * g.sum_y;
        yy += g.sum_yy;
        n += static_cast<std::size_t>(g.count);
      }
      const double precision = 1.0 / r + lam_lam / sigma2;
      c = 1.0 / precision;
      m = c * (a / r + lam_y / sigma2);

      // Marginal likelihood of the day's observations, y ~ N(lambda a,
      // sigma^2 I + R lambda lambda'), evaluated through the rank-one
      // Woodbury identity.
      const double ee = yy - 2.0 * a * lam_y + a * a * lam_lam;
      const double lam_e = lam_y - a * lam_lam;
      const double s = 1.0 + r * lam_lam / sigma2;
      out.loglik += -0.5 * (static_cast<double>(n) * std::log(2.0 * std::numbers::pi * sigma2) +
                            std::log(s) + ee / sigma2 -
                            r * lam_e * lam_e / (sigma2 * sigma2 * s));
    }
    out.filt_mean[t] = m;
    out.filt_var[t] = c;
  }
  return out;
}

FilterOutput forward_filter(const QuestionPanel& panel, const DlmParams& params) {
  return forward_filter(compute_panel_stats(panel), params);
}

StatePath backward_sample(const FilterOutput& filter, const DlmParams& params, Rng& rng) {
  const std::size_t horizon = filter.days();
  if (filter.pred_mean.size() != horizon || filter.pred_var.size() != horizon ||
      filter.filt_var.size() != horizon) {
    throw std::invalid_argument("backward_sample: inconsistent filter output lengths");
  }
  if (horizon == 0) {
    throw std::invalid_argument("backward_sample: empty filter output");
  }
  const double gamma = params.drift;

  StatePath path;
  path.x.resize(horizon);
  path.x[horizon - 1] = rng.normal(filter.filt_mean[horizon - 1],
                                   std::sqrt(filter.filt_var[horizon - 1]));
  for (std::size_t t = horizon - 1; t-- > 0;) {
    const double c = filter.filt_var[t];
    const double r_next = filter.pred_var[t + 1];
    const double gain = gamma * c / r_next;
    const double h = filter.filt_mean[t] + gain * (path.x[t + 1] - filter.pred_mean[t + 1]);
    const double var = std::max(c - gamma * gamma * c * c / r_next, 0.0);
    path.x[t] = rng.normal(h, std::sqrt(var));
  }
  return path;
}

double sample_initial_state(const FilterOutput& filter, const DlmParams& params,
                            double x1, Rng& rng) {
  if (filter.days() == 0) {
    throw std::invalid_argument("sample_initial_state: empty filter output");
  }
  const double gamma = params.drift;
  const double c = params.init_var;
  const double r1 = filter.pred_var[0];
  const double gain = gamma * c / r1;
  const double h = params.init_mean + gain * (x1 - filter.pred_mean[0]);
  const double var = std::max(c - gamma * gamma * c * c / r1, 0.0);
  return rng.normal(h, std::sqrt(var));
}

ForwardPrediction predict_forward(double x_t, const DlmParams& params, int steps) {
  if (steps < 1) {
    throw std::invalid_argument("predict_forward: steps must be >= 1");
  }
  const double gamma = params.drift;
  double mean = x_t;
  double var = 0.0;
  double shock_scale = 1.0;  // gamma^{2s} for the shock s steps back
  for (int s = 0; s < steps; ++s) {
    mean *= gamma;
    var += params.state_var * shock_scale;
    shock_scale *= gamma * gamma;
  }
  return {mean, var};
}

}  // namespace crowdbelief
