#include "crowdbelief/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "crowdbelief/parallel.hpp"

namespace crowdbelief {

GibbsConfig GibbsConfig::training_defaults() {
  GibbsConfig c;
  c.iterations = 3000;
  c.burn_in = 500;
  c.thin = 5;
  return c;
}

GibbsConfig GibbsConfig::aggregation_defaults() {
  GibbsConfig c;
  c.iterations = 500;
  c.burn_in = 200;
  c.thin = 2;
  return c;
}

GibbsConfig GibbsConfig::study_defaults() {
  GibbsConfig c;
  c.iterations = 200;
  c.burn_in = 100;
  c.thin = 1;
  return c;
}

namespace detail {

bool canonical_flip(const QuestionPanel& panel) {
  double total = 0.0;
  for (const auto& s : panel.slices) {
    for (const auto& f : s) total += f.y;
  }
  if (total < 0.0) return true;
  if (total > 0.0) return false;
  for (const auto& s : panel.slices) {
    for (const auto& f : s) {
      if (f.y != 0.0) return f.y < 0.0;
    }
  }
  return false;
}

void accumulate_bias_stats(const PanelStats& stats, const StatePath& path, double obs_var,
                           std::vector<double>& precision, std::vector<double>& weighted) {
  for (std::size_t t = 0; t < stats.days.size(); ++t) {
    const double x = path.x[t];
    for (const auto& g : stats.days[t]) {
      const auto j = static_cast<std::size_t>(g.group - 1);
      precision[j] += g.count * x * x / obs_var;
      weighted[j] += x * g.sum_y / obs_var;
    }
  }
}

double residual_ss(const PanelStats& stats, const StatePath& path,
                   const std::vector<double>& bias) {
  double ss = 0.0;
  for (std::size_t t = 0; t < stats.days.size(); ++t) {
    const double x = path.x[t];
    for (const auto& g : stats.days[t]) {
      const double b = bias[static_cast<std::size_t>(g.group - 1)];
      ss += g.sum_yy - 2.0 * b * x * g.sum_y + g.count * b * b * x * x;
    }
  }
  return std::max(ss, 0.0);
}

InvGammaParams obs_var_conditional(const PanelStats& stats, const StatePath& path,
                                   const std::vector<double>& bias, double prior_exponent) {
  InvGammaParams p;
  p.shape = 0.5 * static_cast<double>(stats.n_forecasts) - prior_exponent - 1.0;
  p.rate = 0.5 * residual_ss(stats, path, bias);
  return p;
}

NormalParams drift_conditional(const StatePath& path, double x0, double state_var) {
  double num = 0.0;
  double den = 0.0;
  double prev = x0;
  for (double x : path.x) {
    num += x * prev;
    den += prev * prev;
    prev = x;
  }
  NormalParams p;
  if (den > 0.0) {
    p.mean = num / den;
    p.variance = state_var / den;
  }
  return p;
}

InvGammaParams state_var_conditional(const StatePath& path, double x0, double drift,
                                     double prior_exponent) {
  double ss = 0.0;
  double prev = x0;
  for (double x : path.x) {
    const double e = x - drift * prev;
    ss += e * e;
    prev = x;
  }
  InvGammaParams p;
  p.shape = 0.5 * static_cast<double>(path.x.size()) - prior_exponent - 1.0;
  p.rate = 0.5 * ss;
  return p;
}

}  // namespace detail

namespace {

enum class ImproperPolicy { kError, kKeepCurrent };

struct QuestionState {
  PanelStats stats;
  bool flipped = false;
  double obs_var = 1.0;
  double drift = 1.0;
  double state_var = 1.0;
  StatePath path;
  double x0 = 0.0;
  Rng rng{0};
};

void validate_run_lengths(const GibbsConfig& config) {
  if (config.iterations < 1 || config.burn_in < 0 || config.burn_in >= config.iterations) {
    throw std::invalid_argument("GibbsConfig: need 0 <= burn_in < iterations");
  }
  if (config.thin < 1) {
    throw std::invalid_argument("GibbsConfig: thin must be >= 1");
  }
}

QuestionState make_question_state(const QuestionPanel& panel, Rng&& rng) {
  QuestionState qs;
  qs.flipped = detail::canonical_flip(panel);
  qs.stats = compute_panel_stats(qs.flipped ? panel.mirrored() : panel);
  qs.rng = std::move(rng);
  return qs;
}

DlmParams question_params(const QuestionState& qs, const std::vector<double>& bias) {
  DlmParams p;
  p.bias = bias;
  p.obs_var = qs.obs_var;
  p.drift = qs.drift;
  p.state_var = qs.state_var;
  return p;
}

void draw_path(QuestionState& qs, const std::vector<double>& bias) {
  const DlmParams params = question_params(qs, bias);
  const FilterOutput filter = forward_filter(qs.stats, params);
  qs.path = backward_sample(filter, params, qs.rng);
  qs.x0 = sample_initial_state(filter, params, qs.path.x.front(), qs.rng);
}

/// sigma^2, gamma, tau^2 draws for one question given its freshly sampled
/// path and the current loadings.
void draw_question_params(QuestionState& qs, const std::vector<double>& bias,
                          const GibbsConfig& config, ImproperPolicy policy,
                          const std::string& question_id) {
  if (qs.stats.n_forecasts > 0) {
    const auto cond =
        detail::obs_var_conditional(qs.stats, qs.path, bias, config.prior_exponent_obs);
    if (cond.shape > 0.0) {
      qs.obs_var = std::max(qs.rng.inverse_gamma(cond.shape, cond.rate), kVarianceFloor);
    } else if (policy == ImproperPolicy::kError) {
      throw std::invalid_argument(
          "gibbs: question " + question_id +
          " has too few forecasts for a proper observation-variance conditional (have " +
          std::to_string(qs.stats.n_forecasts) + ", need more than " +
          std::to_string(2.0 * (config.prior_exponent_obs + 1.0)) + ")");
    }
  } else if (policy == ImproperPolicy::kError) {
    throw std::invalid_argument("gibbs: question " + question_id +
                                " carries no forecasts; cannot draw its observation variance");
  }

  // A one-day panel pins the drift only through the latent initial state,
  // which lets the conditional run away multiplicatively; conditioned runs
  // keep the neutral drift there (day-1 estimates are never scored).
  const bool drift_identified =
      qs.path.x.size() >= 2 || policy == ImproperPolicy::kError;
  const auto drift_cond = detail::drift_conditional(qs.path, qs.x0, qs.state_var);
  if (drift_identified && drift_cond.variance > 0.0) {
    qs.drift = qs.rng.normal(drift_cond.mean, std::sqrt(drift_cond.variance));
  }

  const auto state_cond =
      detail::state_var_conditional(qs.path, qs.x0, qs.drift, config.prior_exponent_state);
  if (state_cond.shape > 0.0) {
    qs.state_var = std::max(qs.rng.inverse_gamma(state_cond.shape, state_cond.rate),
                            kVarianceFloor);
  } else if (policy == ImproperPolicy::kError) {
    throw std::invalid_argument(
        "gibbs: question " + question_id +
        " is too short for a proper state-variance conditional (horizon " +
        std::to_string(qs.stats.horizon) + ", need more than " +
        std::to_string(2.0 * (config.prior_exponent_state + 1.0)) + " days)");
  }

  if (!std::isfinite(qs.obs_var) || !std::isfinite(qs.drift) || !std::isfinite(qs.state_var)) {
    throw std::runtime_error("gibbs: parameter draw diverged for question " + question_id +
                             "; the panel carries too little information for the chosen priors");
  }
}

StatePath oriented_path(const QuestionState& qs) {
  StatePath out = qs.path;
  if (qs.flipped) {
    for (double& v : out.x) v = -v;
  }
  return out;
}

}  // namespace

std::vector<ConstrainedDraw> sample_posterior(const Dataset& dataset, const GibbsConfig& config) {
  validate_run_lengths(config);
  if (dataset.panels.empty()) {
    throw std::invalid_argument("sample_posterior: dataset has no questions");
  }
  const int groups = std::max(dataset.groups, 1);
  int ref = config.ref_group == 0 ? groups : config.ref_group;
  if (ref < 1 || ref > groups) {
    throw std::invalid_argument("sample_posterior: ref_group out of range 1..J");
  }

  if (!config.pin_all_biases) {
    std::vector<std::size_t> per_group(static_cast<std::size_t>(groups), 0);
    for (const auto& panel : dataset.panels) {
      for (const auto& s : panel.slices) {
        for (const auto& f : s) ++per_group[static_cast<std::size_t>(f.group - 1)];
      }
    }
    for (int j = 1; j <= groups; ++j) {
      if (j != ref && per_group[static_cast<std::size_t>(j - 1)] == 0) {
        throw std::invalid_argument("sample_posterior: group " + std::to_string(j) +
                                    " has no forecasts anywhere; cannot estimate its bias");
      }
    }
  }

  const std::size_t n_questions = dataset.panels.size();
  std::vector<QuestionState> states;
  states.reserve(n_questions);
  for (std::size_t k = 0; k < n_questions; ++k) {
    states.push_back(make_question_state(dataset.panels[k], Rng::child(config.seed, k + 1)));
  }
  Rng shared = Rng::child(config.seed, 0);

  std::vector<double> bias(static_cast<std::size_t>(groups), 1.0);

  // Initial hidden paths from a single filter/sample pass at neutral values.
  parallel_for(n_questions, config.threads, [&](std::size_t k) { draw_path(states[k], bias); });

  std::vector<ConstrainedDraw> chain;
  chain.reserve(static_cast<std::size_t>(config.retained()));

  for (int iter = 0; iter < config.iterations; ++iter) {
    parallel_for(n_questions, config.threads,
                 [&](std::size_t k) { draw_path(states[k], bias); });

    if (!config.pin_all_biases) {
      std::vector<double> precision(static_cast<std::size_t>(groups), 0.0);
      std::vector<double> weighted(static_cast<std::size_t>(groups), 0.0);
      for (const auto& qs : states) {
        detail::accumulate_bias_stats(qs.stats, qs.path, qs.obs_var, precision, weighted);
      }
      for (int j = 1; j <= groups; ++j) {
        if (j == ref) continue;
        const auto idx = static_cast<std::size_t>(j - 1);
        if (!(precision[idx] > 0.0)) {
          throw std::runtime_error("sample_posterior: degenerate loading conditional for group " +
                                   std::to_string(j));
        }
        bias[idx] = shared.normal(weighted[idx] / precision[idx],
                                  std::sqrt(1.0 / precision[idx]));
      }
      bias[static_cast<std::size_t>(ref - 1)] = 1.0;
    }

    parallel_for(n_questions, config.threads, [&](std::size_t k) {
      draw_question_params(states[k], bias, config, ImproperPolicy::kError,
                           dataset.panels[k].question_id);
    });

    if (iter >= config.burn_in && (iter - config.burn_in) % config.thin == 0) {
      ConstrainedDraw draw;
      draw.bias = bias;
      draw.obs_var.reserve(n_questions);
      draw.drift.reserve(n_questions);
      draw.state_var.reserve(n_questions);
      draw.paths.reserve(n_questions);
      for (const auto& qs : states) {
        draw.obs_var.push_back(qs.obs_var);
        draw.drift.push_back(qs.drift);
        draw.state_var.push_back(qs.state_var);
        draw.paths.push_back(oriented_path(qs));
      }
      chain.push_back(std::move(draw));
    }
  }
  return chain;
}

ConstrainedDraw posterior_mean(const std::vector<ConstrainedDraw>& chain) {
  if (chain.empty()) {
    throw std::invalid_argument("posterior_mean: empty chain");
  }
  const double n = static_cast<double>(chain.size());
  ConstrainedDraw out = chain.front();
  bool all_beta = out.beta.has_value();
  double beta_sum = out.beta.value_or(0.0);
  for (std::size_t s = 1; s < chain.size(); ++s) {
    const auto& d = chain[s];
    for (std::size_t j = 0; j < out.bias.size(); ++j) out.bias[j] += d.bias[j];
    for (std::size_t k = 0; k < out.obs_var.size(); ++k) {
      out.obs_var[k] += d.obs_var[k];
      out.drift[k] += d.drift[k];
      out.state_var[k] += d.state_var[k];
      for (std::size_t t = 0; t < out.paths[k].x.size(); ++t) {
        out.paths[k].x[t] += d.paths[k].x[t];
      }
    }
    all_beta = all_beta && d.beta.has_value();
    beta_sum += d.beta.value_or(0.0);
  }
  for (double& v : out.bias) v /= n;
  for (std::size_t k = 0; k < out.obs_var.size(); ++k) {
    out.obs_var[k] /= n;
    out.drift[k] /= n;
    out.state_var[k] /= n;
    for (double& v : out.paths[k].x) v /= n;
  }
  out.beta = all_beta ? std::optional<double>(beta_sum / n) : std::nullopt;
  return out;
}

std::vector<ConditionedDraw> sample_conditioned(const QuestionPanel& panel,
                                                const std::vector<std::vector<double>>& bias_cycle,
                                                const GibbsConfig& config) {
  validate_run_lengths(config);
  if (bias_cycle.empty()) {
    throw std::invalid_argument("sample_conditioned: empty conditioning cycle");
  }
  QuestionState qs = make_question_state(panel, Rng::child(config.seed, 1));
  for (const auto& b : bias_cycle) {
    if (static_cast<int>(b.size()) < qs.stats.max_group) {
      throw std::invalid_argument(
          "sample_conditioned: conditioning loadings are missing groups present in the panel");
    }
  }

  std::vector<ConditionedDraw> draws;
  draws.reserve(static_cast<std::size_t>(config.retained()));
  draw_path(qs, bias_cycle[0]);
  for (int iter = 0; iter < config.iterations; ++iter) {
    const std::size_t idx = static_cast<std::size_t>(iter) % bias_cycle.size();
    const auto& bias = bias_cycle[idx];
    draw_path(qs, bias);
    draw_question_params(qs, bias, config, ImproperPolicy::kKeepCurrent, panel.question_id);
    if (iter >= config.burn_in && (iter - config.burn_in) % config.thin == 0) {
      ConditionedDraw d;
      d.path = oriented_path(qs);
      d.obs_var = qs.obs_var;
      d.drift = qs.drift;
      d.state_var = qs.state_var;
      d.pair_index = idx;
      draws.push_back(std::move(d));
    }
  }
  return draws;
}

}  // namespace crowdbelief
