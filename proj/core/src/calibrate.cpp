#include "crowdbelief/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "crowdbelief/errors.hpp"
#include "crowdbelief/numeric.hpp"
#include "crowdbelief/parallel.hpp"
#include "json.hpp"

namespace crowdbelief {

namespace {

constexpr double kBetaGridLo = 0.05;
constexpr double kBetaGridHi = 20.0;
constexpr int kBetaGridPoints = 120;
constexpr double kBetaTolerance = 1e-6;

double softplus(double z) {
  if (z > 30.0) return z;
  return std::log1p(std::exp(z));
}

/// Paths and outcomes flattened to one array for tight objective loops.
struct FlatScores {
  std::vector<double> x;
  std::vector<int> z;
};

FlatScores flatten(const std::vector<StatePath>& paths, const std::vector<int>& outcomes) {
  FlatScores flat;
  std::size_t n = 0;
  for (const auto& p : paths) n += p.x.size();
  flat.x.reserve(n);
  flat.z.reserve(n);
  for (std::size_t k = 0; k < paths.size(); ++k) {
    for (double v : paths[k].x) {
      flat.x.push_back(v);
      flat.z.push_back(outcomes[k]);
    }
  }
  return flat;
}

double objective_flat(const FlatScores& flat, ScoringRule rule, double beta) {
  double total = 0.0;
  for (std::size_t i = 0; i < flat.x.size(); ++i) {
    total += score(rule, flat.z[i], flat.x[i] / beta);
  }
  return total;
}

template <typename F>
double golden_section_max(F&& f, double lo, double hi, double tol) {
  constexpr double kRatio = 0.6180339887498949;
  double a = lo;
  double b = hi;
  double c = b - kRatio * (b - a);
  double d = a + kRatio * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kRatio * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kRatio * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

void validate_outcomes(const std::vector<StatePath>& paths, const std::vector<int>& outcomes) {
  if (paths.size() != outcomes.size()) {
    throw std::invalid_argument("estimate_beta: paths and outcomes must align");
  }
  if (paths.size() < 2) {
    throw std::invalid_argument("estimate_beta: need at least two questions");
  }
  bool any0 = false;
  bool any1 = false;
  for (int z : outcomes) {
    if (z == 0) {
      any0 = true;
    } else if (z == 1) {
      any1 = true;
    } else {
      throw std::invalid_argument("estimate_beta: outcomes must be 0 or 1");
    }
  }
  if (!any0 || !any1) {
    throw separation_error(
        "estimate_beta: all outcomes identical; the scale is not identified "
        "(complete separation). Provide questions with both labels.");
  }
}

}  // namespace

std::string to_string(ScoringRule rule) {
  return rule == ScoringRule::kBrier ? "brier" : "log";
}

ScoringRule scoring_rule_from_string(const std::string& name) {
  if (name == "brier") return ScoringRule::kBrier;
  if (name == "log" || name == "logarithmic") return ScoringRule::kLogarithmic;
  throw std::invalid_argument("unknown scoring rule `" + name + "` (expected brier or log)");
}

double score(ScoringRule rule, int outcome, double x) {
  if (outcome != 0 && outcome != 1) {
    throw std::invalid_argument("score: outcome must be 0 or 1");
  }
  double p = inverse_logit(x);
  p = std::min(std::max(p, kScoreClamp), 1.0 - kScoreClamp);
  if (rule == ScoringRule::kBrier) {
    const double e = static_cast<double>(outcome) - p;
    return -e * e;
  }
  return outcome == 1 ? std::log(p) : std::log1p(-p);
}

double calibration_objective(const std::vector<StatePath>& paths,
                             const std::vector<int>& outcomes, ScoringRule rule,
                             double beta) {
  if (beta == 0.0) {
    throw std::invalid_argument("calibration_objective: beta must be nonzero");
  }
  return objective_flat(flatten(paths, outcomes), rule, beta);
}

double estimate_beta(const std::vector<StatePath>& paths, const std::vector<int>& outcomes,
                     ScoringRule rule) {
  validate_outcomes(paths, outcomes);
  const FlatScores flat = flatten(paths, outcomes);

  std::vector<double> grid(kBetaGridPoints);
  const double step = std::log(kBetaGridHi / kBetaGridLo) / (kBetaGridPoints - 1);
  for (int i = 0; i < kBetaGridPoints; ++i) {
    grid[static_cast<std::size_t>(i)] = kBetaGridLo * std::exp(i * step);
  }

  double best = -std::numeric_limits<double>::infinity();
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = objective_flat(flat, rule, grid[i]);
    if (std::isfinite(v) && v > best) {
      best = v;
      best_i = i;
    }
  }
  if (!std::isfinite(best)) {
    throw std::runtime_error("estimate_beta: objective is nowhere finite");
  }
  const double lo = grid[best_i == 0 ? 0 : best_i - 1];
  const double hi = grid[std::min(best_i + 1, grid.size() - 1)];
  return golden_section_max([&](double b) { return objective_flat(flat, rule, b); }, lo, hi,
                            kBetaTolerance);
}

CalibrationResult apply_beta(const ConstrainedDraw& constrained, double beta) {
  if (beta == 0.0) {
    throw std::invalid_argument("apply_beta: beta must be nonzero");
  }
  CalibrationResult out;
  out.beta = beta;
  out.obs_var = constrained.obs_var;
  out.drift = constrained.drift;
  out.bias.reserve(constrained.bias.size());
  for (double b : constrained.bias) out.bias.push_back(b * beta);
  out.state_var.reserve(constrained.state_var.size());
  for (double t : constrained.state_var) out.state_var.push_back(t / (beta * beta));
  out.paths.reserve(constrained.paths.size());
  for (const auto& p : constrained.paths) {
    StatePath q;
    q.x.reserve(p.x.size());
    for (double v : p.x) q.x.push_back(v / beta);
    out.paths.push_back(std::move(q));
  }
  return out;
}

void write_calibration_report(const std::filesystem::path& path, const CalibrationReport& report) {
  std::ofstream out(path);
  if (!out) {
    throw io_error("cannot open " + path.string() + " for writing");
  }
  nlohmann::json j = {
      {"beta", report.beta},
      {"objective", report.objective},
      {"rule", to_string(report.rule)},
      {"n_questions", report.n_questions},
      {"n_days", report.n_days},
      {"objective_at_negated", report.objective_at_negated},
  };
  out << j.dump(2) << '\n';
}

CalibrationReport read_calibration_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw io_error("cannot open " + path.string() + " for reading");
  }
  CalibrationReport report;
  try {
    nlohmann::json j;
    in >> j;
    report.beta = j.at("beta").get<double>();
    report.objective = j.at("objective").get<double>();
    report.rule = scoring_rule_from_string(j.at("rule").get<std::string>());
    report.n_questions = j.at("n_questions").get<std::size_t>();
    report.n_days = j.at("n_days").get<std::size_t>();
    report.objective_at_negated = j.value("objective_at_negated", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw io_error(path.string() + ": malformed calibration report: " + e.what());
  }
  return report;
}

CalibrationReport calibrate_chain(const std::vector<ConstrainedDraw>& chain,
                                  const std::vector<int>& outcomes, ScoringRule rule) {
  const ConstrainedDraw mean_draw = posterior_mean(chain);
  const double beta = estimate_beta(mean_draw.paths, outcomes, rule);
  CalibrationReport report;
  report.beta = beta;
  report.rule = rule;
  report.objective = calibration_objective(mean_draw.paths, outcomes, rule, beta);
  report.objective_at_negated = calibration_objective(mean_draw.paths, outcomes, rule, -beta);
  report.n_questions = mean_draw.paths.size();
  for (const auto& p : mean_draw.paths) report.n_days += p.x.size();
  return report;
}

void calibrate_draws(std::vector<ConstrainedDraw>& chain, const std::vector<int>& outcomes,
                     ScoringRule rule) {
  for (auto& draw : chain) {
    draw.beta = estimate_beta(draw.paths, outcomes, rule);
  }
}

std::vector<TrainedPair> trained_pairs(const std::vector<ConstrainedDraw>& chain) {
  std::vector<TrainedPair> pairs;
  pairs.reserve(chain.size());
  for (const auto& d : chain) {
    if (!d.beta) {
      throw std::invalid_argument("trained_pairs: chain draw is missing beta; calibrate first");
    }
    pairs.push_back(TrainedPair{d.bias, *d.beta});
  }
  return pairs;
}

SacAggregate sac_out_of_sample(const QuestionPanel& panel, const std::vector<TrainedPair>& trained,
                               const GibbsConfig& config) {
  if (panel.forecast_count() == 0) {
    throw std::invalid_argument("sac_out_of_sample: panel " + panel.question_id +
                                " has no forecasts");
  }
  if (trained.empty()) {
    throw std::invalid_argument("sac_out_of_sample: empty trained chain");
  }
  for (const auto& pair : trained) {
    if (pair.beta == 0.0) {
      throw std::invalid_argument("sac_out_of_sample: trained beta must be nonzero");
    }
  }
  std::vector<std::vector<double>> cycle;
  cycle.reserve(trained.size());
  for (const auto& pair : trained) cycle.push_back(pair.bias);

  const auto horizon = static_cast<std::size_t>(panel.horizon);
  SacAggregate agg;
  agg.mean_logit.resize(horizon);
  agg.mean_prob.resize(horizon);
  agg.lo95.resize(horizon);
  agg.hi95.resize(horizon);

  // Day t depends only on the first t days: each day is a fresh pass over
  // that prefix with its own derived seed, so prefix reruns are bit-exact.
  parallel_for(horizon, config.threads, [&](std::size_t ti) {
    const int day = static_cast<int>(ti) + 1;
    GibbsConfig day_config = config;
    day_config.threads = 1;
    day_config.seed = Rng::mix(config.seed, static_cast<std::uint64_t>(day));
    const auto draws = sample_conditioned(panel.prefix(day), cycle, day_config);
    std::vector<double> values;
    values.reserve(draws.size());
    for (const auto& d : draws) {
      values.push_back(d.path.x[ti] / trained[d.pair_index].beta);
    }
    agg.mean_logit[ti] = mean(values);
    agg.mean_prob[ti] = inverse_logit(agg.mean_logit[ti]);
    agg.lo95[ti] = inverse_logit(quantile(values, 0.025));
    agg.hi95[ti] = inverse_logit(quantile(values, 0.975));
  });
  return agg;
}

namespace {

/// Log outcome-likelihood of one question's path at scale beta.
double outcome_loglik(const StatePath& path, int outcome, double beta) {
  double total = 0.0;
  for (double x : path.x) {
    const double v = x / beta;
    total += outcome == 1 ? -softplus(-v) : -softplus(v);
  }
  return total;
}

struct BsacQuestion {
  PanelStats stats;
  bool flipped = false;
  int outcome = 0;  // canonical orientation
  double obs_var = 1.0;
  double drift = 1.0;
  double state_var = 1.0;
  StatePath path;
  double x0 = 0.0;
  double step = 0.5;
  long proposals = 0;
  long accepts = 0;
  Rng rng{0};
};

}  // namespace

BsacResult bsac_sample(const Dataset& dataset, const BsacConfig& config) {
  const GibbsConfig& g = config.gibbs;
  if (g.iterations < 1 || g.burn_in < 0 || g.burn_in >= g.iterations || g.thin < 1) {
    throw std::invalid_argument("BsacConfig: need 0 <= burn_in < iterations and thin >= 1");
  }
  if (dataset.panels.empty()) {
    throw std::invalid_argument("bsac_sample: dataset has no questions");
  }
  if (config.outcome_weight < 0.0) {
    throw std::invalid_argument("bsac_sample: outcome_weight must be nonnegative");
  }
  const int groups = std::max(dataset.groups, 1);
  const int ref = g.ref_group == 0 ? groups : g.ref_group;
  if (ref < 1 || ref > groups) {
    throw std::invalid_argument("bsac_sample: ref_group out of range 1..J");
  }
  if (!g.pin_all_biases) {
    std::vector<std::size_t> per_group(static_cast<std::size_t>(groups), 0);
    for (const auto& panel : dataset.panels) {
      for (const auto& s : panel.slices) {
        for (const auto& f : s) ++per_group[static_cast<std::size_t>(f.group - 1)];
      }
    }
    for (int j = 1; j <= groups; ++j) {
      if (j != ref && per_group[static_cast<std::size_t>(j - 1)] == 0) {
        throw std::invalid_argument("bsac_sample: group " + std::to_string(j) +
                                    " has no forecasts anywhere; cannot estimate its bias");
      }
    }
  }

  const std::size_t n_questions = dataset.panels.size();
  std::vector<BsacQuestion> qs(n_questions);
  for (std::size_t k = 0; k < n_questions; ++k) {
    const auto& panel = dataset.panels[k];
    if (config.outcome_weight > 0.0 && !panel.outcome) {
      throw std::invalid_argument("bsac_sample: question " + panel.question_id +
                                  " has no outcome; the outcome likelihood requires labels");
    }
    qs[k].flipped = detail::canonical_flip(panel);
    qs[k].stats = compute_panel_stats(qs[k].flipped ? panel.mirrored() : panel);
    if (panel.outcome) {
      qs[k].outcome = qs[k].flipped ? 1 - *panel.outcome : *panel.outcome;
    }
    qs[k].rng = Rng::child(g.seed, k + 1);
  }
  Rng shared = Rng::child(g.seed, 0);

  std::vector<double> bias(static_cast<std::size_t>(groups), 1.0);
  double log_beta = 0.0;
  double beta_step = 0.3;
  long beta_proposals = 0;
  long beta_accepts = 0;

  // Initial paths from a constrained filter pass.
  for (auto& q : qs) {
    DlmParams p;
    p.bias = bias;
    p.obs_var = q.obs_var;
    p.drift = q.drift;
    p.state_var = q.state_var;
    const FilterOutput f = forward_filter(q.stats, p);
    q.path = backward_sample(f, p, q.rng);
    q.x0 = sample_initial_state(f, p, q.path.x.front(), q.rng);
  }

  const double w = config.outcome_weight;

  auto sweep_question = [&](BsacQuestion& q) {
    const double beta = std::exp(log_beta);
    const double gamma = q.drift;
    const double tau2 = std::max(q.state_var, kVarianceFloor);
    const double sigma2 = q.obs_var;
    // Conjugate refresh of the pre-sample state.
    {
      const double prec = 1.0 + gamma * gamma / tau2;  // prior N(0, 1)
      const double mean = (gamma * q.path.x.front() / tau2) / prec;
      q.x0 = q.rng.normal(mean, std::sqrt(1.0 / prec));
    }
    const std::size_t horizon = q.path.x.size();
    for (std::size_t t = 0; t < horizon; ++t) {
      const double x = q.path.x[t];
      const double prop = x + q.step * q.rng.normal();
      const double prev = t == 0 ? q.x0 : q.path.x[t - 1];
      auto log_target = [&](double v) {
        double lt = -(v - gamma * prev) * (v - gamma * prev) / (2.0 * tau2);
        if (t + 1 < horizon) {
          const double nxt = q.path.x[t + 1];
          lt += -(nxt - gamma * v) * (nxt - gamma * v) / (2.0 * tau2);
        }
        for (const auto& gs : q.stats.days[t]) {
          const double b = bias[static_cast<std::size_t>(gs.group - 1)];
          lt += -(gs.count * b * b * v * v - 2.0 * b * gs.sum_y * v) / (2.0 * sigma2);
        }
        if (w > 0.0) {
          const double u = v / beta;
          lt += w * (q.outcome == 1 ? -softplus(-u) : -softplus(u));
        }
        return lt;
      };
      const double delta = log_target(prop) - log_target(x);
      ++q.proposals;
      if (std::log(q.rng.uniform_pos()) < delta) {
        q.path.x[t] = prop;
        ++q.accepts;
      }
    }
  };

  auto run_phase = [&](int iterations, bool adapting, bool recording,
                       std::vector<ConstrainedDraw>* out) {
    for (int iter = 0; iter < iterations; ++iter) {
      parallel_for(n_questions, g.threads, [&](std::size_t k) { sweep_question(qs[k]); });

      if (!g.pin_all_biases) {
        std::vector<double> precision(static_cast<std::size_t>(groups), 0.0);
        std::vector<double> weighted(static_cast<std::size_t>(groups), 0.0);
        for (const auto& q : qs) {
          detail::accumulate_bias_stats(q.stats, q.path, q.obs_var, precision, weighted);
        }
        for (int j = 1; j <= groups; ++j) {
          if (j == ref) continue;
          const auto idx = static_cast<std::size_t>(j - 1);
          if (!(precision[idx] > 0.0)) {
            throw std::runtime_error("bsac_sample: degenerate loading conditional for group " +
                                     std::to_string(j));
          }
          bias[idx] = shared.normal(weighted[idx] / precision[idx],
                                    std::sqrt(1.0 / precision[idx]));
        }
        bias[static_cast<std::size_t>(ref - 1)] = 1.0;
      }

      parallel_for(n_questions, g.threads, [&](std::size_t k) {
        auto& q = qs[k];
        if (q.stats.n_forecasts > 0) {
          const auto cond =
              detail::obs_var_conditional(q.stats, q.path, bias, g.prior_exponent_obs);
          if (cond.shape > 0.0) {
            q.obs_var = std::max(q.rng.inverse_gamma(cond.shape, cond.rate), kVarianceFloor);
          } else {
            throw std::invalid_argument(
                "bsac_sample: question " + dataset.panels[k].question_id +
                " has too few forecasts for a proper observation-variance conditional");
          }
        }
        const auto drift_cond = detail::drift_conditional(q.path, q.x0, q.state_var);
        if (drift_cond.variance > 0.0) {
          q.drift = q.rng.normal(drift_cond.mean, std::sqrt(drift_cond.variance));
        }
        const auto state_cond =
            detail::state_var_conditional(q.path, q.x0, q.drift, g.prior_exponent_state);
        if (state_cond.shape > 0.0) {
          q.state_var =
              std::max(q.rng.inverse_gamma(state_cond.shape, state_cond.rate), kVarianceFloor);
        } else {
          throw std::invalid_argument("bsac_sample: question " + dataset.panels[k].question_id +
                                      " is too short for a proper state-variance conditional");
        }
      });

      // Scale move on log beta. The locally uniform prior on 1/beta puts
      // density e^{-l} on l = log beta. Skipped entirely at weight zero,
      // where the outcome factor vanishes and beta has no proper target.
      if (w > 0.0) {
        const double prop = log_beta + beta_step * shared.normal();
        double delta = -(prop - log_beta);
        const double beta_cur = std::exp(log_beta);
        const double beta_prop = std::exp(prop);
        for (const auto& q : qs) {
          delta += w * (outcome_loglik(q.path, q.outcome, beta_prop) -
                        outcome_loglik(q.path, q.outcome, beta_cur));
        }
        ++beta_proposals;
        if (std::log(shared.uniform_pos()) < delta) {
          log_beta = prop;
          ++beta_accepts;
        }
      }

      if (adapting && (iter + 1) % 25 == 0) {
        for (auto& q : qs) {
          const double rate =
              q.proposals > 0 ? static_cast<double>(q.accepts) / q.proposals : 0.0;
          if (rate < 0.25) q.step = std::max(q.step * 0.7, 1e-3);
          if (rate > 0.45) q.step = std::min(q.step * 1.4, 50.0);
          q.proposals = 0;
          q.accepts = 0;
        }
        if (beta_proposals > 0) {
          const double rate = static_cast<double>(beta_accepts) / beta_proposals;
          if (rate < 0.25) beta_step = std::max(beta_step * 0.7, 1e-3);
          if (rate > 0.45) beta_step = std::min(beta_step * 1.4, 10.0);
          beta_proposals = 0;
          beta_accepts = 0;
        }
      }

      if (recording && iter >= g.burn_in && (iter - g.burn_in) % g.thin == 0) {
        ConstrainedDraw d;
        d.bias = bias;
        d.beta = std::exp(log_beta);
        for (const auto& q : qs) {
          d.obs_var.push_back(q.obs_var);
          d.drift.push_back(q.drift);
          d.state_var.push_back(q.state_var);
          StatePath p = q.path;
          if (q.flipped) {
            for (double& v : p.x) v = -v;
          }
          d.paths.push_back(std::move(p));
        }
        out->push_back(std::move(d));
      }
    }
  };

  run_phase(config.pilot_iterations, /*adapting=*/true, /*recording=*/false, nullptr);
  for (auto& q : qs) {
    q.proposals = 0;
    q.accepts = 0;
  }
  beta_proposals = 0;
  beta_accepts = 0;

  BsacResult result;
  result.draws.reserve(static_cast<std::size_t>(g.retained()));
  run_phase(g.iterations, /*adapting=*/false, /*recording=*/true, &result.draws);

  long total_props = 0;
  long total_accepts = 0;
  for (const auto& q : qs) {
    total_props += q.proposals;
    total_accepts += q.accepts;
  }
  result.state_accept_rate =
      total_props > 0 ? static_cast<double>(total_accepts) / total_props : 0.0;
  result.beta_accept_rate =
      beta_proposals > 0 ? static_cast<double>(beta_accepts) / beta_proposals : 0.0;
  return result;
}

}  // namespace crowdbelief
