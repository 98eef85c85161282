#include <cmath>
#include <filesystem>
#include <numeric>

#include "crowdbelief/calibrate.hpp"
#include "crowdbelief/errors.hpp"
#include "crowdbelief/rng.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"

using namespace crowdbelief;
using crowdbelief::testing::dense_random_panel;
using crowdbelief::testing::make_dataset;
using crowdbelief::testing::make_panel;

namespace {

/// Independent route to the calibration optimum: dense log-spaced scans,
/// repeatedly narrowed around the best point.
double grid_oracle_beta(const std::vector<StatePath>& paths, const std::vector<int>& outcomes,
                        ScoringRule rule) {
  double lo = 0.05;
  double hi = 20.0;
  double best_b = lo;
  for (int round = 0; round < 60; ++round) {
    const int n = 400;
    double best_f = -std::numeric_limits<double>::infinity();
    const double step = std::log(hi / lo) / (n - 1);
    for (int i = 0; i < n; ++i) {
      const double b = lo * std::exp(i * step);
      const double f = calibration_objective(paths, outcomes, rule, b);
      if (f > best_f) {
        best_f = f;
        best_b = b;
      }
    }
    const double factor = std::exp(2.0 * step);
    lo = std::max(best_b / factor, 1e-4);
    hi = best_b * factor;
    if (hi - lo < 1e-8) break;
  }
  return best_b;
}

std::vector<StatePath> toy_paths(Rng& rng, int questions, int horizon, double scale) {
  std::vector<StatePath> paths(static_cast<std::size_t>(questions));
  for (auto& p : paths) {
    double x = rng.normal(0.0, 0.6);
    for (int t = 0; t < horizon; ++t) {
      x += rng.normal(0.0, 0.4);
      p.x.push_back(scale * x);
    }
  }
  return paths;
}

std::vector<int> outcomes_from_paths(const std::vector<StatePath>& paths) {
  std::vector<int> z;
  z.reserve(paths.size());
  for (const auto& p : paths) z.push_back(p.x.back() > 0.0 ? 1 : 0);
  return z;
}

}  // namespace

TEST_CASE("score examples") {
  CHECK(score(ScoringRule::kBrier, 1, 0.0) == doctest::Approx(-0.25));
  CHECK(score(ScoringRule::kLogarithmic, 1, 0.0) ==
        doctest::Approx(-0.69314718055994531).epsilon(1e-12));
  CHECK(score(ScoringRule::kBrier, 0, logit(0.9)) == doctest::Approx(-0.81).epsilon(1e-12));
  CHECK(score(ScoringRule::kBrier, 1, 3.0) < 0.0);
  CHECK(score(ScoringRule::kLogarithmic, 0, -2.0) < 0.0);
  // The clamp keeps the log score finite at extreme inputs.
  CHECK(std::isfinite(score(ScoringRule::kLogarithmic, 0, 900.0)));
  CHECK_THROWS_AS(score(ScoringRule::kBrier, 2, 0.0), std::invalid_argument);
}

TEST_CASE("both rules are strictly proper on a grid") {
  for (const auto rule : {ScoringRule::kBrier, ScoringRule::kLogarithmic}) {
    for (int i = 1; i <= 19; ++i) {
      const double p_star = i * 0.05;
      double best_q = -1.0;
      double best_v = -std::numeric_limits<double>::infinity();
      for (int qi = 1; qi <= 99; ++qi) {
        const double q = qi * 0.01;
        const double v =
            p_star * score(rule, 1, logit(q)) + (1.0 - p_star) * score(rule, 0, logit(q));
        if (v > best_v) {
          best_v = v;
          best_q = q;
        }
      }
      CHECK(best_q == doctest::Approx(p_star).epsilon(1e-9));
    }
  }
}

TEST_CASE("estimate_beta equivariance and oracle agreement") {
  Rng rng(21);
  const auto paths = toy_paths(rng, 10, 15, 1.0);
  const auto outcomes = outcomes_from_paths(paths);
  REQUIRE(std::accumulate(outcomes.begin(), outcomes.end(), 0) > 0);
  REQUIRE(std::accumulate(outcomes.begin(), outcomes.end(), 0) < 10);

  for (const auto rule : {ScoringRule::kBrier, ScoringRule::kLogarithmic}) {
    const double beta = estimate_beta(paths, outcomes, rule);

    // Doubling the paths doubles the recovered scale.
    std::vector<StatePath> doubled = paths;
    for (auto& p : doubled) {
      for (double& v : p.x) v *= 2.0;
    }
    const double beta2 = estimate_beta(doubled, outcomes, rule);
    CHECK(beta2 / beta == doctest::Approx(2.0).epsilon(1e-3));

    const double oracle = grid_oracle_beta(paths, outcomes, rule);
    const double f_impl = calibration_objective(paths, outcomes, rule, beta);
    const double f_oracle = calibration_objective(paths, outcomes, rule, oracle);
    CHECK(std::fabs(f_impl - f_oracle) <= 1e-9);
    CHECK(beta == doctest::Approx(oracle).epsilon(1e-4));
  }
}

TEST_CASE("estimate_beta guards") {
  Rng rng(22);
  auto paths = toy_paths(rng, 4, 6, 1.0);
  CHECK_THROWS_AS(estimate_beta(paths, {1, 1, 1, 1}, ScoringRule::kBrier), separation_error);
  CHECK_THROWS_AS(estimate_beta(paths, {0, 0, 0, 0}, ScoringRule::kLogarithmic),
                  separation_error);
  CHECK_THROWS_AS(estimate_beta({paths[0]}, {1}, ScoringRule::kBrier), std::invalid_argument);
  CHECK_THROWS_AS(estimate_beta(paths, {1, 0, 1}, ScoringRule::kBrier), std::invalid_argument);
}

TEST_CASE("apply_beta transforms") {
  ConstrainedDraw draw;
  draw.bias = {0.5, 1.0, 2.0};
  draw.obs_var = {0.7, 1.3};
  draw.drift = {1.01, 0.98};
  draw.state_var = {0.4, 0.9};
  draw.paths.resize(2);
  draw.paths[0].x = {1.0, -2.0};
  draw.paths[1].x = {0.5};

  SUBCASE("identity at beta one") {
    const auto r = apply_beta(draw, 1.0);
    CHECK(r.bias == draw.bias);
    CHECK(r.paths[0].x == draw.paths[0].x);
    CHECK(r.state_var == draw.state_var);
  }
  SUBCASE("beta two halves paths, doubles loadings, quarters state variance") {
    const auto r = apply_beta(draw, 2.0);
    CHECK(r.paths[0].x[0] == doctest::Approx(0.5));
    CHECK(r.paths[0].x[1] == doctest::Approx(-1.0));
    CHECK(r.bias[0] == doctest::Approx(1.0));
    CHECK(r.bias[2] == doctest::Approx(4.0));
    CHECK(r.state_var[0] == doctest::Approx(0.1));
    // Observation variance and drift carry over bit-for-bit.
    CHECK(r.obs_var == draw.obs_var);
    CHECK(r.drift == draw.drift);
  }
  SUBCASE("composition multiplies the scales") {
    const auto once = apply_beta(draw, 2.0);
    ConstrainedDraw mid;
    mid.bias = once.bias;
    mid.obs_var = once.obs_var;
    mid.drift = once.drift;
    mid.state_var = once.state_var;
    mid.paths = once.paths;
    const auto twice = apply_beta(mid, 3.0);
    const auto direct = apply_beta(draw, 6.0);
    for (std::size_t j = 0; j < draw.bias.size(); ++j) {
      CHECK(twice.bias[j] == doctest::Approx(direct.bias[j]).epsilon(1e-12));
    }
    for (std::size_t t = 0; t < draw.paths[0].x.size(); ++t) {
      CHECK(twice.paths[0].x[t] == doctest::Approx(direct.paths[0].x[t]).epsilon(1e-12));
    }
  }
  SUBCASE("zero is rejected") {
    CHECK_THROWS_AS(apply_beta(draw, 0.0), std::invalid_argument);
  }
}

TEST_CASE("rescaling the constrained pair leaves the calibrated aggregate unchanged") {
  Rng rng(23);
  const auto paths = toy_paths(rng, 8, 12, 1.0);
  const auto outcomes = outcomes_from_paths(paths);
  const double beta = estimate_beta(paths, outcomes, ScoringRule::kLogarithmic);

  const double a = 3.0;
  std::vector<StatePath> scaled = paths;
  for (auto& p : scaled) {
    for (double& v : p.x) v /= a;
  }
  const double beta_scaled = estimate_beta(scaled, outcomes, ScoringRule::kLogarithmic);
  CHECK(beta_scaled == doctest::Approx(beta / a).epsilon(1e-4));
  for (std::size_t k = 0; k < paths.size(); ++k) {
    for (std::size_t t = 0; t < paths[k].x.size(); ++t) {
      const double agg = inverse_logit(paths[k].x[t] / beta);
      const double agg_scaled = inverse_logit(scaled[k].x[t] / beta_scaled);
      CHECK(agg == doctest::Approx(agg_scaled).epsilon(1e-4));
    }
  }
}

TEST_CASE("calibration objective is invariant to question relabeling and mirroring") {
  Rng rng(24);
  auto paths = toy_paths(rng, 6, 9, 1.0);
  auto outcomes = outcomes_from_paths(paths);
  outcomes[0] = 1 - outcomes[0];  // ensure both labels regardless of the draw
  const double beta = 1.3;
  const double base = calibration_objective(paths, outcomes, ScoringRule::kBrier, beta);

  std::vector<StatePath> shuffled = {paths[3], paths[0], paths[5], paths[1], paths[4], paths[2]};
  std::vector<int> shuffled_z = {outcomes[3], outcomes[0], outcomes[5],
                                 outcomes[1], outcomes[4], outcomes[2]};
  CHECK(calibration_objective(shuffled, shuffled_z, ScoringRule::kBrier, beta) ==
        doctest::Approx(base).epsilon(1e-12));

  auto mirrored = paths;
  auto mirrored_z = outcomes;
  for (auto& p : mirrored) {
    for (double& v : p.x) v = -v;
  }
  for (int& z : mirrored_z) z = 1 - z;
  CHECK(calibration_objective(mirrored, mirrored_z, ScoringRule::kBrier, beta) ==
        doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("calibration report IO") {
  CalibrationReport report;
  report.beta = 1.75;
  report.objective = -12.5;
  report.rule = ScoringRule::kBrier;
  report.n_questions = 9;
  report.n_days = 120;
  report.objective_at_negated = -40.0;
  const auto path = std::filesystem::temp_directory_path() / "cb_cal_report.json";
  write_calibration_report(path, report);
  const auto back = read_calibration_report(path);
  CHECK(back.beta == report.beta);
  CHECK(back.objective == report.objective);
  CHECK(back.rule == ScoringRule::kBrier);
  CHECK(back.n_questions == 9);
  CHECK(back.n_days == 120);
  CHECK(back.objective_at_negated == -40.0);
}

TEST_CASE("calibrate_draws fills per-draw betas for the trained pairs") {
  Rng rng(25);
  auto ds = make_dataset({dense_random_panel("a", 8, 2, 2, rng, 1),
                          dense_random_panel("b", 7, 2, 2, rng, 0)},
                         2);
  GibbsConfig config;
  config.iterations = 60;
  config.burn_in = 20;
  config.thin = 2;
  config.seed = 5;
  auto chain = sample_posterior(ds, config);
  CHECK_THROWS_AS(trained_pairs(chain), std::invalid_argument);
  calibrate_draws(chain, {1, 0}, ScoringRule::kLogarithmic);
  const auto pairs = trained_pairs(chain);
  REQUIRE(pairs.size() == chain.size());
  for (const auto& p : pairs) CHECK(p.beta > 0.0);
}

TEST_CASE("out-of-sample aggregation") {
  GibbsConfig config = GibbsConfig::aggregation_defaults();
  config.iterations = 120;
  config.burn_in = 40;
  config.seed = 33;

  SUBCASE("all-0.5 panel with an unbiased chain stays at one half") {
    std::vector<std::vector<LogitForecast>> slices(6);
    for (auto& s : slices) s = {{0.0, 1}, {0.0, 1}};
    const auto panel = make_panel("q", 6, slices);
    const std::vector<TrainedPair> trained(10, TrainedPair{{1.0}, 1.0});
    const auto agg = sac_out_of_sample(panel, trained, config);
    for (double p : agg.mean_prob) CHECK(std::fabs(p - 0.5) < 0.02);
    for (std::size_t t = 0; t < 6; ++t) {
      CHECK(agg.lo95[t] <= agg.mean_prob[t]);
      CHECK(agg.hi95[t] >= agg.mean_prob[t]);
    }
  }

  SUBCASE("prefix rerun reproduces the stored values exactly") {
    Rng rng(26);
    const auto panel = dense_random_panel("q", 7, 2, 2, rng);
    const std::vector<TrainedPair> trained = {{{1.0, 1.1}, 1.2}, {{0.9, 1.0}, 0.8}};
    const auto full = sac_out_of_sample(panel, trained, config);
    for (int t = 2; t <= 7; t += 2) {
      const auto prefix = sac_out_of_sample(panel.prefix(t), trained, config);
      for (int d = 0; d < t; ++d) {
        CHECK(full.mean_prob[static_cast<std::size_t>(d)] ==
              prefix.mean_prob[static_cast<std::size_t>(d)]);
        CHECK(full.lo95[static_cast<std::size_t>(d)] ==
              prefix.lo95[static_cast<std::size_t>(d)]);
      }
    }
  }

  SUBCASE("panels drifting toward the outcome sharpen over time") {
    int closer = 0;
    const int reps = 20;
    for (int rep = 0; rep < reps; ++rep) {
      Rng rng(1000 + rep);
      std::vector<std::vector<LogitForecast>> slices(12);
      for (int t = 0; t < 12; ++t) {
        const double level = 2.5 * t / 11.0;
        slices[static_cast<std::size_t>(t)] = {{level + rng.normal(0.0, 0.5), 1},
                                               {level + rng.normal(0.0, 0.5), 1}};
      }
      const auto panel = make_panel("q", 12, slices);
      const std::vector<TrainedPair> trained(5, TrainedPair{{1.0}, 1.0});
      GibbsConfig cfg = config;
      cfg.seed = 400 + rep;
      const auto agg = sac_out_of_sample(panel, trained, cfg);
      if (std::fabs(1.0 - agg.mean_prob.back()) < std::fabs(1.0 - agg.mean_prob[1])) ++closer;
    }
    CHECK(closer >= 18);
  }

  SUBCASE("errors") {
    const auto empty = make_panel("q", 4, {});
    CHECK_THROWS_AS(sac_out_of_sample(empty, {TrainedPair{{1.0}, 1.0}}, config),
                    std::invalid_argument);
    const auto panel = make_panel("q", 4, {{{0.5, 1}}});
    CHECK_THROWS_AS(sac_out_of_sample(panel, {}, config), std::invalid_argument);
    CHECK_THROWS_AS(sac_out_of_sample(panel, {TrainedPair{{1.0}, 0.0}}, config),
                    std::invalid_argument);
  }
}

TEST_CASE("bsac sampling") {
  Rng rng(27);
  auto ds = make_dataset({dense_random_panel("a", 10, 4, 2, rng, 1),
                          dense_random_panel("b", 10, 4, 2, rng, 0),
                          dense_random_panel("c", 10, 4, 2, rng, 1)},
                         2);

  SUBCASE("beta chain stays strictly positive") {
    BsacConfig config;
    config.gibbs.iterations = 300;
    config.gibbs.burn_in = 100;
    config.gibbs.thin = 1;
    config.gibbs.seed = 61;
    config.pilot_iterations = 150;
    const auto result = bsac_sample(ds, config);
    REQUIRE(!result.draws.empty());
    for (const auto& d : result.draws) {
      REQUIRE(d.beta.has_value());
      CHECK(*d.beta > 0.0);
    }
  }

  SUBCASE("tuned acceptance rates land in the target band") {
    BsacConfig config;
    config.gibbs.iterations = 400;
    config.gibbs.burn_in = 100;
    config.gibbs.thin = 2;
    config.gibbs.seed = 62;
    config.pilot_iterations = 300;
    const auto result = bsac_sample(ds, config);
    CHECK(result.state_accept_rate >= 0.2);
    CHECK(result.state_accept_rate <= 0.5);
    CHECK(result.beta_accept_rate >= 0.2);
    CHECK(result.beta_accept_rate <= 0.5);
  }

  SUBCASE("weight zero reduces to the constrained sampler") {
    Rng toy_rng(28);
    auto toy = make_dataset({dense_random_panel("t", 6, 3, 2, toy_rng, 1)}, 2);

    BsacConfig config;
    config.gibbs.iterations = 4000;
    config.gibbs.burn_in = 500;
    config.gibbs.thin = 1;
    config.gibbs.seed = 63;
    config.outcome_weight = 0.0;
    config.pilot_iterations = 300;
    const auto mh = bsac_sample(toy, config);

    GibbsConfig gc;
    gc.iterations = 4500;
    gc.burn_in = 500;
    gc.thin = 1;
    gc.seed = 64;
    const auto ffbs = sample_posterior(toy, gc);

    auto moments = [](const std::vector<ConstrainedDraw>& chain, std::size_t t) {
      std::vector<double> v;
      v.reserve(chain.size());
      for (const auto& d : chain) v.push_back(d.paths[0].x[t]);
      const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
      double var = 0.0;
      for (double x : v) var += (x - m) * (x - m);
      var /= v.size() - 1;
      // Autocorrelation-inflated standard error of the mean.
      double tau = 1.0;
      for (int lag = 1; lag <= 200; ++lag) {
        double acc = 0.0;
        for (std::size_t i = static_cast<std::size_t>(lag); i < v.size(); ++i) {
          acc += (v[i] - m) * (v[i - lag] - m);
        }
        const double rho = acc / ((v.size() - lag) * var);
        if (rho <= 0.0) break;
        tau += 2.0 * rho;
      }
      return std::pair<double, double>(m, std::sqrt(var * tau / v.size()));
    };

    for (std::size_t t = 0; t < 6; ++t) {
      const auto [m1, se1] = moments(mh.draws, t);
      const auto [m2, se2] = moments(ffbs, t);
      CHECK(std::fabs(m1 - m2) < 3.0 * std::sqrt(se1 * se1 + se2 * se2));
    }
  }

  SUBCASE("outcome required when the likelihood is active") {
    Rng r2(29);
    auto no_label = make_dataset({dense_random_panel("x", 8, 3, 2, r2)}, 2);
    BsacConfig config;
    config.gibbs.iterations = 10;
    config.gibbs.burn_in = 2;
    config.gibbs.seed = 1;
    CHECK_THROWS_AS(bsac_sample(no_label, config), std::invalid_argument);
  }
}
