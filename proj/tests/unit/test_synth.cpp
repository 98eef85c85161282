#include <cmath>
#include <filesystem>
#include <fstream>

#include "crowdbelief/csv.hpp"
#include "crowdbelief/numeric.hpp"
#include "crowdbelief/synth.hpp"
#include "doctest.h"

using namespace crowdbelief;

TEST_CASE("noise-free generation reproduces the loading times the hidden path") {
  SynthConfig config;
  config.horizon = 15;
  config.experts_per_group = 2;
  config.obs_var = 1e-30;
  config.beta = 1.0;
  config.questions = 1;
  config.seed = 42;
  const auto data = generate_dataset(config);
  const auto& panel = data.dataset.panels[0];
  const auto& truth = data.truths[0];
  REQUIRE(truth.bias == kSynthBaseBias);
  for (int t = 1; t < config.horizon; ++t) {
    for (const auto& f : panel.slices[static_cast<std::size_t>(t - 1)]) {
      const double expected = truth.bias[static_cast<std::size_t>(f.group - 1)] *
                              truth.hidden[static_cast<std::size_t>(t - 1)];
      CHECK(f.y == doctest::Approx(expected).epsilon(1e-9));
    }
  }
  // The unit-loading group echoes the hidden path itself.
  for (int t = 1; t < config.horizon; ++t) {
    const auto& slice = panel.slices[static_cast<std::size_t>(t - 1)];
    const auto it = std::find_if(slice.begin(), slice.end(),
                                 [](const LogitForecast& f) { return f.group == 3; });
    REQUIRE(it != slice.end());
    CHECK(inverse_logit(it->y) ==
          doctest::Approx(inverse_logit(truth.hidden[static_cast<std::size_t>(t - 1)]))
              .epsilon(1e-9));
  }
  // The final day carries the outcome only.
  CHECK(panel.slices.back().empty());
  CHECK(*panel.outcome == truth.outcome);
}

TEST_CASE("hidden path endpoint uses the one-step-out scale") {
  Rng rng(7);
  const auto truth = generate_truth(30, rng);
  const double z = truth.brownian[28];  // t = T-1
  CHECK(truth.hidden[28] == doctest::Approx(logit(normal_cdf(z))).epsilon(1e-12));
  CHECK(truth.outcome == (truth.brownian.back() > 0.0 ? 1 : 0));
  CHECK(truth.hidden.size() == 29);
  CHECK(truth.brownian.size() == 30);
}

TEST_CASE("generated truth probabilities are calibrated") {
  // Bin the implied probabilities at several interior days over many
  // questions; the event frequency per bin should match the bin center.
  constexpr int kQuestions = 10000;
  constexpr int kHorizon = 41;
  const std::vector<int> days = {1, 10, 20, 30, 40};
  std::vector<double> bin_hits(10, 0.0);
  std::vector<double> bin_prob(10, 0.0);
  std::vector<double> bin_count(10, 0.0);
  for (int q = 0; q < kQuestions; ++q) {
    Rng rng(Rng::mix(991, static_cast<std::uint64_t>(q)));
    const auto truth = generate_truth(kHorizon, rng);
    for (int day : days) {
      const double p = inverse_logit(truth.hidden[static_cast<std::size_t>(day - 1)]);
      auto bin = std::min(static_cast<std::size_t>(p * 10.0), std::size_t{9});
      bin_hits[bin] += truth.outcome;
      bin_prob[bin] += p;
      bin_count[bin] += 1.0;
    }
  }
  for (std::size_t b = 0; b < 10; ++b) {
    REQUIRE(bin_count[b] > 100);
    const double freq = bin_hits[b] / bin_count[b];
    const double center = bin_prob[b] / bin_count[b];
    CHECK(std::fabs(freq - center) < 0.02);
  }
}

TEST_CASE("generation is deterministic in the seed") {
  SynthConfig config;
  config.horizon = 12;
  config.questions = 3;
  config.seed = 314;
  const auto a = generate_dataset(config);
  const auto b = generate_dataset(config);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(a.truths[k].brownian == b.truths[k].brownian);
    CHECK(*a.dataset.panels[k].outcome == *b.dataset.panels[k].outcome);
    for (std::size_t t = 0; t < a.dataset.panels[k].slices.size(); ++t) {
      REQUIRE(a.dataset.panels[k].slices[t].size() == b.dataset.panels[k].slices[t].size());
      for (std::size_t i = 0; i < a.dataset.panels[k].slices[t].size(); ++i) {
        CHECK(a.dataset.panels[k].slices[t][i].y == b.dataset.panels[k].slices[t][i].y);
      }
    }
  }
}

TEST_CASE("export rows round trip through the CSV layer") {
  SynthConfig config;
  config.horizon = 8;
  config.experts_per_group = 1;
  config.questions = 2;
  config.seed = 5;
  const auto data = generate_dataset(config);
  const auto dir = std::filesystem::temp_directory_path() / "cb_synth_csv";
  std::filesystem::create_directories(dir);
  write_forecast_csv(dir / "f.csv", to_forecast_rows(data.dataset));
  write_outcome_csv(dir / "o.csv", to_outcome_rows(data.dataset));
  write_truth_csv(dir / "t.csv", to_truth_rows(data.dataset, data.truths));

  const auto forecasts = read_forecast_csv(dir / "f.csv");
  const auto outcomes = read_outcome_csv(dir / "o.csv");
  const auto truths = read_truth_csv(dir / "t.csv");
  CHECK(forecasts.size() == 2 * 7 * 5);  // K * (T-1) * groups, one expert each
  CHECK(outcomes.size() == 2);
  CHECK(truths.size() == 2 * 7);
  // Wide censoring bounds keep extreme synthetic logits intact.
  const auto ds = dataset_from_rows(forecasts, outcomes, 1e-9, 1.0 - 1e-9);
  CHECK(ds.panels[0].slices[0][0].y ==
        doctest::Approx(data.dataset.panels[0].slices[0][0].y).epsilon(1e-9));
}

TEST_CASE("study harness") {
  StudyConfig config;
  config.sigma2_grid = {1.0};
  config.beta_grid = {1.0};
  config.k_grid = {4};
  config.replicates = 2;
  config.methods = {StudyMethod::kOracle, StudyMethod::kEwma};
  config.base.horizon = 15;
  config.base.experts_per_group = 2;
  config.seed = 2718;
  const auto rows = run_study(config);

  SUBCASE("oracle losses vanish") {
    CHECK(study_mean(rows, "oracle", "hidden", "quadratic") == doctest::Approx(0.0));
    CHECK(study_mean(rows, "oracle", "bias", "absolute") == doctest::Approx(0.0));
  }
  SUBCASE("ewma rows are present and bounded") {
    const double loss = study_mean(rows, "ewma", "hidden", "quadratic");
    CHECK(loss > 0.0);
    CHECK(loss < 0.25);
    // EWMA produces no loading estimate.
    CHECK_THROWS_AS(study_mean(rows, "ewma", "bias", "quadratic"), std::invalid_argument);
  }
  SUBCASE("row schema and determinism") {
    // 2 replicates x (oracle: 4 rows, ewma: 2 rows)
    CHECK(rows.size() == 12);
    const auto again = run_study(config);
    REQUIRE(again.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(rows[i].method == again[i].method);
      CHECK(rows[i].value == again[i].value);
    }
    const auto path = std::filesystem::temp_directory_path() / "cb_study.csv";
    write_study_csv(path, rows);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "method,sigma2,beta,K,replicate,quantity,loss_type,value");
  }
}

TEST_CASE("study runs the sampling step once for both scoring rules") {
  StudyConfig config;
  config.sigma2_grid = {1.0};
  config.beta_grid = {1.0};
  config.k_grid = {6};
  config.replicates = 1;
  config.methods = {StudyMethod::kSacBrier, StudyMethod::kSacLog};
  config.base.horizon = 21;
  config.base.experts_per_group = 2;
  config.sac = GibbsConfig::study_defaults();
  config.seed = 1234;
  const auto rows = run_study(config);
  // Both SAC variants report hidden and bias losses.
  CHECK(study_mean(rows, "sac-bri", "hidden", "quadratic") > 0.0);
  CHECK(study_mean(rows, "sac-log", "hidden", "quadratic") > 0.0);
  CHECK(study_mean(rows, "sac-bri", "bias", "quadratic") >= 0.0);
  CHECK(study_mean(rows, "sac-log", "bias", "quadratic") >= 0.0);
}
