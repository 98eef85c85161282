#include <algorithm>
#include <cmath>
#include <fstream>

#include "crowdbelief/csv.hpp"
#include "crowdbelief/domain.hpp"
#include "crowdbelief/errors.hpp"
#include "crowdbelief/rng.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"
#include "support/paper_shape.hpp"

using namespace crowdbelief;

TEST_CASE("censor clamps boundary reports") {
  CHECK(censor(0.0).value() == doctest::Approx(0.01));
  CHECK(censor(1.0).value() == doctest::Approx(0.99));
  CHECK(censor(0.5).value() == 0.5);
  CHECK(censor(0.005, 0.02, 0.98).value() == doctest::Approx(0.02));
  CHECK_THROWS_AS(censor(-0.1), std::invalid_argument);
  CHECK_THROWS_AS(censor(1.1), std::invalid_argument);
  CHECK_THROWS_AS(censor(0.5, 0.9, 0.1), std::invalid_argument);
}

TEST_CASE("logit basics") {
  CHECK(logit(0.5) == 0.0);
  CHECK(logit(inverse_logit(1.0)) == doctest::Approx(1.0).epsilon(1e-12));
  // log(99) from a high-precision oracle.
  CHECK(logit(0.99) == doctest::Approx(4.5951198501345899).epsilon(1e-12));
  CHECK(logit(0.25) == doctest::Approx(-logit(0.75)).epsilon(1e-14));
  CHECK_THROWS_AS(logit(0.0), std::domain_error);
  CHECK_THROWS_AS(logit(1.0), std::domain_error);
}

TEST_CASE("inverse_logit is stable and symmetric") {
  CHECK(inverse_logit(0.0) == 0.5);
  for (double x : {1.0, 5.0, 30.0}) {
    CHECK(inverse_logit(-x) == doctest::Approx(1.0 - inverse_logit(x)).epsilon(1e-12));
  }
  const double hi = inverse_logit(40.0);
  const double lo = inverse_logit(-40.0);
  CHECK(hi < 1.0);
  CHECK(hi > 0.0);
  CHECK(lo > 0.0);
  CHECK(lo < 1.0);
  CHECK(inverse_logit(41.0) >= hi);
  CHECK(inverse_logit(-41.0) <= lo);
  CHECK(inverse_logit(1000.0) < 1.0);
  CHECK(inverse_logit(-1000.0) > 0.0);
}

TEST_CASE("logit round trip within 1e-10 on the censored range") {
  for (int i = 1; i <= 99; ++i) {
    const double p = i / 100.0;
    CHECK(inverse_logit(logit(p)) == doctest::Approx(p).epsilon(1e-10));
  }
}

namespace {

Dataset dataset_with_horizons(const std::vector<int>& horizons, int outcome_pattern = 0) {
  std::vector<QuestionPanel> panels;
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    auto panel = crowdbelief::testing::make_panel("q" + std::to_string(i + 1), horizons[i], {},
                                                  (static_cast<int>(i) + outcome_pattern) % 2);
    panels.push_back(std::move(panel));
  }
  return crowdbelief::testing::make_dataset(std::move(panels), 1);
}

}  // namespace

TEST_CASE("balance hand trace {4,3,3,2}") {
  const auto [balanced, part] = balance(dataset_with_horizons({4, 3, 3, 2}));
  CHECK(part.day_total0 == 6);
  CHECK(part.day_total1 == 6);
  // Descending greedy: 4 -> side0, 3 -> side1, 3 -> side1, 2 -> side0.
  REQUIRE(part.side0.size() == 2);
  REQUIRE(part.side1.size() == 2);
  CHECK(balanced.panels[part.side0[0]].horizon == 4);
  CHECK(balanced.panels[part.side0[1]].horizon == 2);
  CHECK(balanced.panels[part.side1[0]].horizon == 3);
  CHECK(balanced.panels[part.side1[1]].horizon == 3);
}

TEST_CASE("balance on the paper-shape fixture") {
  std::vector<int> horizons(crowdbelief::testing::kPaperShapeHorizons.begin(),
                            crowdbelief::testing::kPaperShapeHorizons.end());
  long long total = 0;
  for (int t : horizons) total += t;
  REQUIRE(total == crowdbelief::testing::kPaperShapeTotalDays);

  const auto [balanced, part] = balance(dataset_with_horizons(horizons));
  CHECK(part.side0.size() == 83);
  CHECK(part.side1.size() == 83);
  const long long gap = std::llabs(part.day_total0 - part.day_total1);
  const int max_horizon = *std::max_element(horizons.begin(), horizons.end());
  CHECK(gap <= max_horizon);
  CHECK(gap == 1);  // this fixture balances to 8738 / 8737
  CHECK(part.day_total0 + part.day_total1 == total);
}

TEST_CASE("balance relabels and mirrors") {
  auto panel0 = crowdbelief::testing::make_panel(
      "a", 3, {{{0.4, 1}}, {{-0.2, 1}}, {}}, 1);  // will land on side0 -> flip
  auto panel1 = crowdbelief::testing::make_panel("b", 3, {{{1.0, 1}}, {}, {}}, 1);
  const auto ds = crowdbelief::testing::make_dataset({panel0, panel1}, 1);
  const auto [balanced, part] = balance(ds);
  for (std::size_t k : part.side0) CHECK(*balanced.panels[k].outcome == 0);
  for (std::size_t k : part.side1) CHECK(*balanced.panels[k].outcome == 1);
  // Question "a" sits on side0 with original outcome 1: logits negated.
  const auto& a = balanced.panels[0];
  REQUIRE(a.question_id == "a");
  CHECK(part.flipped[0]);
  CHECK(a.slices[0][0].y == -0.4);
  CHECK(a.slices[1][0].y == 0.2);
}

TEST_CASE("balance single question is degenerate but legal") {
  const auto [balanced, part] = balance(dataset_with_horizons({5}));
  CHECK(part.side0.size() == 1);
  CHECK(part.side1.empty());
  CHECK(std::llabs(part.day_total0 - part.day_total1) == 5);
}

TEST_CASE("balance requires outcomes") {
  auto panel = crowdbelief::testing::make_panel("a", 3, {});
  CHECK_THROWS_AS(balance(crowdbelief::testing::make_dataset({panel}, 1)),
                  std::invalid_argument);
}

TEST_CASE("greedy partition bound on random horizon multisets") {
  Rng rng(42);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 1 + static_cast<int>(rng.uniform() * 40);
    std::vector<int> horizons;
    int max_h = 2;
    for (int i = 0; i < n; ++i) {
      const int h = 2 + static_cast<int>(rng.uniform() * 120);
      horizons.push_back(h);
      max_h = std::max(max_h, h);
    }
    const auto [balanced, part] = balance(dataset_with_horizons(horizons));
    CHECK(std::llabs(part.day_total0 - part.day_total1) <= max_h);
    CHECK(part.side0.size() + part.side1.size() == horizons.size());
  }
}

TEST_CASE("balance is deterministic") {
  std::vector<int> horizons = {7, 7, 5, 5, 5, 3, 2, 2};
  const auto r1 = balance(dataset_with_horizons(horizons));
  const auto r2 = balance(dataset_with_horizons(horizons));
  CHECK(r1.second.side0 == r2.second.side0);
  CHECK(r1.second.side1 == r2.second.side1);
}

TEST_CASE("build_dataset validates fields") {
  std::vector<Forecast> fs = {{"q1", "e1", 1, 0.4, 1}};
  CHECK_THROWS_AS(build_dataset(fs, {{"q1", 3}, {"q1", 4}}), std::invalid_argument);
  CHECK_THROWS_AS(build_dataset(fs, {{"q2", 3}}), std::invalid_argument);
  std::vector<Forecast> bad_day = {{"q1", "e1", 9, 0.4, 1}};
  CHECK_THROWS_AS(build_dataset(bad_day, {{"q1", 3}}), std::invalid_argument);
  const auto ds = build_dataset(fs, {{"q1", 3}}, {{"q1", 1}});
  CHECK(ds.panels.size() == 1);
  CHECK(ds.panels[0].forecast_count() == 1);
  CHECK(ds.groups == 1);
  CHECK(*ds.panels[0].outcome == 1);
}

TEST_CASE("forecast and outcome CSV round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "cb_domain_csv";
  std::filesystem::create_directories(dir);
  std::vector<ForecastRow> rows = {
      {"q1", "alice", 1, 0.07, 2},
      {"q1", "bob", 2, 1.0, 5},
      {"q2", "carol", 1, 0.123456789012345, 1},
  };
  write_forecast_csv(dir / "f.csv", rows);
  const auto back = read_forecast_csv(dir / "f.csv");
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].question_id == rows[i].question_id);
    CHECK(back[i].expert_id == rows[i].expert_id);
    CHECK(back[i].day == rows[i].day);
    CHECK(back[i].prob == rows[i].prob);  // 17 digits round-trip exactly
    CHECK(back[i].expertise == rows[i].expertise);
  }

  std::vector<OutcomeRow> orows = {{"q1", 5, 1}, {"q2", 3, std::nullopt}};
  write_outcome_csv(dir / "o.csv", orows);
  const auto oback = read_outcome_csv(dir / "o.csv");
  REQUIRE(oback.size() == 2);
  CHECK(*oback[0].outcome == 1);
  CHECK(!oback[1].outcome);

  // The censoring pass makes the extreme report usable.
  const auto ds = dataset_from_rows(back, oback);
  CHECK(ds.panels[0].slices[1][0].y == doctest::Approx(logit(0.99)));
  CHECK_THROWS_AS(read_forecast_csv(dir / "missing.csv"), io_error);
}

TEST_CASE("bad CSV headers are rejected") {
  const auto dir = std::filesystem::temp_directory_path() / "cb_domain_csv";
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "bad.csv");
    out << "question,expert,day\nq1,e1,1\n";
  }
  CHECK_THROWS_AS(read_forecast_csv(dir / "bad.csv"), io_error);
}
