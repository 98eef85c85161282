#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace crowdbelief {

/// Default censoring bounds applied to raw reports before the logit
/// transform. Results should be insensitive to the exact choice as long as
/// extreme reports stay bounded away from 0 and 1.
inline constexpr double kDefaultCensorLo = 0.01;
inline constexpr double kDefaultCensorHi = 0.99;

/// A probability strictly inside (0, 1). Raw reports in [0, 1] must pass
/// through censor() before they can become one of these.
class Probability {
 public:
  explicit Probability(double value);
  double value() const { return value_; }
  operator double() const { return value_; }

 private:
  double value_;
};

/// Clamps a raw report in [0, 1] to [lo, hi].
Probability censor(double p, double lo = kDefaultCensorLo, double hi = kDefaultCensorHi);

/// log(p / (1 - p)); boundary inputs must be censored first.
double logit(double p);

/// 1 / (1 + exp(-x)), overflow-safe and clamped strictly inside (0, 1)
/// at machine range for large |x|.
double inverse_logit(double x);

/// One expert's report for one question on one day.
struct Forecast {
  std::string question_id;
  std::string expert_id;
  int day = 0;        // 1-based
  double prob = 0.5;  // censored, strictly inside (0, 1)
  int group = 1;      // self-reported expertise, 1..J
};

/// A forecast already mapped to the logit scale, tagged with its group.
struct LogitForecast {
  double y = 0.0;
  int group = 1;
};

/// Every forecast for one question, indexed by day, plus the horizon and
/// (when known) the resolved outcome.
struct QuestionPanel {
  std::string question_id;
  int horizon = 0;                               // T >= 2, days
  std::optional<int> outcome;                    // 0, 1, or unknown
  std::vector<std::vector<LogitForecast>> slices;  // size horizon; day t at index t-1

  const std::vector<LogitForecast>& slice(int day) const { return slices.at(day - 1); }
  std::size_t forecast_count() const;
  /// Number of distinct (y, group) observations is not tracked per expert;
  /// this counts forecasts per day.
  std::size_t day_count(int day) const { return slices.at(day - 1).size(); }
  bool empty() const { return forecast_count() == 0; }

  /// Copy of the panel truncated to the first `days` days.
  QuestionPanel prefix(int days) const;

  /// Copy with all logits negated and the outcome (if known) relabeled.
  QuestionPanel mirrored() const;
};

struct Dataset {
  std::vector<QuestionPanel> panels;
  int groups = 0;  // J

  std::size_t size() const { return panels.size(); }
};

/// Validates invariants (field ranges, day <= horizon, unique question ids)
/// and assembles panels in first-appearance order of question ids. Every
/// question must appear in `horizons`; outcomes may be left unknown.
Dataset build_dataset(const std::vector<Forecast>& forecasts,
                      const std::vector<std::pair<std::string, int>>& horizons,
                      const std::vector<std::pair<std::string, int>>& outcomes = {});

/// Output of the greedy day-balancing pass.
struct BalancePartition {
  std::vector<std::size_t> side0;   // indices into the dataset's panels
  std::vector<std::size_t> side1;
  std::vector<bool> flipped;        // per panel: probabilities mirrored?
  long long day_total0 = 0;
  long long day_total1 = 0;
};

/// Greedy partition of questions into two sides with near-equal day totals
/// (descending horizon order, each question to the lighter side, ties to
/// side 0). Questions landing on side x keep label x: a question whose
/// outcome disagrees has its outcome relabeled and all its forecasts
/// mirrored. All outcomes must be known.
std::pair<Dataset, BalancePartition> balance(const Dataset& dataset);

}  // namespace crowdbelief
