#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crowdbelief/domain.hpp"

namespace crowdbelief {

/// Raw forecast row as it appears on disk, before censoring.
struct ForecastRow {
  std::string question_id;
  std::string expert_id;
  int day = 0;
  double prob = 0.0;  // may be exactly 0 or 1 on disk
  int expertise = 1;
};

struct OutcomeRow {
  std::string question_id;
  int horizon = 0;
  std::optional<int> outcome;  // empty outcome field means unresolved
};

struct AggregateRow {
  std::string question_id;
  int day = 0;
  double mean_prob = 0.0;
  std::optional<double> lo95;
  std::optional<double> hi95;
};

struct TruthRow {
  std::string question_id;
  int day = 0;
  double x_true = 0.0;
  double p_true = 0.0;
};

/// Formats a double with 17 significant digits so every emitted value
/// round-trips exactly through the readers.
std::string format_double(double v);

// Forecast CSV: header `question_id,expert_id,day,prob,expertise`.
std::vector<ForecastRow> read_forecast_csv(const std::filesystem::path& path);
void write_forecast_csv(const std::filesystem::path& path, const std::vector<ForecastRow>& rows);

// Outcome CSV: header `question_id,horizon,outcome`, outcome in {0,1} or empty.
std::vector<OutcomeRow> read_outcome_csv(const std::filesystem::path& path);
void write_outcome_csv(const std::filesystem::path& path, const std::vector<OutcomeRow>& rows);

// Aggregate-path CSV: header `question_id,day,mean_prob,lo95,hi95`;
// interval fields are empty when the method does not provide them.
std::vector<AggregateRow> read_aggregate_csv(const std::filesystem::path& path);
void write_aggregate_csv(const std::filesystem::path& path, const std::vector<AggregateRow>& rows);

// Truth CSV (synthetic generator): header `question_id,day,x_true,p_true`.
std::vector<TruthRow> read_truth_csv(const std::filesystem::path& path);
void write_truth_csv(const std::filesystem::path& path, const std::vector<TruthRow>& rows);

/// Censors each row with the given bounds and assembles the dataset.
/// Horizons and outcomes come from the outcome rows.
Dataset dataset_from_rows(const std::vector<ForecastRow>& forecasts,
                          const std::vector<OutcomeRow>& outcomes,
                          double censor_lo = kDefaultCensorLo,
                          double censor_hi = kDefaultCensorHi);

}  // namespace crowdbelief
