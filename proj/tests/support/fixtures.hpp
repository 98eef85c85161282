// Small panel/dataset builders shared by the unit tests.
#pragma once

#include <string>
#include <vector>

#include "crowdbelief/domain.hpp"
#include "crowdbelief/rng.hpp"

namespace crowdbelief::testing {

/// A panel from explicit per-day (logit, group) entries.
inline QuestionPanel make_panel(const std::string& id, int horizon,
                                const std::vector<std::vector<LogitForecast>>& slices,
                                std::optional<int> outcome = std::nullopt) {
  QuestionPanel panel;
  panel.question_id = id;
  panel.horizon = horizon;
  panel.outcome = outcome;
  panel.slices = slices;
  panel.slices.resize(static_cast<std::size_t>(horizon));
  return panel;
}

/// Random panel with up to max_per_day single-group-or-mixed forecasts/day.
inline QuestionPanel random_panel(const std::string& id, int horizon, int max_per_day,
                                  int groups, Rng& rng, std::optional<int> outcome = std::nullopt) {
  std::vector<std::vector<LogitForecast>> slices(static_cast<std::size_t>(horizon));
  for (auto& s : slices) {
    const int n = static_cast<int>(rng.uniform() * (max_per_day + 1));
    for (int i = 0; i < n; ++i) {
      const int g = 1 + static_cast<int>(rng.uniform() * groups);
      s.push_back(LogitForecast{rng.normal(0.0, 1.5), std::min(g, groups)});
    }
  }
  return make_panel(id, horizon, slices, outcome);
}

/// Panel with exactly per_day forecasts each day, groups cycling 1..groups,
/// so every group is covered and variance conditionals are proper.
inline QuestionPanel dense_random_panel(const std::string& id, int horizon, int per_day,
                                        int groups, Rng& rng,
                                        std::optional<int> outcome = std::nullopt) {
  std::vector<std::vector<LogitForecast>> slices(static_cast<std::size_t>(horizon));
  int g = 0;
  for (auto& s : slices) {
    for (int i = 0; i < per_day; ++i) {
      s.push_back(LogitForecast{rng.normal(0.0, 1.5), 1 + (g++ % groups)});
    }
  }
  return make_panel(id, horizon, slices, outcome);
}

inline Dataset make_dataset(std::vector<QuestionPanel> panels, int groups) {
  Dataset ds;
  ds.panels = std::move(panels);
  ds.groups = groups;
  return ds;
}

}  // namespace crowdbelief::testing
