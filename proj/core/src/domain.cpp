#include "crowdbelief/domain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace crowdbelief {

Probability::Probability(double value) : value_(value) {
  if (!(value > 0.0 && value < 1.0)) {
    throw std::invalid_argument("Probability: value must lie strictly inside (0, 1)");
  }
}

Probability censor(double p, double lo, double hi) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("censor: probability must lie in [0, 1]");
  }
  if (!(lo > 0.0 && lo < hi && hi < 1.0)) {
    throw std::invalid_argument("censor: bounds must satisfy 0 < lo < hi < 1");
  }
  return Probability(std::min(std::max(p, lo), hi));
}

double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("logit: input must lie strictly inside (0, 1); censor first");
  }
  return std::log(p / (1.0 - p));
}

double inverse_logit(double x) {
  double p;
  if (x >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    p = e / (1.0 + e);
  }
  // Keep the result strictly inside (0, 1) even for huge |x|.
  p = std::min(p, std::nextafter(1.0, 0.0));
  p = std::max(p, std::numeric_limits<double>::min());
  return p;
}

std::size_t QuestionPanel::forecast_count() const {
  std::size_t n = 0;
  for (const auto& s : slices) n += s.size();
  return n;
}

QuestionPanel QuestionPanel::prefix(int days) const {
  if (days < 1 || days > horizon) {
    throw std::invalid_argument("QuestionPanel::prefix: days out of range");
  }
  QuestionPanel out;
  out.question_id = question_id;
  out.horizon = days;
  out.outcome = outcome;
  out.slices.assign(slices.begin(), slices.begin() + days);
  return out;
}

QuestionPanel QuestionPanel::mirrored() const {
  QuestionPanel out = *this;
  for (auto& s : out.slices) {
    for (auto& f : s) f.y = -f.y;
  }
  if (out.outcome) out.outcome = 1 - *out.outcome;
  return out;
}

Dataset build_dataset(const std::vector<Forecast>& forecasts,
                      const std::vector<std::pair<std::string, int>>& horizons,
                      const std::vector<std::pair<std::string, int>>& outcomes) {
  std::unordered_map<std::string, int> horizon_by_id;
  std::vector<std::string> order;
  for (const auto& [id, t] : horizons) {
    if (t < 2) {
      throw std::invalid_argument("build_dataset: horizon must be >= 2 for question " + id);
    }
    if (!horizon_by_id.emplace(id, t).second) {
      throw std::invalid_argument("build_dataset: duplicate question id " + id);
    }
    order.push_back(id);
  }
  std::unordered_map<std::string, int> outcome_by_id;
  for (const auto& [id, z] : outcomes) {
    if (z != 0 && z != 1) {
      throw std::invalid_argument("build_dataset: outcome must be 0 or 1 for question " + id);
    }
    if (!horizon_by_id.count(id)) {
      throw std::invalid_argument("build_dataset: outcome for unknown question " + id);
    }
    outcome_by_id[id] = z;
  }

  Dataset ds;
  std::unordered_map<std::string, std::size_t> index_by_id;
  for (const auto& id : order) {
    QuestionPanel panel;
    panel.question_id = id;
    panel.horizon = horizon_by_id.at(id);
    panel.slices.resize(static_cast<std::size_t>(panel.horizon));
    if (auto it = outcome_by_id.find(id); it != outcome_by_id.end()) {
      panel.outcome = it->second;
    }
    index_by_id.emplace(id, ds.panels.size());
    ds.panels.push_back(std::move(panel));
  }

  for (const auto& f : forecasts) {
    auto it = index_by_id.find(f.question_id);
    if (it == index_by_id.end()) {
      throw std::invalid_argument("build_dataset: forecast for unknown question " + f.question_id);
    }
    QuestionPanel& panel = ds.panels[it->second];
    if (f.day < 1 || f.day > panel.horizon) {
      throw std::invalid_argument("build_dataset: day out of range for question " + f.question_id);
    }
    if (f.group < 1) {
      throw std::invalid_argument("build_dataset: expertise group must be >= 1");
    }
    if (!(f.prob > 0.0 && f.prob < 1.0)) {
      throw std::invalid_argument(
          "build_dataset: probability must be censored inside (0, 1) for question " +
          f.question_id);
    }
    panel.slices[static_cast<std::size_t>(f.day - 1)].push_back(
        LogitForecast{logit(f.prob), f.group});
    ds.groups = std::max(ds.groups, f.group);
  }
  return ds;
}

std::pair<Dataset, BalancePartition> balance(const Dataset& dataset) {
  for (const auto& panel : dataset.panels) {
    if (!panel.outcome) {
      throw std::invalid_argument("balance: question " + panel.question_id +
                                  " has no outcome; balancing requires labels");
    }
  }

  // Stable descending sort keeps ingestion order among equal horizons.
  std::vector<std::size_t> idx(dataset.panels.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return dataset.panels[a].horizon > dataset.panels[b].horizon;
  });

  BalancePartition part;
  part.flipped.assign(dataset.panels.size(), false);
  for (std::size_t i : idx) {
    const int t = dataset.panels[i].horizon;
    if (part.day_total0 <= part.day_total1) {
      part.side0.push_back(i);
      part.day_total0 += t;
    } else {
      part.side1.push_back(i);
      part.day_total1 += t;
    }
  }

  Dataset out = dataset;
  auto relabel = [&](const std::vector<std::size_t>& side, int label) {
    for (std::size_t i : side) {
      if (*out.panels[i].outcome != label) {
        out.panels[i] = out.panels[i].mirrored();
        part.flipped[i] = true;
      }
    }
  };
  relabel(part.side0, 0);
  relabel(part.side1, 1);
  return {std::move(out), std::move(part)};
}

}  // namespace crowdbelief
