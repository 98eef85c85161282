#include "crowdbelief/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "crowdbelief/errors.hpp"
#include "crowdbelief/numeric.hpp"
#include "crowdbelief/optim.hpp"
#include "crowdbelief/rng.hpp"
#include "json.hpp"

namespace crowdbelief {

namespace {

struct DayGroupAgg {
  int group = 1;
  int count = 0;
  double sum_prob = 0.0;
  double sum_logit = 0.0;
};

/// Per-group sums in ascending group order, values accumulated sorted so a
/// permutation of the slice cannot change the result.
std::vector<DayGroupAgg> aggregate_slice(const std::vector<LogitForecast>& slice) {
  std::map<int, std::vector<double>> by_group;
  for (const auto& f : slice) by_group[f.group].push_back(f.y);
  std::vector<DayGroupAgg> aggs;
  aggs.reserve(by_group.size());
  for (auto& [group, ys] : by_group) {
    std::sort(ys.begin(), ys.end());
    DayGroupAgg a;
    a.group = group;
    a.count = static_cast<int>(ys.size());
    for (double y : ys) {
      a.sum_logit += y;
      a.sum_prob += inverse_logit(y);
    }
    aggs.push_back(a);
  }
  return aggs;
}

struct PanelCache {
  std::vector<std::vector<DayGroupAgg>> days;
  std::optional<int> outcome;
};

PanelCache make_cache(const QuestionPanel& panel) {
  PanelCache cache;
  cache.outcome = panel.outcome;
  cache.days.reserve(panel.slices.size());
  for (const auto& s : panel.slices) cache.days.push_back(aggregate_slice(s));
  return cache;
}

void check_weights(const std::vector<double>& weights, int max_group) {
  if (static_cast<int>(weights.size()) < max_group) {
    throw std::invalid_argument("baseline weights are missing groups present in the data");
  }
  for (double w : weights) {
    if (!(w >= 0.0)) {
      throw std::invalid_argument("baseline weights must be nonnegative");
    }
  }
}

std::optional<double> weighted_mean_agg(const std::vector<DayGroupAgg>& aggs,
                                        const std::vector<double>& weights) {
  if (aggs.empty()) return std::nullopt;
  check_weights(weights, aggs.back().group);
  double total_w = 0.0;
  for (const auto& a : aggs) total_w += weights[static_cast<std::size_t>(a.group - 1)];
  double value = 0.0;
  if (total_w > 0.0) {
    for (const auto& a : aggs) {
      const double w = weights[static_cast<std::size_t>(a.group - 1)];
      value += (w / total_w) * (a.sum_prob / a.count);
    }
  } else {
    // All present groups carry zero weight; fall back to equal weighting.
    for (const auto& a : aggs) value += (a.sum_prob / a.count) / static_cast<double>(aggs.size());
  }
  return value;
}

std::optional<double> ewmla_agg(const std::vector<DayGroupAgg>& aggs,
                                const std::vector<double>& bias) {
  if (aggs.empty()) return std::nullopt;
  int n = 0;
  for (const auto& a : aggs) n += a.count;
  double s = 0.0;
  for (const auto& a : aggs) {
    if (static_cast<int>(bias.size()) < a.group) {
      throw std::invalid_argument("ewmla bias vector is missing groups present in the data");
    }
    s += bias[static_cast<std::size_t>(a.group - 1)] * a.sum_logit;
  }
  return inverse_logit(s / static_cast<double>(n));
}

std::optional<double> ewmba_agg(const std::vector<DayGroupAgg>& aggs, const EwmbaParams& params) {
  const auto pbar = weighted_mean_agg(aggs, params.weights);
  if (!pbar) return std::nullopt;
  if (!(params.shape1 > 0.0 && params.shape2 > 0.0)) {
    throw std::invalid_argument("ewmba shapes must be positive");
  }
  return regularized_incomplete_beta(*pbar, params.shape1, params.shape2);
}

template <typename DayValue>
std::vector<double> smooth(const PanelCache& cache, double alpha, DayValue&& day_value) {
  std::vector<double> out(cache.days.size());
  bool started = false;
  double prev = 0.5;
  for (std::size_t t = 0; t < cache.days.size(); ++t) {
    const std::optional<double> v = day_value(cache.days[t]);
    if (!v) {
      out[t] = prev;
    } else if (!started) {
      started = true;
      prev = *v;
      out[t] = prev;
    } else {
      prev = alpha * *v + (1.0 - alpha) * prev;
      out[t] = prev;
    }
  }
  return out;
}

std::vector<double> path_from_cache(const PanelCache& cache, const BaselineParams& params) {
  if (const auto* p = std::get_if<EwmaParams>(&params)) {
    return smooth(cache, p->alpha, [&](const auto& aggs) {
      return weighted_mean_agg(aggs, p->weights);
    });
  }
  if (const auto* p = std::get_if<EwmlaParams>(&params)) {
    return smooth(cache, p->alpha, [&](const auto& aggs) { return ewmla_agg(aggs, p->bias); });
  }
  const auto& p = std::get<EwmbaParams>(params);
  return smooth(cache, p.alpha, [&](const auto& aggs) { return ewmba_agg(aggs, p); });
}

/// Maps the optimizer's unconstrained coordinates onto a family's parameter
/// box/simplex: alpha clamped to [0,1], shapes through a bounded exp, and
/// the simplex through a normalized exponential with the last logit pinned.
struct ParamCodec {
  BaselineFamily family;
  int groups;

  std::size_t dim() const {
    switch (family) {
      case BaselineFamily::kEwma:
        return 1 + static_cast<std::size_t>(groups - 1);
      case BaselineFamily::kEwmla:
        return 1 + static_cast<std::size_t>(groups);
      case BaselineFamily::kEwmba:
        return 3 + static_cast<std::size_t>(groups - 1);
    }
    return 0;
  }

  std::vector<double> simplex(const double* logits) const {
    std::vector<double> w(static_cast<std::size_t>(groups));
    double max_l = 0.0;  // the pinned last logit
    for (int j = 0; j + 1 < groups; ++j) max_l = std::max(max_l, logits[j]);
    double total = 0.0;
    for (int j = 0; j < groups; ++j) {
      const double l = j + 1 < groups ? logits[j] : 0.0;
      w[static_cast<std::size_t>(j)] = std::exp(l - max_l);
      total += w[static_cast<std::size_t>(j)];
    }
    for (double& v : w) v /= total;
    return w;
  }

  BaselineParams decode(const std::vector<double>& theta) const {
    const double alpha = std::clamp(theta[0], 0.0, 1.0);
    switch (family) {
      case BaselineFamily::kEwma: {
        EwmaParams p;
        p.alpha = alpha;
        p.weights = simplex(theta.data() + 1);
        return p;
      }
      case BaselineFamily::kEwmla: {
        EwmlaParams p;
        p.alpha = alpha;
        p.bias.assign(theta.begin() + 1, theta.end());
        return p;
      }
      case BaselineFamily::kEwmba: {
        EwmbaParams p;
        p.alpha = alpha;
        p.shape1 = std::exp(std::clamp(theta[1], -10.0, 10.0));
        p.shape2 = std::exp(std::clamp(theta[2], -10.0, 10.0));
        p.weights = simplex(theta.data() + 3);
        return p;
      }
    }
    throw std::logic_error("unreachable");
  }

  std::vector<double> default_start() const {
    std::vector<double> theta(dim(), 0.0);
    theta[0] = 1.0;  // alpha = 1
    if (family == BaselineFamily::kEwmla) {
      std::fill(theta.begin() + 1, theta.end(), 1.0);
    }
    return theta;
  }

  std::vector<double> random_start(Rng& rng) const {
    std::vector<double> theta(dim());
    theta[0] = rng.uniform();
    switch (family) {
      case BaselineFamily::kEwma:
        for (std::size_t i = 1; i < theta.size(); ++i) theta[i] = rng.normal(0.0, 1.0);
        break;
      case BaselineFamily::kEwmla:
        for (std::size_t i = 1; i < theta.size(); ++i) theta[i] = rng.normal(1.0, 0.5);
        break;
      case BaselineFamily::kEwmba:
        theta[1] = rng.normal(0.0, 0.7);
        theta[2] = rng.normal(0.0, 0.7);
        for (std::size_t i = 3; i < theta.size(); ++i) theta[i] = rng.normal(0.0, 1.0);
        break;
    }
    return theta;
  }
};

}  // namespace

std::string to_string(BaselineFamily family) {
  switch (family) {
    case BaselineFamily::kEwma:
      return "ewma";
    case BaselineFamily::kEwmla:
      return "ewmla";
    case BaselineFamily::kEwmba:
      return "ewmba";
  }
  return "?";
}

BaselineFamily baseline_family_from_string(const std::string& name) {
  if (name == "ewma") return BaselineFamily::kEwma;
  if (name == "ewmla") return BaselineFamily::kEwmla;
  if (name == "ewmba") return BaselineFamily::kEwmba;
  throw std::invalid_argument("unknown baseline family `" + name + "`");
}

std::optional<double> group_weighted_mean(const std::vector<LogitForecast>& slice,
                                          const std::vector<double>& weights) {
  return weighted_mean_agg(aggregate_slice(slice), weights);
}

std::optional<double> ewmla_aggregate(const std::vector<LogitForecast>& slice,
                                      const std::vector<double>& bias) {
  return ewmla_agg(aggregate_slice(slice), bias);
}

std::optional<double> ewmba_aggregate(const std::vector<LogitForecast>& slice,
                                      const EwmbaParams& params) {
  return ewmba_agg(aggregate_slice(slice), params);
}

std::vector<double> ewma_path(const QuestionPanel& panel, const EwmaParams& params) {
  return path_from_cache(make_cache(panel), params);
}

std::vector<double> ewmla_path(const QuestionPanel& panel, const EwmlaParams& params) {
  return path_from_cache(make_cache(panel), params);
}

std::vector<double> ewmba_path(const QuestionPanel& panel, const EwmbaParams& params) {
  return path_from_cache(make_cache(panel), params);
}

std::vector<double> baseline_path(const QuestionPanel& panel, const BaselineParams& params) {
  return path_from_cache(make_cache(panel), params);
}

BaselineFitResult fit_baseline(const Dataset& training, BaselineFamily family,
                               std::uint64_t seed, int restarts) {
  if (training.panels.empty()) {
    throw std::invalid_argument("fit_baseline: empty training set");
  }
  bool any0 = false;
  bool any1 = false;
  std::vector<PanelCache> caches;
  caches.reserve(training.panels.size());
  for (const auto& panel : training.panels) {
    if (!panel.outcome) {
      throw std::invalid_argument("fit_baseline: question " + panel.question_id +
                                  " has no outcome; fitting requires labels");
    }
    (*panel.outcome == 0 ? any0 : any1) = true;
    caches.push_back(make_cache(panel));
  }
  if (!any0 || !any1) {
    throw separation_error("fit_baseline: training outcomes are all identical");
  }

  const ParamCodec codec{family, std::max(training.groups, 1)};
  auto objective = [&](const std::vector<double>& theta) {
    const BaselineParams params = codec.decode(theta);
    double total = 0.0;
    for (const auto& cache : caches) {
      const auto path = path_from_cache(cache, params);
      const double z = static_cast<double>(*cache.outcome);
      for (double p : path) total += (z - p) * (z - p);
    }
    return total;
  };

  NelderMeadOptions options;
  std::vector<double> best_theta = codec.default_start();
  auto result = nelder_mead_minimize(objective, best_theta, options);
  double best_value = result.value;
  best_theta = result.x;
  for (int r = 0; r < restarts; ++r) {
    Rng rng = Rng::child(seed, static_cast<std::uint64_t>(r) + 1);
    const auto start = codec.random_start(rng);
    const auto candidate = nelder_mead_minimize(objective, start, options);
    if (candidate.value < best_value) {
      best_value = candidate.value;
      best_theta = candidate.x;
    }
  }
  return BaselineFitResult{codec.decode(best_theta), best_value};
}

void write_baseline_params(const std::filesystem::path& path, const BaselineFitResult& fit) {
  std::ofstream out(path);
  if (!out) {
    throw io_error("cannot open " + path.string() + " for writing");
  }
  nlohmann::json j;
  j["objective"] = fit.objective;
  if (const auto* p = std::get_if<EwmaParams>(&fit.params)) {
    j["family"] = "ewma";
    j["alpha"] = p->alpha;
    j["weights"] = p->weights;
  } else if (const auto* p = std::get_if<EwmlaParams>(&fit.params)) {
    j["family"] = "ewmla";
    j["alpha"] = p->alpha;
    j["bias"] = p->bias;
  } else {
    const auto& q = std::get<EwmbaParams>(fit.params);
    j["family"] = "ewmba";
    j["alpha"] = q.alpha;
    j["shape1"] = q.shape1;
    j["shape2"] = q.shape2;
    j["weights"] = q.weights;
  }
  out << j.dump(2) << '\n';
}

BaselineFitResult read_baseline_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw io_error("cannot open " + path.string() + " for reading");
  }
  try {
    nlohmann::json j;
    in >> j;
    BaselineFitResult fit;
    fit.objective = j.value("objective", 0.0);
    const std::string family = j.at("family").get<std::string>();
    if (family == "ewma") {
      EwmaParams p;
      p.alpha = j.at("alpha").get<double>();
      p.weights = j.at("weights").get<std::vector<double>>();
      fit.params = p;
    } else if (family == "ewmla") {
      EwmlaParams p;
      p.alpha = j.at("alpha").get<double>();
      p.bias = j.at("bias").get<std::vector<double>>();
      fit.params = p;
    } else if (family == "ewmba") {
      EwmbaParams p;
      p.alpha = j.at("alpha").get<double>();
      p.shape1 = j.at("shape1").get<double>();
      p.shape2 = j.at("shape2").get<double>();
      p.weights = j.at("weights").get<std::vector<double>>();
      fit.params = p;
    } else {
      throw io_error(path.string() + ": unknown baseline family `" + family + "`");
    }
    return fit;
  } catch (const nlohmann::json::exception& e) {
    throw io_error(path.string() + ": malformed baseline parameter record: " + e.what());
  }
}

}  // namespace crowdbelief
