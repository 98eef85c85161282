#include "crowdbelief/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "crowdbelief/csv.hpp"
#include "crowdbelief/errors.hpp"
#include "crowdbelief/numeric.hpp"
#include "crowdbelief/parallel.hpp"
#include "crowdbelief/rng.hpp"

namespace crowdbelief {

FoldPlan make_folds(const Dataset& dataset, int n, std::uint64_t seed) {
  const std::size_t k = dataset.panels.size();
  if (n < 1 || static_cast<std::size_t>(n) > k) {
    throw std::invalid_argument("make_folds: need 1 <= n <= number of questions");
  }

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  // Seeded shuffle, then a stable sort by descending horizon: the shuffle
  // only decides ties.
  Rng rng(seed);
  for (std::size_t i = k; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
    std::swap(order[i - 1], order[std::min(j, i - 1)]);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dataset.panels[a].horizon > dataset.panels[b].horizon;
  });

  const std::size_t floor_count = k / static_cast<std::size_t>(n);
  const std::size_t ceil_count = floor_count + (k % static_cast<std::size_t>(n) != 0 ? 1 : 0);
  FoldPlan plan;
  plan.n_folds = n;
  plan.folds.resize(static_cast<std::size_t>(n));
  std::vector<long long> day_total(static_cast<std::size_t>(n), 0);

  std::size_t remaining = k;
  for (std::size_t qi : order) {
    // Lightest fold wins, subject to keeping the final counts within one of
    // each other: never exceed the ceiling, and never leave fewer questions
    // than the other folds still need to reach the floor.
    long long best_total = 0;
    int best_fold = -1;
    for (int f = 0; f < n; ++f) {
      const auto& fold = plan.folds[static_cast<std::size_t>(f)];
      if (fold.size() >= ceil_count) continue;
      std::size_t still_needed = 0;
      for (int g = 0; g < n; ++g) {
        std::size_t size = plan.folds[static_cast<std::size_t>(g)].size();
        if (g == f) ++size;
        still_needed += size < floor_count ? floor_count - size : 0;
      }
      if (still_needed > remaining - 1) continue;
      if (best_fold < 0 || day_total[static_cast<std::size_t>(f)] < best_total) {
        best_fold = f;
        best_total = day_total[static_cast<std::size_t>(f)];
      }
    }
    plan.folds[static_cast<std::size_t>(best_fold)].push_back(qi);
    day_total[static_cast<std::size_t>(best_fold)] += dataset.panels[qi].horizon;
    --remaining;
  }
  return plan;
}

LengthClass length_class(int horizon) {
  if (horizon <= 30) return LengthClass::kShort;
  if (horizon <= 59) return LengthClass::kMedium;
  return LengthClass::kLong;
}

std::string to_string(LengthClass c) {
  switch (c) {
    case LengthClass::kShort:
      return "short";
    case LengthClass::kMedium:
      return "medium";
    case LengthClass::kLong:
      return "long";
  }
  return "?";
}

EvaluationReport run_cv(const Dataset& dataset, const std::vector<std::string>& method_names,
                        const MethodConfig& method_config, const FoldPlan& plan,
                        std::uint64_t seed, int threads) {
  for (const auto& panel : dataset.panels) {
    if (!panel.outcome) {
      throw std::invalid_argument("run_cv: question " + panel.question_id +
                                  " has no outcome; evaluation requires labels");
    }
  }

  struct FoldResult {
    std::vector<ScoreRecord> scores;
    std::map<std::string, std::vector<std::pair<double, int>>> forecasts;
    std::vector<std::string> annotations;
  };
  std::vector<FoldResult> fold_results(plan.folds.size());

  parallel_for(plan.folds.size(), threads, [&](std::size_t f) {
    FoldResult& result = fold_results[f];
    const auto& test_indices = plan.folds[f];
    std::vector<bool> in_test(dataset.panels.size(), false);
    for (std::size_t qi : test_indices) in_test[qi] = true;

    Dataset training;
    training.groups = dataset.groups;
    for (std::size_t qi = 0; qi < dataset.panels.size(); ++qi) {
      if (!in_test[qi]) training.panels.push_back(dataset.panels[qi]);
    }

    for (std::size_t mi = 0; mi < method_names.size(); ++mi) {
      const auto& name = method_names[mi];
      MethodConfig cfg = method_config;
      cfg.threads = 1;
      auto method = make_method(name, cfg);
      try {
        method->fit(training, Rng::mix(seed, 1000 * (f + 1) + mi));
      } catch (const std::exception& e) {
        result.annotations.push_back("method " + name + " skipped on fold " +
                                     std::to_string(f + 1) + ": " + e.what());
        continue;
      }
      for (std::size_t qi : test_indices) {
        const auto& panel = dataset.panels[qi];
        // The method never sees the outcome.
        QuestionPanel stripped = panel;
        stripped.outcome.reset();
        const auto agg =
            method->aggregate(stripped, Rng::mix(seed, 1'000'000 * (mi + 1) + qi));
        if (agg.prob.size() != static_cast<std::size_t>(panel.horizon)) {
          throw std::runtime_error("run_cv: method " + name +
                                   " returned a path of the wrong length");
        }
        const double z = static_cast<double>(*panel.outcome);
        for (int day = 2; day <= panel.horizon; ++day) {
          const double p = agg.prob[static_cast<std::size_t>(day - 1)];
          const double err = z - p;
          result.scores.push_back(ScoreRecord{name, panel.question_id, day, err * err});
          result.forecasts[name].emplace_back(p, *panel.outcome);
        }
      }
    }
  });

  EvaluationReport report;
  for (const auto& panel : dataset.panels) {
    report.horizons[panel.question_id] = panel.horizon;
  }
  for (auto& fr : fold_results) {
    for (auto& s : fr.scores) report.scores.push_back(std::move(s));
    for (auto& [name, fos] : fr.forecasts) {
      auto& dst = report.method_forecasts[name];
      dst.insert(dst.end(), fos.begin(), fos.end());
    }
    for (auto& a : fr.annotations) report.annotations.push_back(std::move(a));
  }
  return report;
}

Summary summarize(const EvaluationReport& report, const std::string& method, SummaryMode mode,
                  std::optional<LengthClass> filter) {
  auto matches = [&](const ScoreRecord& s) {
    if (s.method != method) return false;
    if (filter) {
      const int horizon = report.horizons.at(s.question_id);
      if (length_class(horizon) != *filter) return false;
    }
    return true;
  };

  Summary out;
  if (mode == SummaryMode::kByDay) {
    std::vector<double> scores;
    for (const auto& s : report.scores) {
      if (matches(s)) scores.push_back(s.brier);
    }
    if (scores.empty()) {
      throw std::invalid_argument("summarize: no scores match the selection");
    }
    out.mean = mean(scores);
    out.se = sample_sd(scores);
    out.n = scores.size();
    return out;
  }

  std::map<std::string, std::pair<double, std::size_t>> per_question;
  for (const auto& s : report.scores) {
    if (!matches(s)) continue;
    auto& acc = per_question[s.question_id];
    acc.first += s.brier;
    acc.second += 1;
  }
  if (per_question.empty()) {
    throw std::invalid_argument("summarize: no scores match the selection");
  }
  std::vector<double> means;
  means.reserve(per_question.size());
  for (const auto& [qid, acc] : per_question) {
    means.push_back(acc.first / static_cast<double>(acc.second));
  }
  out.mean = mean(means);
  out.se = sample_sd(means);
  out.n = means.size();
  return out;
}

ReliabilityTable reliability(const std::vector<std::pair<double, int>>& forecasts, int bins,
                             int n_boot, double level, std::uint64_t seed) {
  if (forecasts.empty()) {
    throw std::invalid_argument("reliability: empty input");
  }
  if (bins < 1 || static_cast<std::size_t>(bins) > forecasts.size()) {
    throw std::invalid_argument("reliability: need 1 <= bins <= number of forecasts");
  }
  if (!(level > 0.0 && level < 1.0) || n_boot < 1) {
    throw std::invalid_argument("reliability: bad level or bootstrap count");
  }

  std::vector<std::size_t> order(forecasts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return forecasts[a].first < forecasts[b].first;
  });

  // Equal-count bins: sizes differ by at most one.
  const std::size_t n = forecasts.size();
  const auto b = static_cast<std::size_t>(bins);
  std::vector<std::pair<std::size_t, std::size_t>> ranges;  // [begin, end)
  std::size_t begin = 0;
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t size = n / b + (i < n % b ? 1 : 0);
    ranges.emplace_back(begin, begin + size);
    begin += size;
  }

  ReliabilityTable table(b);
  for (std::size_t i = 0; i < b; ++i) {
    auto [lo, hi] = ranges[i];
    double sum_p = 0.0;
    double sum_z = 0.0;
    for (std::size_t r = lo; r < hi; ++r) {
      sum_p += forecasts[order[r]].first;
      sum_z += forecasts[order[r]].second;
    }
    const auto count = static_cast<double>(hi - lo);
    table[i].center = sum_p / count;
    table[i].freq = sum_z / count;
    table[i].count = hi - lo;
  }

  // Null distribution of the per-bin frequencies: outcomes redrawn as
  // Bernoulli of the forecast itself.
  std::vector<std::vector<double>> boot(b, std::vector<double>(static_cast<std::size_t>(n_boot)));
  Rng rng(seed);
  for (int it = 0; it < n_boot; ++it) {
    for (std::size_t i = 0; i < b; ++i) {
      auto [lo, hi] = ranges[i];
      int hits = 0;
      for (std::size_t r = lo; r < hi; ++r) {
        if (rng.uniform() < forecasts[order[r]].first) ++hits;
      }
      boot[i][static_cast<std::size_t>(it)] =
          static_cast<double>(hits) / static_cast<double>(hi - lo);
    }
  }
  const double alpha = (1.0 - level) / static_cast<double>(b);  // Bonferroni across bins
  for (std::size_t i = 0; i < b; ++i) {
    table[i].lo = quantile(boot[i], alpha / 2.0);
    table[i].hi = quantile(boot[i], 1.0 - alpha / 2.0);
  }
  return table;
}

std::map<std::string, double> bias_ordering(const std::vector<std::vector<double>>& bias_draws,
                                            const std::vector<std::vector<int>>& extra_orderings) {
  if (bias_draws.empty()) {
    throw std::invalid_argument("bias_ordering: empty chain");
  }
  const std::size_t j = bias_draws.front().size();
  const auto total = static_cast<double>(bias_draws.size());

  auto fraction = [&](auto&& pred) {
    std::size_t hits = 0;
    for (const auto& d : bias_draws) {
      if (d.size() != j) {
        throw std::invalid_argument("bias_ordering: ragged draws");
      }
      if (pred(d)) ++hits;
    }
    return static_cast<double>(hits) / total;
  };

  std::map<std::string, double> out;
  for (std::size_t g = 0; g < j; ++g) {
    out["largest_" + std::to_string(g + 1)] = fraction([&](const std::vector<double>& d) {
      for (std::size_t i = 0; i < j; ++i) {
        if (i != g && d[i] >= d[g]) return false;
      }
      return true;
    });
  }
  out["strictly_increasing"] = fraction([&](const std::vector<double>& d) {
    for (std::size_t i = 1; i < j; ++i) {
      if (!(d[i - 1] < d[i])) return false;
    }
    return true;
  });
  out["strictly_decreasing"] = fraction([&](const std::vector<double>& d) {
    for (std::size_t i = 1; i < j; ++i) {
      if (!(d[i - 1] > d[i])) return false;
    }
    return true;
  });
  out["all_below_1"] = fraction([&](const std::vector<double>& d) {
    return std::all_of(d.begin(), d.end(), [](double v) { return v < 1.0; });
  });
  out["all_above_1"] = fraction([&](const std::vector<double>& d) {
    return std::all_of(d.begin(), d.end(), [](double v) { return v > 1.0; });
  });

  for (const auto& perm : extra_orderings) {
    if (perm.size() != j) {
      throw std::invalid_argument("bias_ordering: ordering must name every group once");
    }
    std::string key = "ordering_";
    for (std::size_t i = 0; i < perm.size(); ++i) {
      if (perm[i] < 1 || static_cast<std::size_t>(perm[i]) > j) {
        throw std::invalid_argument("bias_ordering: ordering index out of range");
      }
      if (i) key += '<';
      key += std::to_string(perm[i]);
    }
    out[key] = fraction([&](const std::vector<double>& d) {
      for (std::size_t i = 1; i < perm.size(); ++i) {
        if (!(d[static_cast<std::size_t>(perm[i - 1] - 1)] <
              d[static_cast<std::size_t>(perm[i] - 1)])) {
          return false;
        }
      }
      return true;
    });
  }
  return out;
}

std::vector<GroupQuantiles> bias_quantiles(const std::vector<std::vector<double>>& bias_draws) {
  if (bias_draws.empty()) {
    throw std::invalid_argument("bias_quantiles: empty chain");
  }
  const std::size_t j = bias_draws.front().size();
  std::vector<GroupQuantiles> out(j);
  for (std::size_t g = 0; g < j; ++g) {
    std::vector<double> values;
    values.reserve(bias_draws.size());
    for (const auto& d : bias_draws) values.push_back(d[g]);
    out[g].q025 = quantile(values, 0.025);
    out[g].q25 = quantile(values, 0.25);
    out[g].q50 = quantile(values, 0.50);
    out[g].q75 = quantile(values, 0.75);
    out[g].q975 = quantile(values, 0.975);
  }
  return out;
}

std::vector<QuestionDifficulty> question_difficulty(const CalibrationResult& fit,
                                                    const std::vector<std::string>& question_ids) {
  if (question_ids.size() != fit.obs_var.size()) {
    throw std::invalid_argument("question_difficulty: ids and fit must align");
  }
  std::vector<QuestionDifficulty> out;
  out.reserve(question_ids.size());
  for (std::size_t k = 0; k < question_ids.size(); ++k) {
    out.push_back(QuestionDifficulty{question_ids[k], fit.obs_var[k], fit.state_var[k],
                                     fit.drift[k]});
  }
  return out;
}

void write_scores_csv(const std::filesystem::path& path, const EvaluationReport& report) {
  std::ofstream out(path);
  if (!out) {
    throw io_error("cannot open " + path.string() + " for writing");
  }
  out << "method,question_id,day,brier\n";
  for (const auto& s : report.scores) {
    out << s.method << ',' << s.question_id << ',' << s.day << ',' << format_double(s.brier)
        << '\n';
  }
}

void write_summary_csv(const std::filesystem::path& path, const EvaluationReport& report,
                       const std::vector<std::string>& methods) {
  std::ofstream out(path);
  if (!out) {
    throw io_error("cannot open " + path.string() + " for writing");
  }
  out << "method,mode,class,mean,se\n";
  const std::vector<std::pair<SummaryMode, std::string>> modes = {
      {SummaryMode::kByDay, "by_day"}, {SummaryMode::kByProblem, "by_problem"}};
  const std::vector<std::pair<std::optional<LengthClass>, std::string>> classes = {
      {std::nullopt, "all"},
      {LengthClass::kShort, "short"},
      {LengthClass::kMedium, "medium"},
      {LengthClass::kLong, "long"}};
  for (const auto& method : methods) {
    for (const auto& [mode, mode_name] : modes) {
      for (const auto& [cls, cls_name] : classes) {
        try {
          const Summary s = summarize(report, method, mode, cls);
          out << method << ',' << mode_name << ',' << cls_name << ',' << format_double(s.mean)
              << ',' << format_double(s.se) << '\n';
        } catch (const std::invalid_argument&) {
          // No questions in this class; leave the row out.
        }
      }
    }
  }
}

void write_reliability_csv(const std::filesystem::path& path, const ReliabilityTable& table) {
  std::ofstream out(path);
  if (!out) {
    throw io_error("cannot open " + path.string() + " for writing");
  }
  out << "bin,center,freq,count,lo,hi\n";
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& b = table[i];
    out << (i + 1) << ',' << format_double(b.center) << ',' << format_double(b.freq) << ','
        << b.count << ',' << format_double(b.lo) << ',' << format_double(b.hi) << '\n';
  }
}

}  // namespace crowdbelief
