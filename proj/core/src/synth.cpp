#include "crowdbelief/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "crowdbelief/baselines.hpp"
#include "crowdbelief/calibrate.hpp"
#include "crowdbelief/errors.hpp"
#include "crowdbelief/numeric.hpp"
#include "crowdbelief/parallel.hpp"

namespace crowdbelief {

namespace {

void validate(const SynthConfig& config) {
  if (config.horizon < 2) {
    throw std::invalid_argument("SynthConfig: horizon must be >= 2");
  }
  if (config.experts_per_group < 1 || config.questions < 1) {
    throw std::invalid_argument("SynthConfig: counts must be >= 1");
  }
  if (!(config.obs_var > 0.0)) {
    throw std::invalid_argument("SynthConfig: obs_var must be positive");
  }
}

}  // namespace

SynthTruth generate_truth(int horizon, Rng& rng) {
  if (horizon < 2) {
    throw std::invalid_argument("generate_truth: horizon must be >= 2");
  }
  SynthTruth truth;
  truth.brownian.resize(static_cast<std::size_t>(horizon));
  double z = 0.0;
  for (auto& v : truth.brownian) {
    z += rng.normal();
    v = z;
  }
  truth.hidden.resize(static_cast<std::size_t>(horizon - 1));
  for (int t = 1; t < horizon; ++t) {
    const double scale = std::sqrt(static_cast<double>(horizon - t));
    // Phi saturates in double once the walk is far from zero near
    // resolution; keep the implied probability strictly inside (0, 1).
    const double p = std::clamp(normal_cdf(truth.brownian[static_cast<std::size_t>(t - 1)] / scale),
                                1e-15, 1.0 - 1e-15);
    truth.hidden[static_cast<std::size_t>(t - 1)] = logit(p);
  }
  truth.outcome = truth.brownian.back() > 0.0 ? 1 : 0;
  return truth;
}

std::pair<QuestionPanel, SynthTruth> generate_question(const SynthConfig& config,
                                                       const std::string& question_id, Rng& rng) {
  validate(config);
  SynthTruth truth = generate_truth(config.horizon, rng);
  truth.bias = kSynthBaseBias;
  for (double& b : truth.bias) b *= config.beta;

  QuestionPanel panel;
  panel.question_id = question_id;
  panel.horizon = config.horizon;
  panel.outcome = truth.outcome;
  panel.slices.resize(static_cast<std::size_t>(config.horizon));
  const double noise_sd = std::sqrt(config.obs_var);
  for (int t = 1; t < config.horizon; ++t) {
    auto& slice = panel.slices[static_cast<std::size_t>(t - 1)];
    const double x = truth.hidden[static_cast<std::size_t>(t - 1)];
    for (std::size_t j = 0; j < truth.bias.size(); ++j) {
      for (int e = 0; e < config.experts_per_group; ++e) {
        const double y = truth.bias[j] * x + noise_sd * rng.normal();
        slice.push_back(LogitForecast{y, static_cast<int>(j) + 1});
      }
    }
  }
  return {std::move(panel), std::move(truth)};
}

SynthDataset generate_dataset(const SynthConfig& config) {
  validate(config);
  SynthDataset out;
  out.dataset.groups = static_cast<int>(kSynthBaseBias.size());
  out.dataset.panels.reserve(static_cast<std::size_t>(config.questions));
  out.truths.reserve(static_cast<std::size_t>(config.questions));
  for (int k = 0; k < config.questions; ++k) {
    Rng rng = Rng::child(config.seed, static_cast<std::uint64_t>(k));
    auto [panel, truth] =
        generate_question(config, "q" + std::to_string(k + 1), rng);
    out.dataset.panels.push_back(std::move(panel));
    out.truths.push_back(std::move(truth));
  }
  return out;
}

std::vector<ForecastRow> to_forecast_rows(const Dataset& dataset) {
  std::vector<ForecastRow> rows;
  for (const auto& panel : dataset.panels) {
    for (int day = 1; day <= panel.horizon; ++day) {
      const auto& slice = panel.slices[static_cast<std::size_t>(day - 1)];
      for (std::size_t i = 0; i < slice.size(); ++i) {
        ForecastRow r;
        r.question_id = panel.question_id;
        r.expert_id = "e" + std::to_string(i + 1);
        r.day = day;
        r.prob = inverse_logit(slice[i].y);
        r.expertise = slice[i].group;
        rows.push_back(std::move(r));
      }
    }
  }
  return rows;
}

std::vector<OutcomeRow> to_outcome_rows(const Dataset& dataset) {
  std::vector<OutcomeRow> rows;
  rows.reserve(dataset.panels.size());
  for (const auto& panel : dataset.panels) {
    rows.push_back(OutcomeRow{panel.question_id, panel.horizon, panel.outcome});
  }
  return rows;
}

std::vector<TruthRow> to_truth_rows(const Dataset& dataset, const std::vector<SynthTruth>& truths) {
  if (dataset.panels.size() != truths.size()) {
    throw std::invalid_argument("to_truth_rows: dataset and truths must align");
  }
  std::vector<TruthRow> rows;
  for (std::size_t k = 0; k < truths.size(); ++k) {
    for (std::size_t t = 0; t < truths[k].hidden.size(); ++t) {
      TruthRow r;
      r.question_id = dataset.panels[k].question_id;
      r.day = static_cast<int>(t) + 1;
      r.x_true = truths[k].hidden[t];
      r.p_true = inverse_logit(r.x_true);
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

std::string to_string(StudyMethod method) {
  switch (method) {
    case StudyMethod::kSacBrier:
      return "sac-bri";
    case StudyMethod::kSacLog:
      return "sac-log";
    case StudyMethod::kEwma:
      return "ewma";
    case StudyMethod::kOracle:
      return "oracle";
  }
  return "?";
}

namespace {

struct CellEstimate {
  std::vector<std::vector<double>> prob;  // per question, days 1..T-1
  std::vector<double> bias;               // empty when the method has none
};

double hidden_loss(const SynthDataset& data, const CellEstimate& est, bool quadratic) {
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < data.truths.size(); ++k) {
    const auto& hidden = data.truths[k].hidden;
    for (std::size_t t = 0; t < hidden.size(); ++t) {
      const double diff = inverse_logit(hidden[t]) - est.prob[k][t];
      total += quadratic ? diff * diff : std::fabs(diff);
      ++n;
    }
  }
  return total / static_cast<double>(n);
}

double bias_loss(const SynthDataset& data, const CellEstimate& est, bool quadratic) {
  const auto& truth = data.truths.front().bias;
  double total = 0.0;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    const double diff = truth[j] - est.bias[j];
    total += quadratic ? diff * diff : std::fabs(diff);
  }
  return total / static_cast<double>(truth.size());
}

CellEstimate oracle_estimate(const SynthDataset& data) {
  CellEstimate est;
  est.prob.reserve(data.truths.size());
  for (const auto& truth : data.truths) {
    std::vector<double> p;
    p.reserve(truth.hidden.size());
    for (double x : truth.hidden) p.push_back(inverse_logit(x));
    est.prob.push_back(std::move(p));
  }
  est.bias = data.truths.front().bias;
  return est;
}

CellEstimate ewma_estimate(const SynthDataset& data, std::uint64_t seed) {
  const auto fit = fit_baseline(data.dataset, BaselineFamily::kEwma, seed);
  CellEstimate est;
  est.prob.reserve(data.dataset.panels.size());
  for (const auto& panel : data.dataset.panels) {
    auto path = baseline_path(panel, fit.params);
    path.resize(static_cast<std::size_t>(panel.horizon - 1));
    est.prob.push_back(std::move(path));
  }
  return est;
}

CellEstimate sac_estimate(const ConstrainedDraw& mean_draw, const std::vector<int>& outcomes,
                          ScoringRule rule, int horizon) {
  const double beta = estimate_beta(mean_draw.paths, outcomes, rule);
  const CalibrationResult calibrated = apply_beta(mean_draw, beta);
  CellEstimate est;
  est.prob.reserve(calibrated.paths.size());
  for (const auto& path : calibrated.paths) {
    std::vector<double> p;
    p.reserve(static_cast<std::size_t>(horizon - 1));
    for (int t = 0; t < horizon - 1; ++t) {
      p.push_back(inverse_logit(path.x[static_cast<std::size_t>(t)]));
    }
    est.prob.push_back(std::move(p));
  }
  est.bias = calibrated.bias;
  return est;
}

}  // namespace

std::vector<StudyRow> run_study(const StudyConfig& config) {
  struct Cell {
    double sigma2;
    double beta;
    int questions;
    int replicate;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (std::size_t si = 0; si < config.sigma2_grid.size(); ++si) {
    for (std::size_t bi = 0; bi < config.beta_grid.size(); ++bi) {
      for (std::size_t ki = 0; ki < config.k_grid.size(); ++ki) {
        for (int r = 0; r < config.replicates; ++r) {
          // Seed-splitting rule: successive mixes of the grid indices.
          std::uint64_t s = Rng::mix(config.seed, si + 1);
          s = Rng::mix(s, bi + 1);
          s = Rng::mix(s, ki + 1);
          s = Rng::mix(s, static_cast<std::uint64_t>(r) + 1);
          cells.push_back(Cell{config.sigma2_grid[si], config.beta_grid[bi],
                               config.k_grid[ki], r, s});
        }
      }
    }
  }

  const bool wants_sac =
      std::any_of(config.methods.begin(), config.methods.end(), [](StudyMethod m) {
        return m == StudyMethod::kSacBrier || m == StudyMethod::kSacLog;
      });

  std::vector<std::vector<StudyRow>> per_cell(cells.size());
  parallel_for(cells.size(), config.threads, [&](std::size_t ci) {
    const Cell& cell = cells[ci];
    SynthConfig sc = config.base;
    sc.obs_var = cell.sigma2;
    sc.beta = cell.beta;
    sc.questions = cell.questions;
    sc.seed = cell.seed;
    const SynthDataset data = generate_dataset(sc);

    std::vector<int> outcomes;
    outcomes.reserve(data.dataset.panels.size());
    for (const auto& p : data.dataset.panels) outcomes.push_back(*p.outcome);

    // The sampling step is shared between the two SAC scoring rules.
    ConstrainedDraw mean_draw;
    if (wants_sac) {
      GibbsConfig gc = config.sac;
      gc.threads = 1;
      gc.seed = Rng::mix(cell.seed, 0x5ac);
      mean_draw = posterior_mean(sample_posterior(data.dataset, gc));
    }

    auto emit = [&](StudyMethod method, const CellEstimate& est) {
      auto add = [&](const std::string& quantity, const std::string& loss_type, double value) {
        per_cell[ci].push_back(StudyRow{to_string(method), cell.sigma2, cell.beta,
                                        cell.questions, cell.replicate, quantity, loss_type,
                                        value});
      };
      add("hidden", "quadratic", hidden_loss(data, est, true));
      add("hidden", "absolute", hidden_loss(data, est, false));
      if (!est.bias.empty()) {
        add("bias", "quadratic", bias_loss(data, est, true));
        add("bias", "absolute", bias_loss(data, est, false));
      }
    };

    for (StudyMethod method : config.methods) {
      switch (method) {
        case StudyMethod::kOracle:
          emit(method, oracle_estimate(data));
          break;
        case StudyMethod::kEwma:
          emit(method, ewma_estimate(data, Rng::mix(cell.seed, 0xe33a)));
          break;
        case StudyMethod::kSacBrier:
          emit(method, sac_estimate(mean_draw, outcomes, ScoringRule::kBrier, sc.horizon));
          break;
        case StudyMethod::kSacLog:
          emit(method, sac_estimate(mean_draw, outcomes, ScoringRule::kLogarithmic, sc.horizon));
          break;
      }
    }
  });

  std::vector<StudyRow> rows;
  for (auto& chunk : per_cell) {
    for (auto& row : chunk) rows.push_back(std::move(row));
  }
  return rows;
}

void write_study_csv(const std::filesystem::path& path, const std::vector<StudyRow>& rows) {
  std::ofstream out(path);
  if (!out) {
    throw io_error("cannot open " + path.string() + " for writing");
  }
  out << "method,sigma2,beta,K,replicate,quantity,loss_type,value\n";
  for (const auto& r : rows) {
    out << r.method << ',' << format_double(r.sigma2) << ',' << format_double(r.beta) << ','
        << r.questions << ',' << r.replicate << ',' << r.quantity << ',' << r.loss_type << ','
        << format_double(r.value) << '\n';
  }
}

double study_mean(const std::vector<StudyRow>& rows, const std::string& method,
                  const std::string& quantity, const std::string& loss_type,
                  double beta_filter) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (!method.empty() && r.method != method) continue;
    if (!quantity.empty() && r.quantity != quantity) continue;
    if (!loss_type.empty() && r.loss_type != loss_type) continue;
    if (beta_filter > 0.0 && r.beta != beta_filter) continue;
    total += r.value;
    ++n;
  }
  if (n == 0) {
    throw std::invalid_argument("study_mean: no rows match the filter");
  }
  return total / static_cast<double>(n);
}

}  // namespace crowdbelief
