// Command-line front end: synthetic data generation, model fitting,
// aggregation, balancing, and evaluation as reproducible runs.
//
// Exit codes: 0 success, 2 I/O failure, 3 model or data error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "crowdbelief/baselines.hpp"
#include "crowdbelief/calibrate.hpp"
#include "crowdbelief/csv.hpp"
#include "crowdbelief/domain.hpp"
#include "crowdbelief/errors.hpp"
#include "crowdbelief/eval.hpp"
#include "crowdbelief/gibbs.hpp"
#include "crowdbelief/methods.hpp"
#include "crowdbelief/rng.hpp"
#include "crowdbelief/synth.hpp"

namespace fs = std::filesystem;
using namespace crowdbelief;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 2;
constexpr int kExitModel = 3;

int env_threads() {
  if (const char* v = std::getenv("CROWDBELIEF_THREADS")) {
    try {
      return std::max(1, std::stoi(v));
    } catch (const std::exception&) {
      return 1;
    }
  }
  return 1;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

/// Flat key=value config support: values from --config FILE become extra
/// command-line tokens for every key the user did not pass explicitly, so
/// flags always override the file.
std::vector<std::string> augment_with_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::string config_path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
      break;
    }
  }
  if (config_path.empty()) return args;

  std::ifstream in(config_path);
  if (!in) {
    throw io_error("cannot open config file " + config_path);
  }
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw io_error("config file " + config_path + ": expected key=value, got `" + line + "`");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string flag = "--" + key;
    bool given = false;
    for (const auto& a : args) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) {
        given = true;
        break;
      }
    }
    if (!given) {
      args.push_back(flag);
      args.push_back(value);
    }
  }
  return args;
}

void add_config_option(CLI::App* cmd, std::string& sink) {
  cmd->add_option("--config", sink,
                  "Flat key=value config file; command-line flags override its values");
}

struct CensorFlags {
  double lo = kDefaultCensorLo;
  double hi = kDefaultCensorHi;
};

void add_censor_flags(CLI::App* cmd, CensorFlags& censor) {
  cmd->add_option("--censor-lo", censor.lo, "Lower censoring bound for raw probabilities");
  cmd->add_option("--censor-hi", censor.hi, "Upper censoring bound for raw probabilities");
}

struct GibbsFlags {
  std::optional<int> iterations;
  std::optional<int> burn_in;
  std::optional<int> thin;
  int ref_group = 0;
  double prior_exp_obs = 1.0;
  double prior_exp_state = 1.0;
};

void add_gibbs_flags(CLI::App* cmd, GibbsFlags& flags) {
  cmd->add_option("--iterations", flags.iterations, "Sampler iterations");
  cmd->add_option("--burn-in", flags.burn_in, "Burn-in iterations");
  cmd->add_option("--thin", flags.thin, "Keep every thin-th retained draw");
  cmd->add_option("--ref-group", flags.ref_group,
                  "Reference expertise group pinned to 1 (0 = highest group)");
  cmd->add_option("--prior-exp-obs", flags.prior_exp_obs,
                  "Exponent of the observation-variance prior");
  cmd->add_option("--prior-exp-state", flags.prior_exp_state,
                  "Exponent of the state-variance prior");
}

GibbsConfig apply_gibbs_flags(GibbsConfig base, const GibbsFlags& flags, std::uint64_t seed,
                              int threads) {
  if (flags.iterations) base.iterations = *flags.iterations;
  if (flags.burn_in) base.burn_in = *flags.burn_in;
  if (flags.thin) base.thin = *flags.thin;
  base.ref_group = flags.ref_group;
  base.prior_exponent_obs = flags.prior_exp_obs;
  base.prior_exponent_state = flags.prior_exp_state;
  base.seed = seed;
  base.threads = threads;
  return base;
}

Dataset load_dataset(const fs::path& forecasts, const fs::path& outcomes,
                     const CensorFlags& censor) {
  return dataset_from_rows(read_forecast_csv(forecasts), read_outcome_csv(outcomes), censor.lo,
                           censor.hi);
}

std::string cell_dir_name(double sigma2, double beta, int k, int rep) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "cell_s%g_b%g_K%d_r%d", sigma2, beta, k, rep);
  return buf;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string out_dir;
  int horizon = 101;
  int experts_per_group = 10;
  std::vector<double> sigma2 = {1.0};
  std::vector<double> beta = {1.0};
  std::vector<int> questions = {20};
  int replicates = 1;
  std::uint64_t seed = 0;
};

int run_synth(const SynthArgs& args) {
  fs::create_directories(args.out_dir);
  const bool single_cell = args.sigma2.size() == 1 && args.beta.size() == 1 &&
                           args.questions.size() == 1 && args.replicates == 1;
  int cells = 0;
  for (std::size_t si = 0; si < args.sigma2.size(); ++si) {
    for (std::size_t bi = 0; bi < args.beta.size(); ++bi) {
      for (std::size_t ki = 0; ki < args.questions.size(); ++ki) {
        for (int r = 0; r < args.replicates; ++r) {
          std::uint64_t s = Rng::mix(args.seed, si + 1);
          s = Rng::mix(s, bi + 1);
          s = Rng::mix(s, ki + 1);
          s = Rng::mix(s, static_cast<std::uint64_t>(r) + 1);

          SynthConfig config;
          config.horizon = args.horizon;
          config.experts_per_group = args.experts_per_group;
          config.obs_var = args.sigma2[si];
          config.beta = args.beta[bi];
          config.questions = args.questions[ki];
          config.seed = s;
          const SynthDataset data = generate_dataset(config);

          fs::path dir = args.out_dir;
          if (!single_cell) {
            dir /= cell_dir_name(config.obs_var, config.beta, config.questions, r);
            fs::create_directories(dir);
          }
          write_forecast_csv(dir / "forecasts.csv", to_forecast_rows(data.dataset));
          write_outcome_csv(dir / "outcomes.csv", to_outcome_rows(data.dataset));
          write_truth_csv(dir / "truth.csv", to_truth_rows(data.dataset, data.truths));
          ++cells;
        }
      }
    }
  }
  std::cout << "synth: wrote " << cells << (cells == 1 ? " cell" : " cells") << " under "
            << args.out_dir << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  std::string forecasts;
  std::string outcomes;
  std::string out_dir;
  std::string model = "sac";
  std::string rule = "log";
  bool do_balance = false;
  CensorFlags censor;
  GibbsFlags gibbs;
  double bsac_outcome_weight = 1.0;
  int bsac_pilot = 200;
  int restarts = 10;
  std::uint64_t seed = 0;
  int threads = 1;
};

int run_fit(const FitArgs& args) {
  fs::create_directories(args.out_dir);
  Dataset dataset = load_dataset(args.forecasts, args.outcomes, args.censor);
  if (args.do_balance) {
    dataset = balance(dataset).first;
  }
  std::vector<int> outcomes;
  std::vector<std::string> ids;
  bool outcomes_known = true;
  for (const auto& p : dataset.panels) {
    ids.push_back(p.question_id);
    if (p.outcome) {
      outcomes.push_back(*p.outcome);
    } else {
      outcomes_known = false;
    }
  }
  const fs::path out_dir = args.out_dir;

  if (args.model == "ewma" || args.model == "ewmla" || args.model == "ewmba") {
    const auto family = baseline_family_from_string(args.model);
    const auto fit = fit_baseline(dataset, family, args.seed, args.restarts);
    const fs::path params_path = out_dir / ("params_" + args.model + ".json");
    write_baseline_params(params_path, fit);
    std::cout << "fit: " << args.model << " objective " << fit.objective << ", params written to "
              << params_path << "\n";
    return kExitOk;
  }

  const ScoringRule rule = scoring_rule_from_string(args.rule);
  ChainFile chain_file;
  chain_file.question_ids = ids;
  chain_file.groups = dataset.groups;

  if (args.model == "sdlm") {
    GibbsConfig gc = apply_gibbs_flags(GibbsConfig::aggregation_defaults(), args.gibbs, args.seed,
                                       args.threads);
    gc.pin_all_biases = true;
    auto chain = sample_posterior(dataset, gc);
    for (auto& d : chain) d.beta = 1.0;  // the plain model fixes the scale
    chain_file.ref_group = 0;
    chain_file.draws = std::move(chain);
    write_chain(out_dir / "chain.jsonl", chain_file);
    std::cout << "fit: sdlm chain of " << chain_file.draws.size() << " draws written to "
              << (out_dir / "chain.jsonl") << "\n";
    return kExitOk;
  }

  if (!outcomes_known) {
    throw std::invalid_argument("fit: every question needs an outcome for model " + args.model);
  }

  if (args.model == "bsac") {
    BsacConfig bc;
    bc.gibbs = apply_gibbs_flags(GibbsConfig::training_defaults(), args.gibbs, args.seed,
                                 args.threads);
    bc.outcome_weight = args.bsac_outcome_weight;
    bc.pilot_iterations = args.bsac_pilot;
    const BsacResult result = bsac_sample(dataset, bc);
    chain_file.ref_group = bc.gibbs.ref_group == 0 ? dataset.groups : bc.gibbs.ref_group;
    chain_file.draws = result.draws;
    write_chain(out_dir / "chain.jsonl", chain_file);
    std::cout << "fit: bsac chain of " << result.draws.size() << " draws written to "
              << (out_dir / "chain.jsonl") << " (state acceptance "
              << result.state_accept_rate << ", beta acceptance " << result.beta_accept_rate
              << ")\n";
    return kExitOk;
  }

  if (args.model != "sac") {
    throw std::invalid_argument("fit: unknown model `" + args.model + "`");
  }

  GibbsConfig gc = apply_gibbs_flags(GibbsConfig::training_defaults(), args.gibbs, args.seed,
                                     args.threads);
  auto chain = sample_posterior(dataset, gc);
  const CalibrationReport report = calibrate_chain(chain, outcomes, rule);
  calibrate_draws(chain, outcomes, rule);
  chain_file.ref_group = gc.ref_group == 0 ? dataset.groups : gc.ref_group;
  chain_file.draws = std::move(chain);
  write_chain(out_dir / "chain.jsonl", chain_file);
  write_calibration_report(out_dir / "calibration.json", report);
  std::cout << "fit: sac chain of " << chain_file.draws.size() << " draws written to "
            << (out_dir / "chain.jsonl") << "; beta = " << report.beta << " (rule "
            << to_string(report.rule) << ")\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// aggregate

struct AggregateArgs {
  std::string forecasts;
  std::string outcomes;
  std::string method = "sac";
  std::string chain_path;
  std::string params_path;
  std::string out = "aggregate.csv";
  CensorFlags censor;
  GibbsFlags gibbs;
  std::optional<double> alpha;
  std::vector<double> omega;
  std::vector<double> bias_exp;
  std::optional<double> nu;
  std::optional<double> shape2;
  std::uint64_t seed = 0;
  int threads = 1;
};

BaselineParams baseline_params_from_args(const AggregateArgs& args, int groups) {
  if (!args.params_path.empty()) {
    return read_baseline_params(args.params_path).params;
  }
  const double alpha = args.alpha.value_or(1.0);
  std::vector<double> omega = args.omega;
  if (omega.empty()) {
    omega.assign(static_cast<std::size_t>(std::max(groups, 1)),
                 1.0 / std::max(groups, 1));
  }
  if (args.method == "ewma") return EwmaParams{alpha, omega};
  if (args.method == "ewmla") {
    std::vector<double> bias = args.bias_exp;
    if (bias.empty()) bias.assign(static_cast<std::size_t>(std::max(groups, 1)), 1.0);
    return EwmlaParams{alpha, bias};
  }
  return EwmbaParams{alpha, args.nu.value_or(1.0), args.shape2.value_or(1.0), omega};
}

int run_aggregate(const AggregateArgs& args) {
  const Dataset dataset = load_dataset(args.forecasts, args.outcomes, args.censor);
  std::vector<AggregateRow> rows;

  const bool model_method =
      args.method == "sac" || args.method == "sdlm" || args.method == "bsac";
  if (model_method) {
    std::vector<TrainedPair> pairs;
    if (args.method == "sdlm") {
      TrainedPair unit;
      unit.bias.assign(static_cast<std::size_t>(std::max(dataset.groups, 1)), 1.0);
      unit.beta = 1.0;
      pairs.push_back(std::move(unit));
    } else {
      if (args.chain_path.empty()) {
        throw std::invalid_argument("aggregate: --chain is required for method " + args.method);
      }
      pairs = trained_pairs(read_chain(args.chain_path).draws);
    }
    GibbsConfig gc = apply_gibbs_flags(GibbsConfig::aggregation_defaults(), args.gibbs, args.seed,
                                       args.threads);
    gc.pin_all_biases = args.method == "sdlm";
    for (std::size_t k = 0; k < dataset.panels.size(); ++k) {
      GibbsConfig panel_cfg = gc;
      panel_cfg.seed = Rng::mix(args.seed, k + 1);
      const SacAggregate agg = sac_out_of_sample(dataset.panels[k], pairs, panel_cfg);
      for (int day = 1; day <= dataset.panels[k].horizon; ++day) {
        const auto t = static_cast<std::size_t>(day - 1);
        rows.push_back(AggregateRow{dataset.panels[k].question_id, day, agg.mean_prob[t],
                                    agg.lo95[t], agg.hi95[t]});
      }
    }
  } else if (args.method == "ewma" || args.method == "ewmla" || args.method == "ewmba") {
    const BaselineParams params = baseline_params_from_args(args, dataset.groups);
    for (const auto& panel : dataset.panels) {
      const auto path = baseline_path(panel, params);
      for (int day = 1; day <= panel.horizon; ++day) {
        rows.push_back(AggregateRow{panel.question_id, day,
                                    path[static_cast<std::size_t>(day - 1)], std::nullopt,
                                    std::nullopt});
      }
    }
  } else {
    throw std::invalid_argument("aggregate: unknown method `" + args.method + "`");
  }

  write_aggregate_csv(args.out, rows);
  std::cout << "aggregate: " << rows.size() << " rows written to " << args.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string forecasts;
  std::string outcomes;
  std::string out_dir;
  std::vector<std::string> methods = {"sac-log", "ewma"};
  int folds = 10;
  int bins = 10;
  int boot = 10000;
  CensorFlags censor;
  GibbsFlags train_gibbs;
  std::optional<int> agg_iterations;
  std::optional<int> agg_burn_in;
  std::optional<int> agg_thin;
  std::uint64_t seed = 0;
  int threads = 1;
};

void print_summary_table(std::ostream& os, const EvaluationReport& report,
                         const std::vector<std::string>& methods) {
  const std::vector<std::pair<SummaryMode, std::string>> modes = {
      {SummaryMode::kByDay, "Scores by day"}, {SummaryMode::kByProblem, "Scores by problem"}};
  const std::vector<std::pair<std::optional<LengthClass>, std::string>> classes = {
      {std::nullopt, "All"},
      {LengthClass::kShort, "Short"},
      {LengthClass::kMedium, "Medium"},
      {LengthClass::kLong, "Long"}};
  for (const auto& [mode, title] : modes) {
    os << title << "\n";
    os << "  method     ";
    for (const auto& [cls, name] : classes) os << "  " << name;
    os << "\n";
    for (const auto& method : methods) {
      os << "  " << method;
      for (std::size_t pad = method.size(); pad < 9; ++pad) os << ' ';
      for (const auto& [cls, name] : classes) {
        try {
          const Summary s = summarize(report, method, mode, cls);
          char buf[48];
          std::snprintf(buf, sizeof(buf), "  %.3f (%.3f)", s.mean, s.se);
          os << buf;
        } catch (const std::invalid_argument&) {
          os << "  -";
        }
      }
      os << "\n";
    }
  }
  for (const auto& a : report.annotations) os << "warning: " << a << "\n";
}

int run_evaluate(const EvaluateArgs& args) {
  fs::create_directories(args.out_dir);
  const Dataset dataset = load_dataset(args.forecasts, args.outcomes, args.censor);

  MethodConfig mc;
  mc.training = apply_gibbs_flags(GibbsConfig::training_defaults(), args.train_gibbs, 0, 1);
  mc.aggregation = GibbsConfig::aggregation_defaults();
  if (args.agg_iterations) mc.aggregation.iterations = *args.agg_iterations;
  if (args.agg_burn_in) mc.aggregation.burn_in = *args.agg_burn_in;
  if (args.agg_thin) mc.aggregation.thin = *args.agg_thin;

  const FoldPlan plan = make_folds(dataset, args.folds, args.seed);
  const EvaluationReport report =
      run_cv(dataset, args.methods, mc, plan, args.seed, args.threads);

  const fs::path out_dir = args.out_dir;
  write_scores_csv(out_dir / "scores.csv", report);
  write_summary_csv(out_dir / "summary.csv", report, args.methods);
  for (const auto& method : args.methods) {
    const auto it = report.method_forecasts.find(method);
    if (it == report.method_forecasts.end() || it->second.empty()) continue;
    const auto table = reliability(it->second, args.bins, args.boot, 0.95,
                                   Rng::mix(args.seed, 0xbadbeef));
    write_reliability_csv(out_dir / ("reliability_" + method + ".csv"), table);
  }

  std::ofstream txt(out_dir / "summary.txt");
  print_summary_table(txt, report, args.methods);
  print_summary_table(std::cout, report, args.methods);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// balance

struct BalanceArgs {
  std::string forecasts;
  std::string outcomes;
  std::string out_dir;
  CensorFlags censor;
};

int run_balance(const BalanceArgs& args) {
  fs::create_directories(args.out_dir);
  const auto forecast_rows = read_forecast_csv(args.forecasts);
  const auto outcome_rows = read_outcome_csv(args.outcomes);
  const Dataset dataset =
      dataset_from_rows(forecast_rows, outcome_rows, args.censor.lo, args.censor.hi);
  const auto [balanced, part] = balance(dataset);

  std::map<std::string, std::pair<bool, int>> status;  // id -> (flipped, new label)
  for (std::size_t k = 0; k < balanced.panels.size(); ++k) {
    status[balanced.panels[k].question_id] = {part.flipped[k], *balanced.panels[k].outcome};
  }

  auto out_forecasts = forecast_rows;
  for (auto& r : out_forecasts) {
    if (status.at(r.question_id).first) r.prob = 1.0 - r.prob;
  }
  auto out_outcomes = outcome_rows;
  for (auto& r : out_outcomes) {
    r.outcome = status.at(r.question_id).second;
  }
  write_forecast_csv(fs::path(args.out_dir) / "forecasts.csv", out_forecasts);
  write_outcome_csv(fs::path(args.out_dir) / "outcomes.csv", out_outcomes);

  std::ofstream pcsv(fs::path(args.out_dir) / "partition.csv");
  if (!pcsv) {
    throw io_error("cannot open partition.csv for writing");
  }
  pcsv << "question_id,side,flipped\n";
  auto emit_side = [&](const std::vector<std::size_t>& side, int label) {
    for (std::size_t k : side) {
      pcsv << dataset.panels[k].question_id << ',' << label << ','
           << (part.flipped[k] ? 1 : 0) << '\n';
    }
  };
  emit_side(part.side0, 0);
  emit_side(part.side1, 1);

  std::cout << "balance: sides " << part.side0.size() << "/" << part.side1.size()
            << ", day totals " << part.day_total0 << "/" << part.day_total1 << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report-calibration

struct ReportCalArgs {
  std::string chain_path;
  std::string outcomes;
  std::string rule = "log";
  std::string out = "calibration.json";
};

int run_report_calibration(const ReportCalArgs& args) {
  const ChainFile chain = read_chain(args.chain_path);
  const auto outcome_rows = read_outcome_csv(args.outcomes);
  std::map<std::string, int> by_id;
  for (const auto& r : outcome_rows) {
    if (r.outcome) by_id[r.question_id] = *r.outcome;
  }
  std::vector<int> outcomes;
  for (const auto& id : chain.question_ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw std::invalid_argument("report-calibration: no outcome for question " + id);
    }
    outcomes.push_back(it->second);
  }
  const CalibrationReport report =
      calibrate_chain(chain.draws, outcomes, scoring_rule_from_string(args.rule));
  write_calibration_report(args.out, report);
  std::cout << "report-calibration: beta = " << report.beta << ", objective = "
            << report.objective << " (rule " << to_string(report.rule) << "), written to "
            << args.out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crowd-belief estimation from sparse expert probability forecasts"};
  app.require_subcommand(1);

  int threads = env_threads();
  app.add_option("--threads", threads,
                 "Worker threads (default 1 or CROWDBELIEF_THREADS); results are identical "
                 "for any thread count");

  // Seeds are stored per command and checked after parsing: stochastic
  // commands refuse to run without one.
  SynthArgs synth_args;
  FitArgs fit_args;
  AggregateArgs agg_args;
  EvaluateArgs eval_args;
  BalanceArgs balance_args;
  ReportCalArgs report_args;

  std::string config_sink;
  auto* synth = app.add_subcommand("synth", "Generate synthetic forecast data");
  add_config_option(synth, config_sink);
  synth->add_option("--out-dir", synth_args.out_dir, "Output directory")->required();
  synth->add_option("--T", synth_args.horizon, "Question horizon in days");
  synth->add_option("--experts-per-group", synth_args.experts_per_group, "Experts per group");
  synth->add_option("--sigma2", synth_args.sigma2, "Observation noise grid")->delimiter(',');
  synth->add_option("--beta", synth_args.beta, "Loading scale grid")->delimiter(',');
  synth->add_option("--K", synth_args.questions, "Questions-per-dataset grid")->delimiter(',');
  synth->add_option("--replicates", synth_args.replicates, "Replicates per grid cell");
  auto* synth_seed = synth->add_option("--seed", synth_args.seed, "Master seed");

  auto* fit = app.add_subcommand("fit", "Fit a model and persist chain + calibration");
  add_config_option(fit, config_sink);
  fit->add_option("--forecasts", fit_args.forecasts, "Forecast CSV")->required();
  fit->add_option("--outcomes", fit_args.outcomes, "Outcome CSV")->required();
  fit->add_option("--out-dir", fit_args.out_dir, "Output directory")->required();
  fit->add_option("--model", fit_args.model, "sac | sdlm | bsac | ewma | ewmla | ewmba");
  fit->add_option("--rule", fit_args.rule, "Scoring rule: brier | log");
  fit->add_flag("--balance", fit_args.do_balance, "Balance the data before fitting");
  add_censor_flags(fit, fit_args.censor);
  add_gibbs_flags(fit, fit_args.gibbs);
  fit->add_option("--bsac-outcome-weight", fit_args.bsac_outcome_weight,
                  "Weight of the outcome likelihood (bsac)");
  fit->add_option("--bsac-pilot", fit_args.bsac_pilot, "Step-tuning iterations (bsac)");
  fit->add_option("--restarts", fit_args.restarts, "Random restarts for baseline fits");
  auto* fit_seed = fit->add_option("--seed", fit_args.seed, "Master seed");

  auto* agg = app.add_subcommand("aggregate", "Emit per-day aggregate probabilities");
  add_config_option(agg, config_sink);
  agg->add_option("--forecasts", agg_args.forecasts, "Forecast CSV")->required();
  agg->add_option("--outcomes", agg_args.outcomes, "Outcome CSV (horizons; outcomes unused)")
      ->required();
  agg->add_option("--method", agg_args.method, "sac | sdlm | bsac | ewma | ewmla | ewmba");
  agg->add_option("--chain", agg_args.chain_path, "Training chain (sac | bsac)");
  agg->add_option("--params", agg_args.params_path, "Fitted baseline parameter JSON");
  agg->add_option("--out", agg_args.out, "Output CSV path");
  add_censor_flags(agg, agg_args.censor);
  add_gibbs_flags(agg, agg_args.gibbs);
  agg->add_option("--alpha", agg_args.alpha, "Baseline smoothing weight");
  agg->add_option("--omega", agg_args.omega, "Baseline group weights")->delimiter(',');
  agg->add_option("--bias-exp", agg_args.bias_exp, "ewmla group exponents")->delimiter(',');
  agg->add_option("--nu", agg_args.nu, "ewmba first shape");
  agg->add_option("--shape2", agg_args.shape2, "ewmba second shape");
  auto* agg_seed = agg->add_option("--seed", agg_args.seed, "Master seed");

  auto* eval = app.add_subcommand("evaluate", "Cross-validated evaluation report");
  add_config_option(eval, config_sink);
  eval->add_option("--forecasts", eval_args.forecasts, "Forecast CSV")->required();
  eval->add_option("--outcomes", eval_args.outcomes, "Outcome CSV")->required();
  eval->add_option("--out-dir", eval_args.out_dir, "Output directory")->required();
  eval->add_option("--methods", eval_args.methods, "Methods to evaluate")->delimiter(',');
  eval->add_option("--folds", eval_args.folds, "Cross-validation folds");
  eval->add_option("--bins", eval_args.bins, "Reliability bins");
  eval->add_option("--boot", eval_args.boot, "Bootstrap iterations");
  add_censor_flags(eval, eval_args.censor);
  add_gibbs_flags(eval, eval_args.train_gibbs);
  eval->add_option("--agg-iterations", eval_args.agg_iterations, "Aggregation iterations");
  eval->add_option("--agg-burn-in", eval_args.agg_burn_in, "Aggregation burn-in");
  eval->add_option("--agg-thin", eval_args.agg_thin, "Aggregation thinning");
  auto* eval_seed = eval->add_option("--seed", eval_args.seed, "Master seed");

  auto* bal = app.add_subcommand("balance", "Mirror questions into label-balanced halves");
  add_config_option(bal, config_sink);
  bal->add_option("--forecasts", balance_args.forecasts, "Forecast CSV")->required();
  bal->add_option("--outcomes", balance_args.outcomes, "Outcome CSV")->required();
  bal->add_option("--out-dir", balance_args.out_dir, "Output directory")->required();
  add_censor_flags(bal, balance_args.censor);

  auto* rep = app.add_subcommand("report-calibration", "Recompute the calibration report");
  add_config_option(rep, config_sink);
  rep->add_option("--chain", report_args.chain_path, "Training chain")->required();
  rep->add_option("--outcomes", report_args.outcomes, "Outcome CSV")->required();
  rep->add_option("--rule", report_args.rule, "Scoring rule: brier | log");
  rep->add_option("--out", report_args.out, "Output JSON path");

  std::vector<std::string> args;
  try {
    args = augment_with_config(argc, argv);
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  // CLI11 consumes tokens back to front.
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (synth->parsed()) {
      if (!*synth_seed) {
        throw std::invalid_argument("synth: refusing to run without --seed");
      }
      return run_synth(synth_args);
    }
    if (fit->parsed()) {
      if (!*fit_seed) {
        throw std::invalid_argument("fit: refusing to run without --seed");
      }
      fit_args.threads = threads;
      return run_fit(fit_args);
    }
    if (agg->parsed()) {
      const bool stochastic = agg_args.method == "sac" || agg_args.method == "sdlm" ||
                              agg_args.method == "bsac";
      if (stochastic && !*agg_seed) {
        throw std::invalid_argument("aggregate: refusing to run method " + agg_args.method +
                                    " without --seed");
      }
      agg_args.threads = threads;
      return run_aggregate(agg_args);
    }
    if (eval->parsed()) {
      if (!*eval_seed) {
        throw std::invalid_argument("evaluate: refusing to run without --seed");
      }
      eval_args.threads = threads;
      return run_evaluate(eval_args);
    }
    if (bal->parsed()) {
      return run_balance(balance_args);
    }
    if (rep->parsed()) {
      return run_report_calibration(report_args);
    }
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const separation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitModel;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitModel;
  }
  return kExitOk;
}
