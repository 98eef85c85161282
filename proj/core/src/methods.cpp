#include "crowdbelief/methods.hpp"

#include <stdexcept>

#include "crowdbelief/baselines.hpp"
#include "crowdbelief/rng.hpp"

namespace crowdbelief {

namespace {

Method::Aggregate from_sac(const SacAggregate& agg) {
  Method::Aggregate out;
  out.prob = agg.mean_prob;
  out.lo95 = agg.lo95;
  out.hi95 = agg.hi95;
  return out;
}

/// Sample-And-Calibrate: trains the constrained chain, calibrates every
/// retained draw, and conditions out-of-sample runs on the (b, beta) pairs.
class SacMethod final : public Method {
 public:
  SacMethod(ScoringRule rule, const MethodConfig& config) : rule_(rule), config_(config) {}

  std::string name() const override {
    return rule_ == ScoringRule::kBrier ? "sac-bri" : "sac-log";
  }

  void fit(const Dataset& training, std::uint64_t seed) override {
    GibbsConfig gc = config_.training;
    gc.seed = seed;
    gc.threads = config_.threads;
    auto chain = sample_posterior(training, gc);
    std::vector<int> outcomes;
    outcomes.reserve(training.panels.size());
    for (const auto& p : training.panels) {
      if (!p.outcome) {
        throw std::invalid_argument("sac training: question " + p.question_id +
                                    " has no outcome");
      }
      outcomes.push_back(*p.outcome);
    }
    calibrate_draws(chain, outcomes, rule_);
    pairs_ = trained_pairs(chain);
  }

  Aggregate aggregate(const QuestionPanel& panel, std::uint64_t seed) const override {
    GibbsConfig gc = config_.aggregation;
    gc.seed = seed;
    gc.threads = config_.threads;
    return from_sac(sac_out_of_sample(panel, pairs_, gc));
  }

 private:
  ScoringRule rule_;
  MethodConfig config_;
  std::vector<TrainedPair> pairs_;
};

/// Plain smoothing model: loadings pinned to one, no training, unit scale.
class SdlmMethod final : public Method {
 public:
  explicit SdlmMethod(const MethodConfig& config) : config_(config) {
    TrainedPair unit;
    unit.bias.assign(8, 1.0);  // covers any group index the data can carry
    unit.beta = 1.0;
    pairs_ = {unit};
  }

  std::string name() const override { return "sdlm"; }
  void fit(const Dataset&, std::uint64_t) override {}

  Aggregate aggregate(const QuestionPanel& panel, std::uint64_t seed) const override {
    GibbsConfig gc = config_.aggregation;
    gc.seed = seed;
    gc.threads = config_.threads;
    gc.pin_all_biases = true;
    return from_sac(sac_out_of_sample(panel, pairs_, gc));
  }

 private:
  MethodConfig config_;
  std::vector<TrainedPair> pairs_;
};

/// Fully Bayesian variant for training; test questions have no outcome, so
/// aggregation conditions on the trained (b, beta) pairs like SAC.
class BsacMethod final : public Method {
 public:
  explicit BsacMethod(const MethodConfig& config) : config_(config) {}

  std::string name() const override { return "bsac-log"; }

  void fit(const Dataset& training, std::uint64_t seed) override {
    BsacConfig bc;
    bc.gibbs = config_.training;
    bc.gibbs.seed = seed;
    bc.gibbs.threads = config_.threads;
    bc.outcome_weight = config_.bsac_outcome_weight;
    bc.pilot_iterations = config_.bsac_pilot_iterations;
    const BsacResult result = bsac_sample(training, bc);
    pairs_ = trained_pairs(result.draws);
  }

  Aggregate aggregate(const QuestionPanel& panel, std::uint64_t seed) const override {
    GibbsConfig gc = config_.aggregation;
    gc.seed = seed;
    gc.threads = config_.threads;
    return from_sac(sac_out_of_sample(panel, pairs_, gc));
  }

 private:
  MethodConfig config_;
  std::vector<TrainedPair> pairs_;
};

class BaselineMethod final : public Method {
 public:
  BaselineMethod(BaselineFamily family, const MethodConfig& config)
      : family_(family), config_(config) {
    // Usable without fitting: family defaults (alpha 1, uniform weights).
  }

  std::string name() const override { return to_string(family_); }

  void fit(const Dataset& training, std::uint64_t seed) override {
    fit_ = fit_baseline(training, family_, seed, config_.baseline_restarts);
  }

  Aggregate aggregate(const QuestionPanel& panel, std::uint64_t) const override {
    Aggregate out;
    if (fit_) {
      out.prob = baseline_path(panel, fit_->params);
      return out;
    }
    BaselineParams defaults;
    const std::vector<double> uniform(8, 1.0 / 8.0);
    switch (family_) {
      case BaselineFamily::kEwma:
        defaults = EwmaParams{1.0, uniform};
        break;
      case BaselineFamily::kEwmla:
        defaults = EwmlaParams{1.0, std::vector<double>(8, 1.0)};
        break;
      case BaselineFamily::kEwmba:
        defaults = EwmbaParams{1.0, 1.0, 1.0, uniform};
        break;
    }
    out.prob = baseline_path(panel, defaults);
    return out;
  }

  const std::optional<BaselineFitResult>& fitted() const { return fit_; }

 private:
  BaselineFamily family_;
  MethodConfig config_;
  std::optional<BaselineFitResult> fit_;
};

class ConstantMethod final : public Method {
 public:
  std::string name() const override { return "const05"; }
  void fit(const Dataset&, std::uint64_t) override {}
  Aggregate aggregate(const QuestionPanel& panel, std::uint64_t) const override {
    Aggregate out;
    out.prob.assign(static_cast<std::size_t>(panel.horizon), 0.5);
    return out;
  }
};

}  // namespace

std::unique_ptr<Method> make_method(const std::string& name, const MethodConfig& config) {
  if (name == "sac-bri") return std::make_unique<SacMethod>(ScoringRule::kBrier, config);
  if (name == "sac-log") return std::make_unique<SacMethod>(ScoringRule::kLogarithmic, config);
  if (name == "sdlm") return std::make_unique<SdlmMethod>(config);
  if (name == "bsac-log") return std::make_unique<BsacMethod>(config);
  if (name == "ewma") return std::make_unique<BaselineMethod>(BaselineFamily::kEwma, config);
  if (name == "ewmla") return std::make_unique<BaselineMethod>(BaselineFamily::kEwmla, config);
  if (name == "ewmba") return std::make_unique<BaselineMethod>(BaselineFamily::kEwmba, config);
  if (name == "const05") return std::make_unique<ConstantMethod>();
  throw std::invalid_argument("unknown method `" + name + "`");
}

std::vector<std::string> known_method_names() {
  return {"sdlm", "sac-bri", "sac-log", "bsac-log", "ewma", "ewmla", "ewmba", "const05"};
}

}  // namespace crowdbelief
