#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "crowdbelief/calibrate.hpp"
#include "crowdbelief/domain.hpp"

namespace crowdbelief {

/// A pluggable aggregation method for the evaluation harness. `fit` may be a
/// no-op; `aggregate` must be causal: entry t-1 of the returned path may
/// depend only on the panel's first t days, and the panel's outcome is never
/// present (the harness strips it).
class Method {
 public:
  struct Aggregate {
    std::vector<double> prob;            // one entry per day
    std::vector<double> lo95, hi95;      // empty when not provided
  };

  virtual ~Method() = default;
  virtual std::string name() const = 0;
  virtual void fit(const Dataset& training, std::uint64_t seed) = 0;
  virtual Aggregate aggregate(const QuestionPanel& panel, std::uint64_t seed) const = 0;
};

/// Knobs shared by the model-based methods.
struct MethodConfig {
  GibbsConfig training = GibbsConfig::training_defaults();
  GibbsConfig aggregation = GibbsConfig::aggregation_defaults();
  double bsac_outcome_weight = 1.0;
  int bsac_pilot_iterations = 200;
  int baseline_restarts = 10;
  int threads = 1;
};

/// Known names: sdlm, sac-bri, sac-log, bsac-log, ewma, ewmla, ewmba,
/// const05 (fixed 0.5 reference).
std::unique_ptr<Method> make_method(const std::string& name, const MethodConfig& config = {});

std::vector<std::string> known_method_names();

}  // namespace crowdbelief
