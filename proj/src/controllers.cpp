#include "marvel/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "marvel/reward.hpp"
#include "marvel/units.hpp"
#include "marvel/vsl_env.hpp"

namespace marvel::control {

std::vector<double> NoControl::decide(const ControlContext& ctx) {
  return std::vector<double>(ctx.agent_gantries.size(), 70.0);
}

std::unique_ptr<Controller> NoControl::clone() const { return std::make_unique<NoControl>(); }

void SpeedMatchConfig::validate() const {
  if (!(release_speed > trigger_speed)) {
    throw ValidationError("release_speed must exceed trigger_speed");
  }
  if (persistence < 1 || release_persistence < 1) {
    throw ValidationError("persistence windows must be >= 1");
  }
  if (min_limit != 30.0 || max_limit != 70.0) {
    throw ValidationError("speed-matching bounds are fixed at [30, 70]");
  }
  if (!(distance_limit >= 0.0) || !(step_increment > 0.0)) {
    throw ValidationError("distance_limit must be >= 0 and step_increment > 0");
  }
}

SpeedMatching::SpeedMatching(SpeedMatchConfig config) : config_(config) { config_.validate(); }

void SpeedMatching::reset() { state_.clear(); }

std::unique_ptr<Controller> SpeedMatching::clone() const {
  return std::make_unique<SpeedMatching>(config_);
}

std::vector<double> SpeedMatching::decide(const ControlContext& ctx) {
  const std::size_t n = ctx.agent_gantries.size();
  if (state_.size() != n) state_.assign(n, AgentState{});
  std::vector<double> limits(n, config_.max_limit);
  for (std::size_t i = 0; i < n; ++i) {
    const int g = ctx.agent_gantries[i];
    const double here = ctx.gantry_milepoints[g];
    // Readings from this gantry down to distance_limit downstream.
    double slowest = sensing::kEmptyWindowSpeedMph;
    bool violated = false;
    bool all_clear = true;
    for (std::size_t k = 0; k < ctx.readings.size(); ++k) {
      const double mp = ctx.gantry_milepoints[k];
      if (mp > here + 1e-9 || mp < here - config_.distance_limit - 1e-9) continue;
      const auto& r = ctx.readings[k];
      slowest = std::min(slowest, r.mean_speed_mph);
      if (r.mean_speed_mph < config_.trigger_speed || r.occupancy > config_.trigger_occ) {
        violated = true;
      }
      if (r.mean_speed_mph < config_.release_speed) all_clear = false;
    }
    AgentState& s = state_[i];
    if (!s.active) {
      s.violations = violated ? s.violations + 1 : 0;
      if (s.violations >= config_.persistence) {
        s.active = true;
        s.clear = 0;
      }
    } else {
      s.clear = all_clear ? s.clear + 1 : 0;
      if (s.clear >= config_.release_persistence) {
        s.active = false;
        s.violations = 0;
      }
    }
    if (s.active) {
      const double rounded = 10.0 * std::round(slowest / 10.0);
      limits[i] = std::clamp(rounded, config_.min_limit, config_.max_limit);
    }
  }
  for (std::size_t i = 1; i < n; ++i) {
    limits[i] = std::min(limits[i], limits[i - 1] + config_.step_increment);
  }
  return limits;
}

std::vector<bool> invalid_action_mask(double prev_action_mph, bool most_downstream,
                                      double a_diff) {
  std::vector<bool> valid(env::kNumActions, true);
  if (most_downstream) return valid;
  for (int k = 0; k < env::kNumActions; ++k) {
    valid[k] = !(env::action_value(k) > prev_action_mph + a_diff);
  }
  return valid;
}

int argmax(std::span<const double> probs) {
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

int sample_action(std::span<const double> probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  double c = 0.0;
  int last_valid = -1;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (probs[k] <= 0.0) continue;
    last_valid = static_cast<int>(k);
    c += probs[k];
    if (x < c) return last_valid;
  }
  if (last_valid < 0) throw std::invalid_argument("no action has positive probability");
  return last_valid;
}

bool satisfies_stepdown(std::span<const double> limits, double a_diff) {
  for (std::size_t i = 1; i < limits.size(); ++i) {
    if (limits[i] > limits[i - 1] + a_diff) return false;
  }
  return true;
}

PolicyController::PolicyController(nn::Mlp actor, bool masking, PolicyMode mode,
                                   std::uint64_t seed, std::string label)
    : actor_(std::move(actor)),
      masking_(masking),
      mode_(mode),
      seed_(seed),
      label_(std::move(label)),
      rng_(seed) {
  if (actor_.input_dim() != env::kObsDim || actor_.output_dim() != env::kNumActions) {
    throw ValidationError("policy network must map 5 inputs to 5 actions");
  }
}

std::unique_ptr<Controller> PolicyController::clone() const {
  return std::make_unique<PolicyController>(actor_, masking_, mode_, seed_, label_);
}

std::vector<double> PolicyController::action_probs(std::span<const double> obs,
                                                   double prev_action_mph,
                                                   bool most_downstream) const {
  if (!masking_) return nn::forward_policy(actor_, obs).probs;
  const std::vector<bool> mask = invalid_action_mask(prev_action_mph, most_downstream);
  return nn::forward_policy(actor_, obs, &mask).probs;
}

std::vector<double> PolicyController::decide(const ControlContext& ctx) {
  const std::size_t n = ctx.agent_gantries.size();
  std::vector<double> limits(n);
  double prev = env::kDefaultPrevActionMph;
  for (std::size_t i = 0; i < n; ++i) {
    const int g = ctx.agent_gantries[i];
    const int up = g + 1 < static_cast<int>(ctx.readings.size()) ? g + 1 : g;
    const env::ObsVector obs =
        env::build_observation(prev, ctx.readings[g], ctx.readings[up]).normalized();
    const std::vector<double> p = action_probs(obs, prev, i == 0);
    const int a = mode_ == PolicyMode::kArgmax ? argmax(p) : sample_action(p, rng_);
    limits[i] = env::action_value(a);
    prev = limits[i];
  }
  return limits;
}

}  // namespace marvel::control
