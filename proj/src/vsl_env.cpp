#include "marvel/vsl_env.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "marvel/units.hpp"

namespace marvel::env {

ObsVector AgentObservation::raw() const {
  return {prev_action_mph, local_speed_mph, local_occ, up_speed_mph, up_occ};
}

ObsVector AgentObservation::normalized() const {
  return {prev_action_mph / kSpeedNorm, local_speed_mph / kSpeedNorm, local_occ,
          up_speed_mph / kSpeedNorm, up_occ};
}

AgentObservation build_observation(double prev_action_mph, const sensing::SensorReading& local,
                                   const sensing::SensorReading& upstream) {
  return AgentObservation{prev_action_mph, local.mean_speed_mph, local.occupancy,
                          upstream.mean_speed_mph, upstream.occupancy};
}

std::vector<double> global_state(std::span<const ObsVector> observations) {
  std::vector<double> out;
  out.reserve(observations.size() * kObsDim);
  for (const auto& o : observations) out.insert(out.end(), o.begin(), o.end());
  return out;
}

std::vector<int> sequential_decide(
    const MultiAgentEnv& env,
    const std::function<int(int, const ObsVector&, double)>& choose) {
  std::vector<int> actions(static_cast<std::size_t>(env.num_agents()));
  double prev = kDefaultPrevActionMph;
  for (int i = 0; i < env.num_agents(); ++i) {
    const int a = choose(i, env.observe(i, prev), prev);
    if (a < 0 || a >= kNumActions) {
      throw std::invalid_argument("agent " + std::to_string(i) + " chose action index " +
                                  std::to_string(a));
    }
    actions[static_cast<std::size_t>(i)] = a;
    prev = action_value(a);
  }
  return actions;
}

VslEnv::VslEnv(Scenario scenario, RewardWeights weights)
    : scenario_(std::move(scenario)), weights_(weights) {
  scenario_.validate();
  weights_.validate();
  if (scenario_.agent_gantries.empty()) throw ValidationError("scenario has no agents");
}

void VslEnv::reset(std::uint64_t seed) {
  sim_.emplace(scenario_, seed);
  limits_.assign(static_cast<std::size_t>(scenario_.layout.gantry_count()), 70.0);
  const int warmup_intervals =
      static_cast<int>(std::lround(scenario_.warmup_s / scenario_.control_interval_s));
  readings_.assign(limits_.size(), sensing::SensorReading{});
  for (int k = 0; k < warmup_intervals; ++k) readings_ = sim_->run_interval(limits_);
  steps_ = 0;
}

void VslEnv::require_started() const {
  if (!sim_) throw std::logic_error("environment used before reset()");
}

const Simulator& VslEnv::simulator() const {
  require_started();
  return *sim_;
}

const sensing::SensorReading& VslEnv::agent_reading(int agent) const {
  require_started();
  return readings_.at(static_cast<std::size_t>(scenario_.agent_gantries.at(agent)));
}

const sensing::SensorReading& VslEnv::upstream_reading(int agent) const {
  require_started();
  const int g = scenario_.agent_gantries.at(agent);
  const int up = g + 1 < scenario_.layout.gantry_count() ? g + 1 : g;
  return readings_.at(static_cast<std::size_t>(up));
}

AgentObservation VslEnv::observation(int agent, double prev_action_mph) const {
  return build_observation(prev_action_mph, agent_reading(agent), upstream_reading(agent));
}

ObsVector VslEnv::observe(int agent, double prev_action_mph) const {
  return observation(agent, prev_action_mph).normalized();
}

StepResult VslEnv::step(std::span<const int> action_indices) {
  require_started();
  if (done()) throw std::logic_error("step() called after the episode ended");
  if (static_cast<int>(action_indices.size()) != num_agents()) {
    throw std::invalid_argument("one action per agent required");
  }
  std::vector<double> actions_mph(action_indices.size());
  for (std::size_t i = 0; i < action_indices.size(); ++i) {
    const int a = action_indices[i];
    if (a < 0 || a >= kNumActions) throw std::invalid_argument("action index out of range");
    actions_mph[i] = action_value(a);
    limits_[static_cast<std::size_t>(scenario_.agent_gantries[i])] = actions_mph[i];
  }
  readings_ = sim_->run_interval(limits_);
  ++steps_;
  std::vector<double> nu(actions_mph.size());
  for (int i = 0; i < num_agents(); ++i) nu[static_cast<std::size_t>(i)] = agent_reading(i).mean_speed_mph;
  return StepResult{compute_rewards(actions_mph, nu, weights_), done()};
}

}  // namespace marvel::env
