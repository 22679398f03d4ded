#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "marvel/reward.hpp"
#include "marvel/scenario.hpp"
#include "marvel/sensing.hpp"

namespace marvel::env {

inline constexpr int kObsDim = 5;
inline constexpr double kSpeedNorm = 70.0;

using ObsVector = std::array<double, kObsDim>;

// <a^{i-1}, v^i, o^i, v^{i+1}, o^{i+1}> in mph and occupancy fraction.
struct AgentObservation {
  double prev_action_mph = kDefaultPrevActionMph;
  double local_speed_mph = 70.0;
  double local_occ = 0.0;
  double up_speed_mph = 70.0;
  double up_occ = 0.0;

  ObsVector raw() const;
  // Speed-like entries divided by 70; occupancies unchanged.
  ObsVector normalized() const;
};

AgentObservation build_observation(double prev_action_mph, const sensing::SensorReading& local,
                                   const sensing::SensorReading& upstream);

// Normalized observations concatenated downstream-first.
std::vector<double> global_state(std::span<const ObsVector> observations);

struct StepResult {
  std::vector<RewardBreakdown> rewards;  // one per agent
  bool done = false;
};

// What the trainer needs from an environment. Agents act downstream-first;
// observe() takes the action the downstream neighbour just chose.
class MultiAgentEnv {
 public:
  virtual ~MultiAgentEnv() = default;
  virtual int num_agents() const = 0;
  virtual void reset(std::uint64_t seed) = 0;
  virtual ObsVector observe(int agent, double prev_action_mph) const = 0;
  virtual StepResult step(std::span<const int> action_indices) = 0;
  virtual bool done() const = 0;
};

// Unrolls the spatially sequential protocol: agent 0 sees 70, agent i sees
// the value agent i-1 picked. `choose` returns an action index; anything
// outside [0, 5) throws std::invalid_argument.
std::vector<int> sequential_decide(
    const MultiAgentEnv& env,
    const std::function<int(int agent, const ObsVector& obs, double prev_action_mph)>& choose);

// The corridor wrapped as a cooperative Markov game.
class VslEnv : public MultiAgentEnv {
 public:
  explicit VslEnv(Scenario scenario, RewardWeights weights = {});

  int num_agents() const override { return scenario_.agent_count(); }
  // Warms the corridor up under all-70 limits.
  void reset(std::uint64_t seed) override;
  ObsVector observe(int agent, double prev_action_mph) const override;
  // Posts the limits, advances one control interval, scores the new readings.
  // Throws std::logic_error after the episode ends or before reset().
  StepResult step(std::span<const int> action_indices) override;
  bool done() const override { return steps_ >= scenario_.episode_steps; }

  AgentObservation observation(int agent, double prev_action_mph) const;
  const sensing::SensorReading& agent_reading(int agent) const;
  const sensing::SensorReading& upstream_reading(int agent) const;
  // Latest reading per gantry, gantry order.
  const std::vector<sensing::SensorReading>& readings() const { return readings_; }
  // Limits posted during the last step, one per gantry.
  const std::vector<double>& posted_limits() const { return limits_; }
  int steps_taken() const { return steps_; }
  const Scenario& scenario() const { return scenario_; }
  const RewardWeights& weights() const { return weights_; }
  const Simulator& simulator() const;

 private:
  void require_started() const;

  Scenario scenario_;
  RewardWeights weights_;
  std::optional<Simulator> sim_;
  std::vector<sensing::SensorReading> readings_;
  std::vector<double> limits_;
  int steps_ = 0;
};

}  // namespace marvel::env
