#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "marvel/mlp.hpp"
#include "marvel/sensing.hpp"

namespace marvel::control {

// What a controller sees at one control step: the latest critical reading
// per gantry plus the corridor geometry. Agents are listed downstream-first.
struct ControlContext {
  std::span<const sensing::SensorReading> readings;  // one per gantry
  std::span<const double> gantry_milepoints;
  std::span<const int> agent_gantries;
};

class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  // Clears any per-run state.
  virtual void reset() {}
  // One posted limit (mph) per agent, downstream-first.
  virtual std::vector<double> decide(const ControlContext& ctx) = 0;
  // Fresh controller with the same configuration and no run state.
  virtual std::unique_ptr<Controller> clone() const = 0;
};

class NoControl : public Controller {
 public:
  std::string name() const override { return "no-control"; }
  std::vector<double> decide(const ControlContext& ctx) override;
  std::unique_ptr<Controller> clone() const override;
};

struct SpeedMatchConfig {
  double trigger_speed = 45.0;
  double trigger_occ = 0.18;
  int persistence = 2;
  double release_speed = 55.0;
  int release_persistence = 3;
  double distance_limit = 1.0;  // miles downstream of the gantry
  double step_increment = 10.0;
  double min_limit = 30.0;
  double max_limit = 70.0;

  void validate() const;
};

// Rule-based benchmark. A gantry latches once the readings within
// distance_limit downstream (its own included) violate a threshold for
// `persistence` windows in a row; it then posts the slowest of those speeds
// rounded to 10 and clamped, and releases after `release_persistence`
// windows with all of them at or above release_speed. Upstream neighbours
// step up by 10 per gantry.
class SpeedMatching : public Controller {
 public:
  explicit SpeedMatching(SpeedMatchConfig config = {});
  std::string name() const override { return "speed-matching"; }
  void reset() override;
  std::vector<double> decide(const ControlContext& ctx) override;
  std::unique_ptr<Controller> clone() const override;
  const SpeedMatchConfig& config() const { return config_; }
  bool active(int agent) const { return state_.at(agent).active; }

 private:
  struct AgentState {
    int violations = 0;
    int clear = 0;
    bool active = false;
  };
  SpeedMatchConfig config_;
  std::vector<AgentState> state_;
};

// Valid-action flags over (30, 40, 50, 60, 70): action a is invalid when
// a > prev + a_diff. The most-downstream agent gets all-valid.
std::vector<bool> invalid_action_mask(double prev_action_mph, bool most_downstream,
                                      double a_diff = 10.0);

enum class PolicyMode { kArgmax, kSample };

// Runs a trained policy through the sequential protocol, optionally with
// invalid-action masking.
class PolicyController : public Controller {
 public:
  PolicyController(nn::Mlp actor, bool masking, PolicyMode mode = PolicyMode::kArgmax,
                   std::uint64_t seed = 0, std::string label = "mappo");
  std::string name() const override { return label_; }
  void reset() override { rng_.seed(seed_); }
  std::vector<double> decide(const ControlContext& ctx) override;
  std::unique_ptr<Controller> clone() const override;

  bool masking() const { return masking_; }
  const nn::Mlp& actor() const { return actor_; }
  // Probabilities for one agent, with the mask applied when enabled.
  std::vector<double> action_probs(std::span<const double> obs, double prev_action_mph,
                                   bool most_downstream) const;

 private:
  nn::Mlp actor_;
  bool masking_;
  PolicyMode mode_;
  std::uint64_t seed_;
  std::string label_;
  std::mt19937_64 rng_;
};

// Index of the highest probability; ties go to the lower index.
int argmax(std::span<const double> probs);
// Inverse-CDF draw that never returns a zero-probability index.
int sample_action(std::span<const double> probs, std::mt19937_64& rng);

// True when every upstream neighbour is at most a_diff above its downstream one.
bool satisfies_stepdown(std::span<const double> limits_downstream_first, double a_diff = 10.0);

}  // namespace marvel::control
