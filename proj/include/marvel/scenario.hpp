#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "marvel/corridor.hpp"
#include "marvel/sensing.hpp"

namespace marvel {

// Everything needed to reproduce one simulated corridor run.
struct Scenario {
  std::string name = "custom";
  std::uint64_t seed = 1;
  double dt_s = 0.5;
  double control_interval_s = 60.0;
  double warmup_s = 600.0;
  int episode_steps = 120;
  double compliance_rate = 0.05;
  double detector_zone_ft = sensing::kDefaultZoneFt;
  sim::CorridorLayout layout;
  sim::DriverParams driver;
  sim::MergeParams merge;
  sim::DemandProfile demand;
  // Gantries driven by agents, downstream-first. The rest stay at 70 mph.
  std::vector<int> agent_gantries;

  double horizon_s() const { return warmup_s + episode_steps * control_interval_s; }
  int steps_per_interval() const;
  int agent_count() const { return static_cast<int>(agent_gantries.size()); }
  void validate() const;
};

Scenario scenario_from_json_text(const std::string& text);
std::string scenario_to_json_text(const Scenario& s);
Scenario load_scenario_file(const std::string& path);

// Built-in scenarios: "training" (15 gantries, 8 agents), "desk" (4-agent
// training profile), "desk-eval" (single bottleneck used for controller
// comparisons), and the 34-gantry "A", "B", "C" testing corridors.
Scenario builtin_scenario(const std::string& name);
std::vector<std::string> builtin_scenario_names();

// Resolves a built-in name or a JSON file path.
Scenario resolve_scenario(const std::string& name_or_path);

// Corridor simulator plus the roadside sensors, stepped at dt and
// aggregated once per control interval.
class Simulator {
 public:
  Simulator(const Scenario& scenario, std::uint64_t seed);

  void step(std::span<const double> posted_limits_mph);
  // Runs one control interval under fixed limits and returns one reading per
  // sensor (same order as the gantries).
  std::vector<sensing::SensorReading> run_interval(std::span<const double> posted_limits_mph);

  const sim::World& world() const { return world_; }
  double time_s() const { return world_.time_s; }
  const Scenario& scenario() const { return scenario_; }

 private:
  Scenario scenario_;
  sim::World world_;
  std::vector<sensing::SensorAccumulator> sensors_;
};

}  // namespace marvel
