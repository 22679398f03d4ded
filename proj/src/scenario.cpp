#include "marvel/scenario.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "marvel/units.hpp"

namespace marvel {

using nlohmann::json;

namespace {

json schedule_to_json(const sim::RateSchedule& s) {
  json arr = json::array();
  for (const auto& iv : s.intervals) arr.push_back({iv.start_s, iv.end_s, iv.rate});
  return arr;
}

sim::RateSchedule schedule_from_json(const json& j) {
  sim::RateSchedule s;
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != 3) {
      throw ValidationError("demand rows must be [start_s, end_s, veh/lane/hr]");
    }
    s.intervals.push_back({row[0].get<double>(), row[1].get<double>(), row[2].get<double>()});
  }
  return s;
}

// Gantries every `spacing` mi starting at `first`; sensors sit a fixed or
// random distance (<= 0.2 mi) upstream of each gantry.
void place_gantries(Scenario& s, int count, double first, double spacing,
                    std::uint64_t sensor_seed) {
  std::mt19937_64 rng(sensor_seed);
  std::uniform_real_distribution<double> offset(0.0, 0.2);
  s.layout.gantry_milepoints.clear();
  s.layout.sensor_milepoints.clear();
  for (int i = 0; i < count; ++i) {
    const double g = first + spacing * i;
    s.layout.gantry_milepoints.push_back(g);
    const double off = sensor_seed == 0 ? 0.1 : offset(rng);
    s.layout.sensor_milepoints.push_back(std::min(g + off, s.layout.length_mi));
  }
}

std::vector<int> iota_range(int begin, int end) {
  std::vector<int> v;
  for (int i = begin; i < end; ++i) v.push_back(i);
  return v;
}

sim::RateSchedule two_phase(double first_rate, double switch_s, double second_rate,
                            double horizon_s) {
  return sim::RateSchedule{{{0.0, switch_s, first_rate}, {switch_s, horizon_s, second_rate}}};
}

Scenario training_scenario() {
  Scenario s;
  s.name = "training";
  s.layout.length_mi = 7.5;
  s.layout.lanes = 4;
  place_gantries(s, 15, 0.25, 0.5, 0);
  s.layout.ramps = {{3.5, 2}};
  s.agent_gantries = iota_range(7, 15);
  s.compliance_rate = 0.05;
  const double h = s.horizon_s();
  s.demand.mainline = two_phase(1850.0, s.warmup_s + 3600.0, 925.0, h);
  s.demand.per_ramp = {sim::RateSchedule::constant(1000.0, h)};
  return s;
}

Scenario desk_scenario() {
  Scenario s;
  s.name = "desk";
  s.layout.length_mi = 3.0;
  s.layout.lanes = 3;
  place_gantries(s, 6, 0.25, 0.5, 0);
  s.layout.ramps = {{0.9, 2}};
  s.agent_gantries = iota_range(2, 6);
  s.compliance_rate = 0.05;
  const double h = s.horizon_s();
  s.demand.mainline = two_phase(1850.0, s.warmup_s + 3600.0, 925.0, h);
  s.demand.per_ramp = {two_phase(700.0, s.warmup_s + 3600.0, 200.0, h)};
  return s;
}

Scenario desk_eval_scenario() {
  Scenario s = desk_scenario();
  s.name = "desk-eval";
  s.seed = 1001;
  return s;
}

Scenario testing_scenario(char which) {
  Scenario s;
  s.layout.length_mi = 17.0;
  s.layout.lanes = 4;
  place_gantries(s, 34, 0.25, 0.5, 2024);
  s.agent_gantries = iota_range(0, 34);
  s.episode_steps = 170;  // three hours including the warm-up
  const double h = s.horizon_s();
  const double w = s.warmup_s;
  switch (which) {
    case 'A':
      s.name = "A";
      s.compliance_rate = 0.05;
      s.layout.ramps = {{3.1, 2}, {10.1, 2}};
      s.demand.mainline = sim::RateSchedule{{{0.0, w + 1800.0, 1500.0},
                                             {w + 1800.0, w + 5400.0, 1850.0},
                                             {w + 5400.0, h, 900.0}}};
      s.demand.per_ramp = {
          sim::RateSchedule{{{0.0, w + 1200.0, 300.0}, {w + 1200.0, w + 6000.0, 500.0},
                             {w + 6000.0, h, 200.0}}},
          sim::RateSchedule{{{0.0, w + 2400.0, 250.0}, {w + 2400.0, w + 6000.0, 450.0},
                             {w + 6000.0, h, 200.0}}}};
      break;
    case 'B':
    case 'C':
      s.name = std::string(1, which);
      s.compliance_rate = which == 'B' ? 0.5 : 1.0;
      s.layout.ramps = {{5.1, 2}};
      s.demand.mainline = two_phase(1750.0, w + 3600.0, 850.0, h);
      s.demand.per_ramp = {two_phase(450.0, w + 4800.0, 150.0, h)};
      break;
    default:
      throw ValidationError("unknown testing scenario");
  }
  return s;
}

}  // namespace

int Scenario::steps_per_interval() const {
  return static_cast<int>(std::lround(control_interval_s / dt_s));
}

void Scenario::validate() const {
  if (!(dt_s > 0.0 && dt_s <= 1.0)) throw ValidationError("dt_s must lie in (0, 1]");
  if (!(control_interval_s > 0.0) ||
      std::abs(steps_per_interval() * dt_s - control_interval_s) > 1e-9) {
    throw ValidationError("control interval must be a positive multiple of dt");
  }
  if (warmup_s < 0.0) throw ValidationError("warm-up must be non-negative");
  if (episode_steps < 1) throw ValidationError("episode needs at least one control step");
  if (compliance_rate < 0.0 || compliance_rate > 1.0) {
    throw ValidationError("compliance rate must lie in [0, 1]");
  }
  layout.validate();
  driver.validate();
  demand.mainline.validate(horizon_s(), "mainline");
  if (demand.per_ramp.size() != layout.ramps.size()) {
    throw ValidationError("one demand schedule per ramp is required");
  }
  for (std::size_t r = 0; r < demand.per_ramp.size(); ++r) {
    demand.per_ramp[r].validate(horizon_s(), "ramp " + std::to_string(r));
  }
  if (agent_gantries.empty()) throw ValidationError("at least one agent gantry is required");
  for (std::size_t i = 0; i < agent_gantries.size(); ++i) {
    const int g = agent_gantries[i];
    if (g < 0 || g >= layout.gantry_count()) throw ValidationError("agent gantry out of range");
    if (i > 0 && g <= agent_gantries[i - 1]) {
      throw ValidationError("agent gantries must be listed downstream-first without repeats");
    }
  }
}

std::string scenario_to_json_text(const Scenario& s) {
  json j;
  j["name"] = s.name;
  j["seed"] = s.seed;
  j["dt_s"] = s.dt_s;
  j["control_interval_s"] = s.control_interval_s;
  j["warmup_s"] = s.warmup_s;
  j["episode_steps"] = s.episode_steps;
  j["compliance_rate"] = s.compliance_rate;
  j["detector_zone_ft"] = s.detector_zone_ft;
  json ramps = json::array();
  for (const auto& r : s.layout.ramps) {
    ramps.push_back({{"merge_milepoint", r.merge_milepoint}, {"ramp_lanes", r.ramp_lanes}});
  }
  j["layout"] = {{"length_mi", s.layout.length_mi},
                 {"lanes", s.layout.lanes},
                 {"gantry_milepoints", s.layout.gantry_milepoints},
                 {"sensor_milepoints", s.layout.sensor_milepoints},
                 {"ramps", ramps}};
  j["agent_gantries"] = s.agent_gantries;
  const auto& d = s.driver;
  j["driver"] = {{"desired_time_headway_s", d.desired_time_headway_s},
                 {"max_accel", d.max_accel},
                 {"comfort_decel", d.comfort_decel},
                 {"jam_gap_m", d.jam_gap_m},
                 {"free_speed_mean_mph", d.free_speed_mean_mph},
                 {"free_speed_std_mph", d.free_speed_std_mph},
                 {"accel_exponent", d.accel_exponent},
                 {"vehicle_length_ft", d.vehicle_length_ft}};
  const auto& m = s.merge;
  j["merge"] = {{"merge_zone_m", m.merge_zone_m},
                {"weave_length_m", m.weave_length_m},
                {"accept_headway_s", m.accept_headway_s},
                {"follower_headway_s", m.follower_headway_s},
                {"ramp_speed_mph", m.ramp_speed_mph},
                {"lane_change_cooldown_s", m.lane_change_cooldown_s}};
  json ramp_demand = json::array();
  for (const auto& r : s.demand.per_ramp) ramp_demand.push_back(schedule_to_json(r));
  j["demand"] = {{"mainline", schedule_to_json(s.demand.mainline)}, {"ramps", ramp_demand}};
  return j.dump(2);
}

Scenario scenario_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("scenario is not valid JSON: ") + e.what());
  }
  Scenario s;
  try {
    s.name = j.value("name", s.name);
    s.seed = j.value("seed", s.seed);
    s.dt_s = j.value("dt_s", s.dt_s);
    s.control_interval_s = j.value("control_interval_s", s.control_interval_s);
    s.warmup_s = j.value("warmup_s", s.warmup_s);
    s.episode_steps = j.value("episode_steps", s.episode_steps);
    s.compliance_rate = j.value("compliance_rate", s.compliance_rate);
    s.detector_zone_ft = j.value("detector_zone_ft", s.detector_zone_ft);
    const json& l = j.at("layout");
    s.layout.length_mi = l.at("length_mi").get<double>();
    s.layout.lanes = l.at("lanes").get<int>();
    s.layout.gantry_milepoints = l.at("gantry_milepoints").get<std::vector<double>>();
    s.layout.sensor_milepoints = l.at("sensor_milepoints").get<std::vector<double>>();
    for (const auto& r : l.value("ramps", json::array())) {
      s.layout.ramps.push_back({r.at("merge_milepoint").get<double>(), r.at("ramp_lanes").get<int>()});
    }
    if (j.contains("agent_gantries")) {
      s.agent_gantries = j.at("agent_gantries").get<std::vector<int>>();
    } else {
      s.agent_gantries = iota_range(0, s.layout.gantry_count());
    }
    if (j.contains("driver")) {
      const json& d = j["driver"];
      auto& p = s.driver;
      p.desired_time_headway_s = d.value("desired_time_headway_s", p.desired_time_headway_s);
      p.max_accel = d.value("max_accel", p.max_accel);
      p.comfort_decel = d.value("comfort_decel", p.comfort_decel);
      p.jam_gap_m = d.value("jam_gap_m", p.jam_gap_m);
      p.free_speed_mean_mph = d.value("free_speed_mean_mph", p.free_speed_mean_mph);
      p.free_speed_std_mph = d.value("free_speed_std_mph", p.free_speed_std_mph);
      p.accel_exponent = d.value("accel_exponent", p.accel_exponent);
      p.vehicle_length_ft = d.value("vehicle_length_ft", p.vehicle_length_ft);
    }
    if (j.contains("merge")) {
      const json& m = j["merge"];
      auto& p = s.merge;
      p.merge_zone_m = m.value("merge_zone_m", p.merge_zone_m);
      p.weave_length_m = m.value("weave_length_m", p.weave_length_m);
      p.accept_headway_s = m.value("accept_headway_s", p.accept_headway_s);
      p.follower_headway_s = m.value("follower_headway_s", p.follower_headway_s);
      p.ramp_speed_mph = m.value("ramp_speed_mph", p.ramp_speed_mph);
      p.lane_change_cooldown_s = m.value("lane_change_cooldown_s", p.lane_change_cooldown_s);
    }
    const json& d = j.at("demand");
    s.demand.mainline = schedule_from_json(d.at("mainline"));
    for (const auto& r : d.value("ramps", json::array())) {
      s.demand.per_ramp.push_back(schedule_from_json(r));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("scenario field error: ") + e.what());
  }
  s.validate();
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return scenario_from_json_text(ss.str());
}

Scenario builtin_scenario(const std::string& name) {
  Scenario s;
  if (name == "training") {
    s = training_scenario();
  } else if (name == "desk") {
    s = desk_scenario();
  } else if (name == "desk-eval") {
    s = desk_eval_scenario();
  } else if (name == "A" || name == "B" || name == "C") {
    s = testing_scenario(name[0]);
  } else {
    throw ValidationError("unknown scenario '" + name + "'");
  }
  s.validate();
  return s;
}

std::vector<std::string> builtin_scenario_names() {
  return {"training", "desk", "desk-eval", "A", "B", "C"};
}

Scenario resolve_scenario(const std::string& name_or_path) {
  for (const auto& n : builtin_scenario_names()) {
    if (n == name_or_path) return builtin_scenario(n);
  }
  return load_scenario_file(name_or_path);
}

Simulator::Simulator(const Scenario& scenario, std::uint64_t seed)
    : scenario_(scenario),
      world_(scenario.layout, scenario.driver, scenario.merge, seed) {
  scenario_.validate();
  for (int i = 0; i < scenario_.layout.gantry_count(); ++i) {
    sensors_.emplace_back(i, scenario_.detector_zone_ft, scenario_.layout.lanes);
  }
}

void Simulator::step(std::span<const double> posted_limits_mph) {
  world_.last_entered = 0;
  world_.last_exited = 0;
  sim::spawn_vehicles(world_, scenario_.demand, scenario_.compliance_rate, scenario_.dt_s);
  for (int r = 0; r < static_cast<int>(scenario_.layout.ramps.size()); ++r) {
    sim::merge_onramp(world_, r);
  }
  sim::step_simulation(world_, posted_limits_mph, scenario_.dt_s);
  for (const auto& c : world_.crossings) {
    sensors_[static_cast<std::size_t>(c.detector)].record_crossing(c.speed_mph, c.length_ft,
                                                                   c.time_s);
  }
}

std::vector<sensing::SensorReading> Simulator::run_interval(
    std::span<const double> posted_limits_mph) {
  const int n = scenario_.steps_per_interval();
  for (int k = 0; k < n; ++k) step(posted_limits_mph);
  std::vector<sensing::SensorReading> out;
  out.reserve(sensors_.size());
  for (auto& acc : sensors_) out.push_back(acc.aggregate(world_.time_s, scenario_.control_interval_s));
  return out;
}

}  // namespace marvel
