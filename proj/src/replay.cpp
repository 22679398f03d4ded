#include "marvel/replay.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "marvel/controllers.hpp"
#include "marvel/units.hpp"

namespace marvel::io {

SensorIndex index_sensors(const RdsSeries& series) {
  std::map<std::string, double> mm;
  for (const auto& r : series.records) mm.emplace(r.sensor_id, r.milemarker);
  std::vector<std::pair<double, std::string>> order;
  for (const auto& [id, m] : mm) order.emplace_back(m, id);
  std::sort(order.begin(), order.end());
  SensorIndex out;
  for (const auto& [m, id] : order) {
    out.ids.push_back(id);
    out.milemarkers.push_back(m);
  }
  return out;
}

ReplayResult open_loop_replay(const RdsSeries& series, std::span<const double> gantries,
                              const GantryAssignment& assignment, const nn::Mlp& actor,
                              bool masking) {
  const int n_g = static_cast<int>(gantries.size());
  if (n_g == 0) throw ValidationError("replay needs at least one gantry");
  if (static_cast<int>(assignment.sensors.size()) != n_g) {
    throw ValidationError("sensor assignment does not match the gantry count");
  }
  const SensorIndex sensors = index_sensors(series);
  if (assignment.gantry_of_sensor.size() != sensors.ids.size()) {
    throw ValidationError("sensor assignment does not match the sensors in the data");
  }
  std::map<std::string, int> gantry_of;
  for (std::size_t s = 0; s < sensors.ids.size(); ++s) {
    gantry_of[sensors.ids[s]] = assignment.gantry_of_sensor[s];
  }

  ReplayResult out;
  out.speed.milepoints.assign(gantries.begin(), gantries.end());
  out.limits.milepoints = out.speed.milepoints;
  if (series.records.empty()) return out;

  const double t0 = series.records.front().timestamp;
  const double t1 = series.records.back().timestamp;
  const int n_steps = static_cast<int>(std::floor((t1 - t0) / kReplayCadenceS + 0.5)) + 1;
  out.speed.cols = out.limits.cols = n_steps;
  out.speed.values.assign(static_cast<std::size_t>(n_g) * n_steps, 0.0);
  out.limits.values = out.speed.values;
  out.held.assign(static_cast<std::size_t>(n_g) * n_steps, false);

  // Bucket readings by (step, gantry).
  std::vector<std::vector<std::vector<sensing::SensorReading>>> buckets(
      n_steps, std::vector<std::vector<sensing::SensorReading>>(n_g));
  for (const auto& r : series.records) {
    const int step = static_cast<int>(std::floor((r.timestamp - t0) / kReplayCadenceS + 0.5));
    sensing::SensorReading reading;
    reading.window_end_s = r.timestamp;
    reading.mean_speed_mph = r.speed_mph;
    reading.occupancy = r.occupancy;
    reading.volume_vph = r.volume;
    buckets[step][gantry_of.at(r.sensor_id)].push_back(reading);
  }

  std::vector<int> agent_gantries(n_g);
  for (int g = 0; g < n_g; ++g) agent_gantries[g] = g;
  control::PolicyController policy(actor, masking, control::PolicyMode::kArgmax, 0, "replay");
  policy.reset();

  std::vector<sensing::SensorReading> last(n_g);
  for (int g = 0; g < n_g; ++g) last[g].sensor_id = g;
  for (int t = 0; t < n_steps; ++t) {
    out.step_times.push_back(t0 + t * kReplayCadenceS);
    for (int g = 0; g < n_g; ++g) {
      const auto& b = buckets[t][g];
      if (b.empty()) {
        out.held[static_cast<std::size_t>(g) * n_steps + t] = true;
        ++out.held_count;
      } else {
        last[g] = sensing::select_critical_sensor(b);
        last[g].sensor_id = g;
      }
    }
    const control::ControlContext ctx{last, gantries, agent_gantries};
    const auto limits = policy.decide(ctx);
    for (int g = 0; g < n_g; ++g) {
      out.speed.at(g, t) = last[g].mean_speed_mph;
      out.limits.at(g, t) = limits[g];
    }
  }
  return out;
}

}  // namespace marvel::io
