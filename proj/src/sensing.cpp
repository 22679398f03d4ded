#include "marvel/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "marvel/units.hpp"

namespace marvel::sensing {

void SensorAccumulator::record_crossing(double speed_mph, double length_ft, double timestamp_s) {
  (void)timestamp_s;
  if (!std::isfinite(speed_mph) || !(speed_mph > 0.0)) {
    throw std::invalid_argument("crossing speed must be finite and positive");
  }
  speeds_.push_back(speed_mph);
  occupied_s_.push_back(feet_to_meters(length_ft + zone_length_ft_) / mph_to_mps(speed_mph));
}

SensorReading SensorAccumulator::aggregate(double window_end_s, double window_s) {
  SensorReading r;
  r.sensor_id = sensor_id_;
  r.window_end_s = window_end_s;
  if (!speeds_.empty()) {
    // Sorting first makes the sums independent of crossing order.
    std::sort(speeds_.begin(), speeds_.end());
    std::sort(occupied_s_.begin(), occupied_s_.end());
    const double n = static_cast<double>(speeds_.size());
    r.mean_speed_mph = std::accumulate(speeds_.begin(), speeds_.end(), 0.0) / n;
    const double occ = std::accumulate(occupied_s_.begin(), occupied_s_.end(), 0.0) /
                       (window_s * lanes_);
    r.occupancy = std::clamp(occ, 0.0, 1.0);
    r.volume_vph = n * 3600.0 / window_s;
  }
  speeds_.clear();
  occupied_s_.clear();
  return r;
}

const SensorReading& select_critical_sensor(std::span<const SensorReading> readings,
                                            double spread_threshold) {
  if (readings.empty()) throw std::invalid_argument("no readings to select from");
  const auto [lo, hi] = std::minmax_element(
      readings.begin(), readings.end(),
      [](const SensorReading& a, const SensorReading& b) { return a.occupancy < b.occupancy; });
  if (hi->occupancy - lo->occupancy < spread_threshold) {
    return *std::min_element(readings.begin(), readings.end(),
                             [](const SensorReading& a, const SensorReading& b) {
                               return a.mean_speed_mph < b.mean_speed_mph;
                             });
  }
  return *hi;
}

}  // namespace marvel::sensing
