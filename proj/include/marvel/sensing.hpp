#pragma once

#include <span>
#include <vector>

namespace marvel::sensing {

inline constexpr double kEmptyWindowSpeedMph = 70.0;
inline constexpr double kDefaultZoneFt = 6.0;
inline constexpr double kDefaultSpreadThreshold = 0.05;

struct SensorReading {
  int sensor_id = 0;
  double window_end_s = 0.0;
  double mean_speed_mph = kEmptyWindowSpeedMph;
  double occupancy = 0.0;  // fraction of the window
  double volume_vph = 0.0;
};

// Collects detector crossings for one sensor over one aggregation window.
class SensorAccumulator {
 public:
  // Occupancy is averaged over `lanes` parallel detection zones.
  explicit SensorAccumulator(int sensor_id = 0, double zone_length_ft = kDefaultZoneFt,
                             int lanes = 1)
      : sensor_id_(sensor_id), zone_length_ft_(zone_length_ft), lanes_(lanes) {}

  // Throws std::invalid_argument for a non-finite or non-positive speed.
  void record_crossing(double speed_mph, double length_ft, double timestamp_s);

  // Summarizes the window and clears the accumulator. An empty window reads
  // as free flow (70 mph, zero occupancy).
  SensorReading aggregate(double window_end_s, double window_s = 60.0);

  std::size_t crossings() const { return speeds_.size(); }
  int sensor_id() const { return sensor_id_; }

 private:
  int sensor_id_;
  double zone_length_ft_;
  int lanes_;
  std::vector<double> speeds_;
  std::vector<double> occupied_s_;
};

// Picks the reading that drives an agent when several sensors feed one
// gantry: the slowest when occupancies are uniformly high or low (spread below
// `spread_threshold`), otherwise the most occupied. Throws on empty input.
const SensorReading& select_critical_sensor(std::span<const SensorReading> readings,
                                            double spread_threshold = kDefaultSpreadThreshold);

}  // namespace marvel::sensing
