#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "marvel/sensing.hpp"

namespace marvel::io {

inline constexpr const char* kRdsHeader =
    "timestamp,sensor_id,milemarker,speed_mph,occupancy,volume";

struct RdsRecord {
  double timestamp = 0.0;  // s since midnight
  std::string sensor_id;
  double milemarker = 0.0;
  double speed_mph = 0.0;
  double occupancy = 0.0;
  double volume = 0.0;

  bool operator==(const RdsRecord&) const = default;
};

struct RejectedRow {
  int line = 0;
  std::string reason;
};

struct RdsSeries {
  std::vector<RdsRecord> records;  // sorted by (timestamp, sensor_id)
  std::vector<RejectedRow> rejected;
  std::vector<std::string> gaps;  // human-readable per-sensor cadence gaps
};

// Missing columns throw ValidationError; bad rows land in `rejected` with
// their line number and are skipped.
RdsSeries parse_rds_text(const std::string& text);
RdsSeries parse_rds_csv(const std::string& path);

void write_rds_csv(std::ostream& out, std::span<const RdsRecord> records);

// Simulator readings in the RDS schema, sensor ids "S<index>".
std::vector<RdsRecord> readings_to_records(std::span<const sensing::SensorReading> readings,
                                           std::span<const double> sensor_milepoints);

struct GantryAssignment {
  std::vector<std::vector<std::size_t>> sensors;  // per gantry, indices into the sensor list
  std::vector<int> gantry_of_sensor;
  std::vector<std::string> warnings;
};

// Each sensor goes to the gantry whose segment (gantry up to the next
// upstream gantry) contains it. Mile markers grow upstream. Sensors below
// the first gantry or beyond `upstream_end` (default: one gantry spacing
// past the last gantry) go to the nearest end gantry with a warning.
GantryAssignment assign_sensors(std::span<const double> gantry_milemarkers,
                                std::span<const double> sensor_milemarkers,
                                std::optional<double> upstream_end = {});

}  // namespace marvel::io
