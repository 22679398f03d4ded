#include "marvel/rds.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

#include "marvel/csv_io.hpp"
#include "marvel/units.hpp"

namespace marvel::io {

namespace {

constexpr double kCadenceS = 60.0;
const char* const kColumns[] = {"timestamp", "sensor_id", "milemarker",
                                "speed_mph", "occupancy", "volume"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RdsSeries parse_rds_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("RDS data: missing header");
  const auto head = split_csv_line(line);
  int col[6];
  for (int k = 0; k < 6; ++k) {
    col[k] = -1;
    for (std::size_t j = 0; j < head.size(); ++j) {
      if (trim(head[j]) == kColumns[k]) col[k] = static_cast<int>(j);
    }
    if (col[k] < 0) {
      throw ValidationError(std::string("RDS data: missing column '") + kColumns[k] + "'");
    }
  }

  RdsSeries out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != head.size()) {
      out.rejected.push_back({line_no, "expected " + std::to_string(head.size()) + " fields"});
      continue;
    }
    try {
      const std::string where = "line " + std::to_string(line_no);
      RdsRecord r;
      r.timestamp = parse_double(f[col[0]], where);
      r.sensor_id = trim(f[col[1]]);
      r.milemarker = parse_double(f[col[2]], where);
      r.speed_mph = parse_double(f[col[3]], where);
      r.occupancy = parse_double(f[col[4]], where);
      r.volume = parse_double(f[col[5]], where);
      if (r.sensor_id.empty()) throw ValidationError(where + ": empty sensor_id");
      if (!std::isfinite(r.timestamp) || r.timestamp < 0.0) {
        throw ValidationError(where + ": timestamp must be finite and >= 0");
      }
      if (!std::isfinite(r.milemarker)) throw ValidationError(where + ": bad milemarker");
      if (!std::isfinite(r.speed_mph) || r.speed_mph < 0.0) {
        throw ValidationError(where + ": speed must be finite and >= 0");
      }
      if (!(r.occupancy >= 0.0 && r.occupancy <= 1.0)) {
        throw ValidationError(where + ": occupancy " + f[col[4]] + " outside [0, 1]");
      }
      if (!std::isfinite(r.volume) || r.volume < 0.0) {
        throw ValidationError(where + ": volume must be finite and >= 0");
      }
      out.records.push_back(std::move(r));
    } catch (const ValidationError& e) {
      out.rejected.push_back({line_no, e.what()});
    }
  }

  std::stable_sort(out.records.begin(), out.records.end(),
                   [](const RdsRecord& a, const RdsRecord& b) {
                     if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                     return a.sensor_id < b.sensor_id;
                   });
  // Duplicate (timestamp, sensor) pairs keep the first occurrence.
  std::vector<RdsRecord> unique;
  for (auto& r : out.records) {
    if (!unique.empty() && unique.back().timestamp == r.timestamp &&
        unique.back().sensor_id == r.sensor_id) {
      out.rejected.push_back({0, "duplicate reading for sensor " + r.sensor_id + " at t=" +
                                     format_double(r.timestamp)});
      continue;
    }
    unique.push_back(std::move(r));
  }
  out.records = std::move(unique);

  std::map<std::string, double> last_seen;
  for (const auto& r : out.records) {
    auto it = last_seen.find(r.sensor_id);
    if (it != last_seen.end() && r.timestamp - it->second > kCadenceS + 1e-6) {
      out.gaps.push_back("sensor " + r.sensor_id + ": no data between t=" +
                         format_double(it->second) + " and t=" + format_double(r.timestamp));
    }
    last_seen[r.sensor_id] = r.timestamp;
  }
  return out;
}

RdsSeries parse_rds_csv(const std::string& path) { return parse_rds_text(read_text_file(path)); }

void write_rds_csv(std::ostream& out, std::span<const RdsRecord> records) {
  out << kRdsHeader << '\n';
  for (const auto& r : records) {
    out << format_double(r.timestamp) << ',' << r.sensor_id << ','
        << format_double(r.milemarker) << ',' << format_double(r.speed_mph) << ','
        << format_double(r.occupancy) << ',' << format_double(r.volume) << '\n';
  }
}

std::vector<RdsRecord> readings_to_records(std::span<const sensing::SensorReading> readings,
                                           std::span<const double> sensor_milepoints) {
  std::vector<RdsRecord> out;
  for (const auto& r : readings) {
    const auto idx = static_cast<std::size_t>(r.sensor_id);
    out.push_back(RdsRecord{r.window_end_s, "S" + std::to_string(r.sensor_id),
                            idx < sensor_milepoints.size() ? sensor_milepoints[idx] : 0.0,
                            r.mean_speed_mph, r.occupancy, r.volume_vph});
  }
  return out;
}

GantryAssignment assign_sensors(std::span<const double> gantries, std::span<const double> sensors,
                                std::optional<double> upstream_end) {
  if (gantries.empty()) throw ValidationError("no gantries to assign sensors to");
  if (!std::is_sorted(gantries.begin(), gantries.end())) {
    throw ValidationError("gantry mile markers must be sorted");
  }
  const double end = upstream_end.value_or(
      gantries.back() + (gantries.size() > 1 ? gantries.back() - gantries[gantries.size() - 2]
                                             : 0.5));
  GantryAssignment out;
  out.sensors.resize(gantries.size());
  for (std::size_t s = 0; s < sensors.size(); ++s) {
    const double mm = sensors[s];
    auto it = std::upper_bound(gantries.begin(), gantries.end(), mm + 1e-9);
    std::size_t g;
    if (it == gantries.begin()) {
      g = 0;
      out.warnings.push_back("sensor " + std::to_string(s) + " at " + format_double(mm) +
                             " lies downstream of every gantry; assigned to gantry 0");
    } else {
      g = static_cast<std::size_t>(it - gantries.begin()) - 1;
      if (g + 1 == gantries.size() && mm > end + 1e-9) {
        out.warnings.push_back("sensor " + std::to_string(s) + " at " + format_double(mm) +
                               " lies beyond the corridor; assigned to the last gantry");
      }
    }
    out.sensors[g].push_back(s);
    out.gantry_of_sensor.push_back(static_cast<int>(g));
  }
  return out;
}

}  // namespace marvel::io
