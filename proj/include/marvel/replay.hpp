#pragma once

#include <span>
#include <vector>

#include "marvel/evaluation.hpp"
#include "marvel/mlp.hpp"
#include "marvel/rds.hpp"

namespace marvel::io {

inline constexpr double kReplayCadenceS = 60.0;

struct ReplayResult {
  std::vector<double> step_times;  // window timestamp per column
  eval::Grid speed;   // critical-sensor speed fed to the policy, mph
  eval::Grid limits;  // posted limit, mph
  // Gantry x step flags for windows filled by holding the last observation.
  std::vector<bool> held;
  int held_count = 0;
};

// Open-loop replay: every 60 s, pick the critical sensor per gantry, build
// observations and run the sequential policy over all gantries
// (downstream-first). Traffic data is never modified. A gantry without data
// in a window holds its last observation (free flow before the first one)
// and is flagged.
ReplayResult open_loop_replay(const RdsSeries& series, std::span<const double> gantry_milemarkers,
                              const GantryAssignment& assignment, const nn::Mlp& actor,
                              bool masking);

// Distinct sensors in the series ordered by mile marker, with their
// mile markers.
struct SensorIndex {
  std::vector<std::string> ids;
  std::vector<double> milemarkers;
};
SensorIndex index_sensors(const RdsSeries& series);

}  // namespace marvel::io
