#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "marvel/sensing.hpp"

namespace marvel::metrics {

struct SafetyMetricConfig {
  double alpha = 0.1;
  double congestion_speed = 35.0;
  double segment_length_mi = 0.5;
  double a_diff = 10.0;

  void validate() const;
};

// sigma / mean of the two-point sample {v_i, v_up} when the gantry is the
// slower of the pair, else 0. Both speeds zero gives 0.
double cvs_step(double v_i, double v_up);

struct NormalizedCvs {
  double value = 0.0;
  bool flagged = false;  // nothing exceeded alpha, value forced to 0
  std::size_t exceedances = 0;
};

// Mean of the CVS values strictly above alpha.
NormalizedCvs normalized_cvs(std::span<const double> cvs, double alpha);

// segment_length x number of gantries reading below congestion_speed.
double queue_length(std::span<const sensing::SensorReading> readings,
                    const SafetyMetricConfig& config = {});

// One row of an episode log: one agent at one control step.
struct EpisodeLogRow {
  int step = 0;
  int agent = 0;
  double action_mph = 70.0;
  double nu = 70.0;
  double occ = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
  double r3 = 0.0;
  double total = 0.0;

  bool operator==(const EpisodeLogRow&) const = default;
};

struct ViolationCounts {
  std::int64_t adaptation = 0;
  std::int64_t stepdown = 0;
};

// Adaptation: nu <= congestion_speed while not posting 30. Step-down: an
// agent more than a_diff above its downstream neighbour at the same step
// (agent 0 exempt).
ViolationCounts violation_counts(std::span<const EpisodeLogRow> log,
                                 const SafetyMetricConfig& config = {});

}  // namespace marvel::metrics
