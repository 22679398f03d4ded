#include "marvel/metrics.hpp"

#include <cmath>
#include <map>
#include <utility>

#include "marvel/units.hpp"

namespace marvel::metrics {

void SafetyMetricConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  if (!(congestion_speed > 0.0)) throw ValidationError("congestion_speed must be > 0");
  if (!(segment_length_mi > 0.0)) throw ValidationError("segment_length must be > 0");
}

double cvs_step(double v_i, double v_up) {
  const double mean = 0.5 * (v_i + v_up);
  if (!(mean > 0.0)) return 0.0;
  if (v_i > mean) return 0.0;
  return 0.5 * std::abs(v_i - v_up) / mean;
}

NormalizedCvs normalized_cvs(std::span<const double> cvs, double alpha) {
  NormalizedCvs out;
  double sum = 0.0;
  for (double c : cvs) {
    if (c > alpha) {
      sum += c;
      ++out.exceedances;
    }
  }
  if (out.exceedances == 0) {
    out.flagged = true;
    return out;
  }
  out.value = sum / static_cast<double>(out.exceedances);
  return out;
}

double queue_length(std::span<const sensing::SensorReading> readings,
                    const SafetyMetricConfig& config) {
  int congested = 0;
  for (const auto& r : readings) {
    if (r.mean_speed_mph < config.congestion_speed) ++congested;
  }
  return config.segment_length_mi * congested;
}

ViolationCounts violation_counts(std::span<const EpisodeLogRow> log,
                                 const SafetyMetricConfig& config) {
  ViolationCounts out;
  std::map<std::pair<int, int>, double> action;
  for (const auto& row : log) action[{row.step, row.agent}] = row.action_mph;
  for (const auto& row : log) {
    if (row.nu <= config.congestion_speed && row.action_mph != 30.0) ++out.adaptation;
    if (row.agent == 0) continue;
    const auto it = action.find({row.step, row.agent - 1});
    if (it != action.end() && row.action_mph > it->second + config.a_diff) ++out.stepdown;
  }
  return out;
}

}  // namespace marvel::metrics
