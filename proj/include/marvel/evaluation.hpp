#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "marvel/controllers.hpp"
#include "marvel/metrics.hpp"
#include "marvel/scenario.hpp"

namespace marvel::eval {

// Gantry x control-step matrix, rows downstream-first.
struct Grid {
  std::vector<double> milepoints;  // one per row
  int cols = 0;
  std::vector<double> values;  // row-major

  int rows() const { return static_cast<int>(milepoints.size()); }
  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  bool operator==(const Grid&) const = default;
};

struct RunMetrics {
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  std::int64_t adaptation = 0;
  std::int64_t stepdown = 0;
  double normalized_cvs = 0.0;
  bool cvs_flagged = false;
  double max_queue_mi = 0.0;
};

struct RunRecord {
  RunMetrics metrics;
  std::vector<metrics::EpisodeLogRow> log;
  Grid speed;   // critical reading speed, mph
  Grid limits;  // posted limit, mph
};

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // population
};

struct EvaluationReport {
  std::string controller;
  std::string scenario;
  std::vector<RunMetrics> runs;
  int completed = 0;
  Aggregate adaptation;
  Aggregate stepdown;
  Aggregate normalized_cvs;
  Aggregate max_queue_mi;
};

struct EvaluationResult {
  EvaluationReport report;
  std::vector<RunRecord> records;  // same order as the seeds
};

// One closed-loop episode: warm-up, then episode_steps control steps where
// the controller sees the latest readings and its limits are applied.
RunRecord evaluate_seed(const Scenario& scenario, control::Controller& controller,
                        std::uint64_t seed, const metrics::SafetyMetricConfig& config = {});

// Seeds run in parallel, each with its own clone of `prototype`; a failing
// seed is recorded and left out of the aggregate.
EvaluationResult run_evaluation(const Scenario& scenario, const control::Controller& prototype,
                                std::span<const std::uint64_t> seeds,
                                const metrics::SafetyMetricConfig& config = {});
// Same computation one seed after another.
EvaluationResult run_evaluation_serial(const Scenario& scenario,
                                       const control::Controller& prototype,
                                       std::span<const std::uint64_t> seeds,
                                       const metrics::SafetyMetricConfig& config = {});

std::vector<std::uint64_t> evaluation_seeds(std::uint64_t base, int count);
Aggregate aggregate(std::span<const double> values);
void finalize_report(EvaluationReport& report);

// Plain-text table of mean +- std per metric.
std::string format_report(std::span<const EvaluationReport> reports);

}  // namespace marvel::eval
