#include "marvel/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "marvel/reward.hpp"
#include "marvel/vsl_env.hpp"

namespace marvel::eval {

RunRecord evaluate_seed(const Scenario& scenario, control::Controller& controller,
                        std::uint64_t seed, const metrics::SafetyMetricConfig& config) {
  RunRecord rec;
  rec.metrics.seed = seed;
  env::VslEnv env(scenario);
  env.reset(seed);
  controller.reset();
  const auto& layout = scenario.layout;
  const int n_g = layout.gantry_count();
  const int steps = scenario.episode_steps;
  rec.speed.milepoints = layout.gantry_milepoints;
  rec.speed.cols = steps;
  rec.speed.values.assign(static_cast<std::size_t>(n_g) * steps, 0.0);
  rec.limits = rec.speed;

  std::vector<double> cvs;
  const int n = env.num_agents();
  for (int t = 0; t < steps; ++t) {
    const control::ControlContext ctx{env.readings(), layout.gantry_milepoints,
                                      scenario.agent_gantries};
    const std::vector<double> limits = controller.decide(ctx);
    if (static_cast<int>(limits.size()) != n) {
      throw std::runtime_error("controller returned the wrong number of limits");
    }
    std::vector<int> idx(limits.size());
    for (std::size_t i = 0; i < limits.size(); ++i) idx[i] = env::action_index(limits[i]);
    const env::StepResult res = env.step(idx);

    for (int i = 0; i < n; ++i) {
      const auto& r = env.agent_reading(i);
      const auto& rb = res.rewards[static_cast<std::size_t>(i)];
      rec.log.push_back(metrics::EpisodeLogRow{t, i, limits[static_cast<std::size_t>(i)],
                                               r.mean_speed_mph, r.occupancy, rb.r1, rb.r2,
                                               rb.r3, rb.total});
      if (rb.r1 < 0.0) ++rec.metrics.adaptation;
      if (i > 0 && limits[static_cast<std::size_t>(i)] >
                       limits[static_cast<std::size_t>(i) - 1] + config.a_diff) {
        ++rec.metrics.stepdown;
      }
      const int g = scenario.agent_gantries[static_cast<std::size_t>(i)];
      if (g + 1 < n_g) {
        cvs.push_back(metrics::cvs_step(r.mean_speed_mph,
                                        env.readings()[static_cast<std::size_t>(g) + 1].mean_speed_mph));
      }
    }
    for (int g = 0; g < n_g; ++g) {
      rec.speed.at(g, t) = env.readings()[static_cast<std::size_t>(g)].mean_speed_mph;
      rec.limits.at(g, t) = env.posted_limits()[static_cast<std::size_t>(g)];
    }
    rec.metrics.max_queue_mi =
        std::max(rec.metrics.max_queue_mi, metrics::queue_length(env.readings(), config));
  }
  const metrics::NormalizedCvs ncvs = metrics::normalized_cvs(cvs, config.alpha);
  rec.metrics.normalized_cvs = ncvs.value;
  rec.metrics.cvs_flagged = ncvs.flagged;
  return rec;
}

std::vector<std::uint64_t> evaluation_seeds(std::uint64_t base, int count) {
  std::vector<std::uint64_t> out;
  for (int k = 0; k < count; ++k) out.push_back(base + static_cast<std::uint64_t>(k));
  return out;
}

Aggregate aggregate(std::span<const double> values) {
  Aggregate a;
  if (values.empty()) return a;
  const double n = static_cast<double>(values.size());
  for (double v : values) a.mean += v;
  a.mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - a.mean) * (v - a.mean);
  a.std = std::sqrt(var / n);
  return a;
}

void finalize_report(EvaluationReport& report) {
  std::vector<double> ad, sd, cv, q;
  for (const auto& r : report.runs) {
    if (!r.ok) continue;
    ad.push_back(static_cast<double>(r.adaptation));
    sd.push_back(static_cast<double>(r.stepdown));
    cv.push_back(r.normalized_cvs);
    q.push_back(r.max_queue_mi);
  }
  report.completed = static_cast<int>(ad.size());
  report.adaptation = aggregate(ad);
  report.stepdown = aggregate(sd);
  report.normalized_cvs = aggregate(cv);
  report.max_queue_mi = aggregate(q);
}

namespace {

RunRecord guarded_run(const Scenario& scenario, const control::Controller& prototype,
                      std::uint64_t seed, const metrics::SafetyMetricConfig& config) {
  try {
    auto controller = prototype.clone();
    return evaluate_seed(scenario, *controller, seed, config);
  } catch (const std::exception& e) {
    RunRecord failed;
    failed.metrics.seed = seed;
    failed.metrics.ok = false;
    failed.metrics.error = e.what();
    return failed;
  }
}

EvaluationResult assemble(const Scenario& scenario, const control::Controller& prototype,
                          std::vector<RunRecord> records) {
  EvaluationResult out;
  out.report.controller = prototype.name();
  out.report.scenario = scenario.name;
  for (const auto& r : records) out.report.runs.push_back(r.metrics);
  finalize_report(out.report);
  out.records = std::move(records);
  return out;
}

}  // namespace

EvaluationResult run_evaluation(const Scenario& scenario, const control::Controller& prototype,
                                std::span<const std::uint64_t> seeds,
                                const metrics::SafetyMetricConfig& config) {
  config.validate();
  std::vector<RunRecord> records(seeds.size());
  const long long n = static_cast<long long>(seeds.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long long k = 0; k < n; ++k) {
    records[static_cast<std::size_t>(k)] =
        guarded_run(scenario, prototype, seeds[static_cast<std::size_t>(k)], config);
  }
  return assemble(scenario, prototype, std::move(records));
}

EvaluationResult run_evaluation_serial(const Scenario& scenario,
                                       const control::Controller& prototype,
                                       std::span<const std::uint64_t> seeds,
                                       const metrics::SafetyMetricConfig& config) {
  config.validate();
  std::vector<RunRecord> records;
  for (std::uint64_t s : seeds) records.push_back(guarded_run(scenario, prototype, s, config));
  return assemble(scenario, prototype, std::move(records));
}

std::string format_report(std::span<const EvaluationReport> reports) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-18s %-10s %5s %16s %16s %16s %16s\n", "controller",
                "scenario", "runs", "adaptation", "step-down", "norm. CVS", "max queue (mi)");
  os << line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line,
                  "%-18s %-10s %5d %8.1f +- %-5.1f %8.1f +- %-5.1f %8.3f +- %-5.3f %8.2f +- %-5.2f\n",
                  r.controller.c_str(), r.scenario.c_str(), r.completed, r.adaptation.mean,
                  r.adaptation.std, r.stepdown.mean, r.stepdown.std, r.normalized_cvs.mean,
                  r.normalized_cvs.std, r.max_queue_mi.mean, r.max_queue_mi.std);
    os << line;
    for (const auto& run : r.runs) {
      if (!run.ok) os << "  seed " << run.seed << " failed: " << run.error << "\n";
    }
  }
  return os.str();
}

}  // namespace marvel::eval
