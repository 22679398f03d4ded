#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "marvel/controllers.hpp"
#include "marvel/csv_io.hpp"
#include "marvel/evaluation.hpp"
#include "marvel/metrics.hpp"
#include "marvel/scenario.hpp"
#include "marvel/units.hpp"

using namespace marvel;
using namespace marvel::metrics;

namespace {

std::vector<sensing::SensorReading> readings_with(int n, int congested) {
  std::vector<sensing::SensorReading> out(static_cast<std::size_t>(n));
  for (int g = 0; g < congested; ++g) out[static_cast<std::size_t>(g)].mean_speed_mph = 20.0;
  return out;
}

Scenario short_eval() {
  Scenario s = builtin_scenario("desk-eval");
  s.warmup_s = 300.0;
  s.episode_steps = 20;
  return s;
}

}  // namespace

TEST_CASE("cvs_step examples") {
  CHECK(cvs_step(60.0, 60.0) == 0.0);
  CHECK(cvs_step(30.0, 70.0) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(cvs_step(70.0, 30.0) == 0.0);
  CHECK(cvs_step(0.0, 0.0) == 0.0);
  CHECK(cvs_step(0.0, 50.0) == doctest::Approx(1.0));
}

TEST_CASE("cvs_step matches the two-point population coefficient of variation") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(1.0, 80.0);
  for (int k = 0; k < 1000; ++k) {
    const double a = u(rng), b = u(rng);
    const double mean = (a + b) / 2.0;
    const double sd = std::sqrt(((a - mean) * (a - mean) + (b - mean) * (b - mean)) / 2.0);
    const double want = a <= mean ? sd / mean : 0.0;
    CHECK(std::abs(cvs_step(a, b) - want) <= 1e-12);
  }
}

TEST_CASE("CVS is invariant to a common speed scale") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(1.0, 80.0), c(0.1, 10.0);
  for (int k = 0; k < 1000; ++k) {
    const double a = u(rng), b = u(rng), s = c(rng);
    CHECK(std::abs(cvs_step(a, b) - cvs_step(s * a, s * b)) <= 1e-12);
  }
}

TEST_CASE("normalized CVS examples") {
  const std::vector<double> low(10, 0.05);
  const auto flagged = normalized_cvs(low, 0.1);
  CHECK(flagged.flagged);
  CHECK(flagged.value == 0.0);
  const auto mixed = normalized_cvs(std::vector<double>{0.2, 0.4, 0.05}, 0.1);
  CHECK(mixed.value == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(mixed.exceedances == 2);
  CHECK(normalized_cvs(std::vector<double>{0.15}, 0.1).value == doctest::Approx(0.15));
  CHECK(normalized_cvs(std::vector<double>{0.1}, 0.1).flagged);  // strict exceedance
}

TEST_CASE("queue length examples") {
  CHECK(queue_length(readings_with(34, 0)) == 0.0);
  CHECK(queue_length(readings_with(34, 12)) == doctest::Approx(6.0));
  CHECK(queue_length(readings_with(34, 34)) == doctest::Approx(17.0));
  auto r = readings_with(3, 0);
  r[1].mean_speed_mph = 35.0;  // at the threshold is not congested
  CHECK(queue_length(r) == 0.0);
}

TEST_CASE("queue length is monotone in the congested set") {
  std::mt19937_64 rng(4);
  std::bernoulli_distribution coin(0.3);
  for (int trial = 0; trial < 200; ++trial) {
    auto r = readings_with(20, 0);
    for (auto& x : r) x.mean_speed_mph = coin(rng) ? 20.0 : 60.0;
    const double before = queue_length(r);
    r[static_cast<std::size_t>(trial % 20)].mean_speed_mph = 10.0;
    CHECK(queue_length(r) >= before);
  }
}

TEST_CASE("violation count examples") {
  std::vector<EpisodeLogRow> log;
  for (int t = 0; t < 3; ++t) {
    for (int i = 0; i < 4; ++i) log.push_back({t, i, 30.0, 20.0});
  }
  auto v = violation_counts(log);
  CHECK(v.adaptation == 0);
  CHECK(v.stepdown == 0);

  log = {{0, 0, 40.0, 30.0}};
  CHECK(violation_counts(log).adaptation == 1);
  log = {{0, 0, 40.0, 35.0}};
  CHECK(violation_counts(log).adaptation == 1);
  log = {{0, 0, 40.0, 35.5}};
  CHECK(violation_counts(log).adaptation == 0);

  log = {{0, 0, 30.0, 60.0}, {0, 1, 70.0, 60.0}};
  v = violation_counts(log);
  CHECK(v.stepdown == 1);
  log = {{0, 0, 30.0, 60.0}, {0, 1, 40.0, 60.0}, {0, 2, 50.0, 60.0}};
  CHECK(violation_counts(log).stepdown == 0);
  log = {{0, 0, 70.0, 60.0}, {0, 1, 30.0, 60.0}};
  CHECK(violation_counts(log).stepdown == 0);
}

TEST_CASE("config validation") {
  SafetyMetricConfig c;
  CHECK_NOTHROW(c.validate());
  c.alpha = 1.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.congestion_speed = 0.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("aggregate uses the population std") {
  const auto a = eval::aggregate(std::vector<double>{2.0, 4.0});
  CHECK(a.mean == 3.0);
  CHECK(a.std == 1.0);
  const auto one = eval::aggregate(std::vector<double>{5.0});
  CHECK(one.std == 0.0);
}

TEST_CASE("one seed gives zero spread and grids of the right shape") {
  const Scenario s = short_eval();
  control::NoControl nc;
  const auto seeds = eval::evaluation_seeds(7, 1);
  const auto res = eval::run_evaluation(s, nc, seeds);
  REQUIRE(res.report.completed == 1);
  CHECK(res.report.adaptation.std == 0.0);
  CHECK(res.report.max_queue_mi.std == 0.0);
  const auto& rec = res.records[0];
  CHECK(rec.speed.rows() == s.layout.gantry_count());
  CHECK(rec.speed.cols == s.episode_steps);
  CHECK(rec.limits.cols == s.episode_steps);
  for (double v : rec.limits.values) CHECK(v == 70.0);
  CHECK(rec.log.size() == static_cast<std::size_t>(s.episode_steps) * s.agent_gantries.size());
}

TEST_CASE("violation counts recomputed from the exported log match the run") {
  const Scenario s = short_eval();
  control::SpeedMatching sm;
  const auto rec = eval::evaluate_seed(s, sm, 3);
  std::stringstream ss;
  io::write_episode_log(ss, rec.log);
  const auto back = io::read_episode_log(ss);
  CHECK(back == rec.log);
  const auto v = violation_counts(back);
  CHECK(v.adaptation == rec.metrics.adaptation);
  CHECK(v.stepdown == rec.metrics.stepdown);
}

TEST_CASE("evaluation is deterministic per seed and equal serial vs parallel") {
  const Scenario s = short_eval();
  control::SpeedMatching sm;
  const auto seeds = eval::evaluation_seeds(1, 3);
  const auto a = eval::run_evaluation(s, sm, seeds);
  const auto b = eval::run_evaluation_serial(s, sm, seeds);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    CHECK(a.records[k].log == b.records[k].log);
    CHECK(a.records[k].speed == b.records[k].speed);
  }
  CHECK(a.report.normalized_cvs.mean == b.report.normalized_cvs.mean);
}

TEST_CASE("report formatting lists every controller") {
  eval::EvaluationReport r;
  r.controller = "no-control";
  r.scenario = "desk-eval";
  const std::vector<eval::EvaluationReport> reports{r};
  const std::string text = eval::format_report(reports);
  CHECK(text.find("no-control") != std::string::npos);
  std::stringstream ss;
  io::write_report_csv(ss, reports);
  std::string header;
  std::getline(ss, header);
  CHECK(header == io::kReportHeader);
}
