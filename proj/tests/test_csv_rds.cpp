#include <doctest.h>

#include <random>
#include <sstream>

#include "marvel/csv_io.hpp"
#include "marvel/rds.hpp"
#include "marvel/units.hpp"

using namespace marvel;
using namespace marvel::io;

namespace {

std::string header() { return std::string(kRdsHeader) + "\n"; }

}  // namespace

TEST_CASE("format_double round-trips") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int k = 0; k < 1000; ++k) {
    const double v = u(rng) * std::pow(10.0, (k % 21) - 10);
    CHECK(parse_double(format_double(v), "v") == v);
  }
  CHECK(format_double(70.0) == "70");
  CHECK_THROWS_AS(parse_double("12abc", "speed"), ValidationError);
  CHECK_THROWS_AS(parse_double("", "speed"), ValidationError);
}

TEST_CASE("episode log round-trip") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-5.0, 70.0);
  std::vector<metrics::EpisodeLogRow> rows;
  for (int t = 0; t < 20; ++t) {
    for (int i = 0; i < 4; ++i) {
      rows.push_back({t, i, 30.0 + 10.0 * ((t + i) % 5), u(rng), u(rng) / 100.0, u(rng), u(rng),
                      u(rng), u(rng)});
    }
  }
  std::stringstream ss;
  write_episode_log(ss, rows);
  std::string first;
  std::getline(std::stringstream(ss.str()), first);
  CHECK(first == kEpisodeLogHeader);
  CHECK(read_episode_log(ss) == rows);
}

TEST_CASE("grid round-trip") {
  eval::Grid g;
  g.milepoints = {0.25, 0.75, 1.25};
  g.cols = 4;
  for (int k = 0; k < 12; ++k) g.values.push_back(30.0 + k * 1.1);
  std::stringstream ss;
  write_grid(ss, g);
  std::string first;
  std::getline(std::stringstream(ss.str()), first);
  CHECK(first == "gantry,milepoint,0,1,2,3");
  CHECK(read_grid(ss) == g);
}

TEST_CASE("learning curve round-trip") {
  std::vector<train::CurvePoint> pts;
  for (int k = 1; k <= 5; ++k) {
    pts.push_back({120 * k, 3, 0.1 * k, -0.5, 0.3, 0.6, -0.01 * k, 0.2 / k, 1.6 - 0.1 * k});
  }
  std::stringstream ss;
  write_learning_curve(ss, pts);
  const auto back = read_learning_curve(ss);
  REQUIRE(back.size() == pts.size());
  for (std::size_t k = 0; k < pts.size(); ++k) {
    CHECK(back[k].step == pts[k].step);
    CHECK(back[k].mean_total == pts[k].mean_total);
    CHECK(back[k].entropy == pts[k].entropy);
  }
}

TEST_CASE("RDS parser: header only gives an empty series") {
  const auto s = parse_rds_text(header());
  CHECK(s.records.empty());
  CHECK(s.rejected.empty());
}

TEST_CASE("RDS parser: one valid row") {
  const auto s = parse_rds_text(header() + "27000,S1,54.3,61.5,0.12,1500\n");
  REQUIRE(s.records.size() == 1);
  const auto& r = s.records[0];
  CHECK(r.timestamp == 27000.0);
  CHECK(r.sensor_id == "S1");
  CHECK(r.milemarker == 54.3);
  CHECK(r.speed_mph == 61.5);
  CHECK(r.occupancy == 0.12);
  CHECK(r.volume == 1500.0);
}

TEST_CASE("RDS parser: out-of-range occupancy is rejected with its line") {
  const auto s = parse_rds_text(header() + "0,S1,1.0,60,0.1,900\n60,S1,1.0,60,1.4,900\n");
  CHECK(s.records.size() == 1);
  REQUIRE(s.rejected.size() == 1);
  CHECK(s.rejected[0].line == 3);
  CHECK(s.rejected[0].reason.find("occupancy") != std::string::npos);
}

TEST_CASE("RDS parser: malformed rows, missing columns and gaps") {
  const auto s = parse_rds_text(header() + "0,S1,1.0,sixty,0.1,900\n0,S2,1.5,60,0.1\n" +
                                "0,S3,2.0,-4,0.1,900\n");
  CHECK(s.records.empty());
  CHECK(s.rejected.size() == 3);
  CHECK_THROWS_AS(parse_rds_text("timestamp,sensor_id,speed_mph\n"), ValidationError);
  CHECK_THROWS_AS(parse_rds_text(""), ValidationError);

  const auto g = parse_rds_text(header() + "0,S1,1.0,60,0.1,900\n300,S1,1.0,60,0.1,900\n");
  CHECK(g.records.size() == 2);
  CHECK(g.gaps.size() == 1);
}

TEST_CASE("RDS parser: columns are matched by name and rows sorted") {
  const auto s = parse_rds_text(
      "sensor_id,timestamp,volume,speed_mph,occupancy,milemarker\n"
      "S2,60,900,55,0.2,2.0\nS1,60,900,50,0.2,1.0\nS1,0,900,65,0.1,1.0\n");
  REQUIRE(s.records.size() == 3);
  CHECK(s.records[0].timestamp == 0.0);
  CHECK(s.records[1].sensor_id == "S1");
  CHECK(s.records[2].sensor_id == "S2");
  CHECK(s.records[2].milemarker == 2.0);
}

TEST_CASE("RDS export then parse reproduces the series") {
  std::vector<sensing::SensorReading> readings(3);
  for (int k = 0; k < 3; ++k) {
    readings[k].sensor_id = k;
    readings[k].window_end_s = 660.0;
    readings[k].mean_speed_mph = 40.0 + 7.3 * k;
    readings[k].occupancy = 0.05 * (k + 1);
    readings[k].volume_vph = 1200.0 + k;
  }
  const std::vector<double> mm{0.35, 0.85, 1.35};
  const auto records = readings_to_records(readings, mm);
  std::stringstream ss;
  write_rds_csv(ss, records);
  const auto back = parse_rds_text(ss.str());
  CHECK(back.records == records);
}

TEST_CASE("sensor assignment examples") {
  const std::vector<double> gantries{53.5, 54.0, 54.5, 55.0};
  SUBCASE("between two gantries goes to the downstream one") {
    const std::vector<double> sensors{54.3};
    const auto a = assign_sensors(gantries, sensors);
    CHECK(a.gantry_of_sensor[0] == 1);
    CHECK(a.warnings.empty());
  }
  SUBCASE("sensors at the gantries map one to one") {
    const auto a = assign_sensors(gantries, gantries);
    for (int k = 0; k < 4; ++k) CHECK(a.gantry_of_sensor[k] == k);
  }
  SUBCASE("outside the corridor snaps to an end with a warning") {
    const std::vector<double> sensors{53.0, 58.0};
    const auto a = assign_sensors(gantries, sensors);
    CHECK(a.gantry_of_sensor[0] == 0);
    CHECK(a.gantry_of_sensor[1] == 3);
    CHECK(a.warnings.size() == 2);
  }
}

TEST_CASE("sensor assignment is a partition") {
  std::vector<double> gantries;
  for (int g = 0; g < 34; ++g) gantries.push_back(0.25 + 0.5 * g);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 17.5);
  std::vector<double> sensors(200);
  for (auto& s : sensors) s = u(rng);
  std::sort(sensors.begin(), sensors.end());
  const auto a = assign_sensors(gantries, sensors);
  std::vector<int> seen(sensors.size(), 0);
  for (std::size_t g = 0; g < a.sensors.size(); ++g) {
    for (std::size_t s : a.sensors[g]) {
      ++seen[s];
      CHECK(a.gantry_of_sensor[s] == static_cast<int>(g));
    }
  }
  for (int c : seen) CHECK(c == 1);
}
