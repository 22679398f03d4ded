#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "marvel/reward.hpp"
#include "marvel/scenario.hpp"
#include "marvel/vsl_env.hpp"

using namespace marvel;
using namespace marvel::env;

namespace {

double r3_oracle(double nu) {
  const double c = std::min(std::max(nu, 0.0), 70.0);
  return (std::exp(c / 70.0) - 1.0) / (std::numbers::e - 1.0);
}

Scenario tiny_scenario() {
  Scenario s = builtin_scenario("desk");
  s.warmup_s = 120.0;
  s.episode_steps = 3;
  return s;
}

}  // namespace

TEST_CASE("adaptability term") {
  CHECK(reward_adaptability(30, 40) == -10.0);
  CHECK(reward_adaptability(30, 30) == 0.0);
  CHECK(reward_adaptability(35, 70) == -10.0);
  CHECK(reward_adaptability(35.1, 70) == 0.0);
}

TEST_CASE("step-down term, every branch") {
  CHECK(reward_stepdown(40, 50, false) == 2.0);
  CHECK(reward_stepdown(50, 60, false) == 2.0);
  CHECK(reward_stepdown(60, 70, false) == 2.0);
  CHECK(reward_stepdown(70, 70, false) == 2.0);
  CHECK(reward_stepdown(30, 30, false) == 0.0);
  CHECK(reward_stepdown(30, 40, false) == 0.0);
  CHECK(reward_stepdown(30, 60, false) == -6.0);
  CHECK(reward_stepdown(30, 70, false) == -8.0);
  CHECK(reward_stepdown(40, 70, false) == -6.0);
  CHECK(reward_stepdown(70, 60, false) == 0.0);
  CHECK(reward_stepdown(50, 50, false) == 0.0);
  for (double p : kActionValuesMph) {
    for (double a : kActionValuesMph) CHECK(reward_stepdown(p, a, true) == 0.0);
  }
}

TEST_CASE("mobility term") {
  CHECK(reward_mobility(70) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(reward_mobility(90) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(reward_mobility(0) == 0.0);
  CHECK(std::abs(reward_mobility(35) - (std::exp(0.5) - 1.0) / (std::numbers::e - 1.0)) <= 1e-12);
  CHECK(reward_mobility(35) == doctest::Approx(0.3775).epsilon(1e-4));
  for (double nu = 0; nu <= 80; nu += 0.7) CHECK(std::abs(reward_mobility(nu) - r3_oracle(nu)) <= 1e-12);
}

TEST_CASE("combined rewards match hand-composed totals") {
  const RewardWeights w;
  const double r3_30 = r3_oracle(30.0);
  CHECK(r3_30 == doctest::Approx(0.3115).epsilon(1e-3));

  // Congested agent posting 30 behind a 70: only mobility counts.
  auto a = compute_rewards(std::vector<double>{70, 30}, std::vector<double>{70, 30}, w);
  CHECK(std::abs(a[1].total - 0.5 * r3_30) <= 1e-12);
  CHECK(a[1].total == doctest::Approx(0.156).epsilon(1e-3));

  // Free-flow agent matching a 70 downstream.
  auto b = compute_rewards(std::vector<double>{70, 70}, std::vector<double>{70, 70}, w);
  CHECK(std::abs(b[1].total - 1.1) <= 1e-12);

  // Congested agent posting 70 behind a 30.
  auto c = compute_rewards(std::vector<double>{30, 70}, std::vector<double>{30, 30}, w);
  CHECK(std::abs(c[1].total - (0.2 * -10.0 + 0.3 * -8.0 + 0.5 * r3_30)) <= 1e-12);
  CHECK(c[1].total == doctest::Approx(-4.244).epsilon(1e-3));

  // Agent 0 is exempt from the step-down term.
  CHECK(c[0].r2 == 0.0);
}

TEST_CASE("total reward stays inside [-4.4, 1.1] over the whole action/speed grid") {
  const RewardWeights w;
  for (double p : kActionValuesMph) {
    for (double a : kActionValuesMph) {
      for (double nu = 0.0; nu <= 80.0; nu += 2.5) {
        const auto r = compute_rewards(std::vector<double>{p, a}, std::vector<double>{nu, nu}, w);
        CHECK(r[1].total >= -4.4 - 1e-12);
        CHECK(r[1].total <= 1.1 + 1e-12);
      }
    }
  }
}

TEST_CASE("length mismatch and bad action values are errors") {
  CHECK_THROWS_AS(compute_rewards(std::vector<double>{70, 70}, std::vector<double>{70}),
                  std::invalid_argument);
  CHECK_THROWS_AS(action_index(65.0), std::invalid_argument);
  CHECK(action_index(50.0) == 2);
  CHECK(action_value(4) == 70.0);
}

TEST_CASE("observation layout and normalization") {
  sensing::SensorReading local, up;
  local.mean_speed_mph = 35.0;
  local.occupancy = 0.2;
  up.mean_speed_mph = 70.0;
  up.occupancy = 0.05;
  const auto o = build_observation(40.0, local, up);
  const ObsVector raw = o.raw();
  CHECK(raw == ObsVector{40.0, 35.0, 0.2, 70.0, 0.05});
  const ObsVector n = o.normalized();
  CHECK(n == ObsVector{40.0 / 70.0, 0.5, 0.2, 1.0, 0.05});
  const std::vector<ObsVector> two = {n, n};
  CHECK(global_state(two).size() == 10);
}

namespace {

// Deterministic stand-in used for the sequential protocol.
class EchoEnv : public MultiAgentEnv {
 public:
  explicit EchoEnv(int n) : n_(n) {}
  int num_agents() const override { return n_; }
  void reset(std::uint64_t) override {}
  ObsVector observe(int, double prev) const override { return {prev, 0, 0, 0, 0}; }
  StepResult step(std::span<const int>) override { return {}; }
  bool done() const override { return false; }

 private:
  int n_;
};

}  // namespace

TEST_CASE("sequential protocol unrolls downstream-first") {
  EchoEnv env(8);
  const auto all70 = sequential_decide(env, [](int, const ObsVector&, double) { return 4; });
  CHECK(all70 == std::vector<int>(8, 4));

  const auto copy = sequential_decide(
      env, [](int, const ObsVector&, double prev) { return action_index(prev); });
  CHECK(copy == std::vector<int>(8, 4));

  const auto ramp = sequential_decide(env, [](int agent, const ObsVector& obs, double prev) {
    if (agent == 0) return 0;
    CHECK(obs[0] == prev);
    return action_index(std::min(prev + 10.0, 70.0));
  });
  CHECK(ramp == std::vector<int>{0, 1, 2, 3, 4, 4, 4, 4});

  CHECK_THROWS_AS(sequential_decide(env, [](int, const ObsVector&, double) { return 5; }),
                  std::invalid_argument);
}

TEST_CASE("training scenario deploys 8 agents over 15 gantries") {
  const Scenario s = builtin_scenario("training");
  CHECK(s.layout.gantry_count() == 15);
  CHECK(s.agent_count() == 8);
  VslEnv env(s);
  CHECK(env.num_agents() == 8);
}

TEST_CASE("env episode runs to done and rejects extra steps") {
  VslEnv env(tiny_scenario());
  CHECK_THROWS_AS(env.step(std::vector<int>(4, 4)), std::logic_error);
  env.reset(3);
  for (int a = 0; a < env.num_agents(); ++a) CHECK(env.observation(a, 70.0).prev_action_mph == 70.0);
  int steps = 0;
  while (!env.done()) {
    const auto r = env.step(std::vector<int>(4, 4));
    CHECK(r.rewards.size() == 4);
    ++steps;
  }
  CHECK(steps == 3);
  CHECK_THROWS_AS(env.step(std::vector<int>(4, 4)), std::logic_error);
}

TEST_CASE("default episode length is 120 steps") {
  CHECK(builtin_scenario("desk").episode_steps == 120);
}

TEST_CASE("all-70 on an empty road scores the free-flow total") {
  Scenario s = tiny_scenario();
  s.demand.mainline = sim::RateSchedule::constant(0.0, s.horizon_s());
  s.demand.per_ramp = {sim::RateSchedule::constant(0.0, s.horizon_s())};
  VslEnv env(s);
  env.reset(1);
  const auto r = env.step(std::vector<int>(4, 4));
  CHECK(std::abs(r.rewards[0].total - 0.5) <= 1e-12);  // most downstream: no step-down term
  for (int i = 1; i < 4; ++i) CHECK(std::abs(r.rewards[i].total - (0.3 * 2.0 + 0.5)) <= 1e-12);
}

TEST_CASE("same seed and actions give identical observations and rewards") {
  auto run = [] {
    VslEnv env(tiny_scenario());
    env.reset(77);
    std::vector<double> out;
    for (int a = 0; a < 4; ++a) {
      for (double v : env.observe(a, 70.0)) out.push_back(v);
    }
    std::mt19937_64 rng(5);
    while (!env.done()) {
      std::vector<int> acts(4);
      for (auto& x : acts) x = static_cast<int>(rng() % 5);
      for (const auto& r : env.step(acts).rewards) out.push_back(r.total);
    }
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("upstream reading of the last gantry falls back to its own") {
  VslEnv env(tiny_scenario());
  env.reset(2);
  const auto& s = env.scenario();
  const int last = s.agent_count() - 1;
  REQUIRE(s.agent_gantries[last] == s.layout.gantry_count() - 1);
  CHECK(&env.upstream_reading(last) == &env.agent_reading(last));
}
