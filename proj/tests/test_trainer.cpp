#include <doctest.h>

#include <cmath>
#include <random>

#include "marvel/scenario.hpp"
#include "marvel/trainer.hpp"
#include "marvel/units.hpp"
#include "oracles.hpp"

using namespace marvel;
using namespace marvel::train;

namespace {

struct Series {
  std::vector<double> r, v;
  std::vector<std::uint8_t> done;
  double bootstrap = 0.0;
};

Series random_series(std::mt19937_64& rng, std::size_t n, bool with_cut) {
  std::normal_distribution<double> g(0.0, 1.0);
  Series s;
  for (std::size_t t = 0; t < n; ++t) {
    s.r.push_back(g(rng));
    s.v.push_back(g(rng));
    s.done.push_back(with_cut && t == n / 2 ? 1 : 0);
  }
  s.bootstrap = g(rng);
  return s;
}

Scenario short_desk() {
  Scenario s = builtin_scenario("desk");
  s.warmup_s = 120.0;
  s.episode_steps = 6;
  return s;
}

}  // namespace

TEST_CASE("GAE recursion matches the brute-force definition") {
  std::mt19937_64 rng(1);
  for (double lambda : {0.0, 0.95, 1.0}) {
    for (int trial = 0; trial < 20; ++trial) {
      const Series s = random_series(rng, 10, trial % 2 == 1);
      std::vector<double> adv(10), ret(10);
      compute_gae(s.r, s.v, s.done, s.bootstrap, 0.99, lambda, adv, ret);
      const auto want = oracle::gae(s.r, s.v, s.done, s.bootstrap, 0.99, lambda);
      for (int t = 0; t < 10; ++t) {
        CHECK(std::abs(adv[t] - want[t]) <= 1e-10);
        CHECK(std::abs(ret[t] - (adv[t] + s.v[t])) <= 1e-12);
      }
    }
  }
}

TEST_CASE("lambda 0 is the TD residual; lambda 1 is the discounted return minus V") {
  std::mt19937_64 rng(2);
  const Series s = random_series(rng, 10, false);
  std::vector<double> adv(10), ret(10);
  compute_gae(s.r, s.v, s.done, s.bootstrap, 0.99, 0.0, adv, ret);
  for (int t = 0; t < 10; ++t) {
    const double next = t + 1 < 10 ? s.v[t + 1] : s.bootstrap;
    CHECK(std::abs(adv[t] - (s.r[t] + 0.99 * next - s.v[t])) <= 1e-12);
  }
  compute_gae(s.r, s.v, s.done, s.bootstrap, 0.99, 1.0, adv, ret);
  for (int t = 0; t < 10; ++t) {
    const double g = oracle::discounted_return(s.r, s.done, s.bootstrap, 0.99, t);
    CHECK(std::abs(adv[t] - (g - s.v[t])) <= 1e-10);
  }
}

TEST_CASE("a truncated episode end splits into two independently bootstrapped series") {
  std::mt19937_64 rng(3);
  for (double lambda : {0.0, 0.95, 1.0}) {
    const Series s = random_series(rng, 10, true);
    std::vector<double> cut_values(10, 0.0);
    cut_values[5] = 1.7;
    std::vector<double> adv(10), ret(10);
    compute_gae(s.r, s.v, s.done, s.bootstrap, 0.99, lambda, adv, ret, cut_values);
    const std::vector<std::uint8_t> none(4, 0);
    const std::vector<double> r1(s.r.begin(), s.r.begin() + 6), v1(s.v.begin(), s.v.begin() + 6);
    const std::vector<double> r2(s.r.begin() + 6, s.r.end()), v2(s.v.begin() + 6, s.v.end());
    const auto head = oracle::gae(r1, v1, std::vector<std::uint8_t>(6, 0), 1.7, 0.99, lambda);
    const auto tail = oracle::gae(r2, v2, none, s.bootstrap, 0.99, lambda);
    for (int t = 0; t < 6; ++t) CHECK(std::abs(adv[t] - head[t]) <= 1e-10);
    for (int t = 0; t < 4; ++t) CHECK(std::abs(adv[6 + t] - tail[t]) <= 1e-10);
  }
}

TEST_CASE("zero rewards and values give zero advantages") {
  std::vector<double> z(10, 0.0), adv(10), ret(10);
  std::vector<std::uint8_t> d(10, 0);
  compute_gae(z, z, d, 0.0, 0.99, 0.95, adv, ret);
  for (double a : adv) CHECK(a == 0.0);
}

TEST_CASE("advantage normalization uses the population std") {
  std::vector<double> a = {1.0, 2.0, 3.0, 4.0};
  normalize_advantages(a);
  const double sd = std::sqrt(1.25);
  CHECK(a[0] == doctest::Approx(-1.5 / sd));
  CHECK(a[3] == doctest::Approx(1.5 / sd));
}

TEST_CASE("critic input sizes") {
  CHECK(critic_input_dim(Algorithm::kMappo, 4) == 24);
  CHECK(critic_input_dim(Algorithm::kMappo, 1) == 5);
  CHECK(critic_input_dim(Algorithm::kIppo, 8) == 5);
}

TEST_CASE("one episode per 120-step buffer on the desk corridor") {
  TrainConfig cfg;
  env::VslEnv env(builtin_scenario("desk"));
  Learner l = make_learner(cfg, env.num_agents());
  RolloutCursor cursor;
  const auto b = collect_rollout(env, l, cfg.batch_size, cursor);
  CHECK(b.samples() == 120 * 4);
  int dones = 0;
  for (auto d : b.dones) dones += d;
  CHECK(dones == 1);
  CHECK(b.dones.back() == 1);
  CHECK(l.episode_counter == 1);
  // The time-limit end bootstraps from the critic, never past it.
  REQUIRE(b.done_values.size() == b.samples());
  for (int t = 0; t + 1 < 120; ++t) {
    for (int i = 0; i < 4; ++i) CHECK(b.done_values[b.at(t, i)] == 0.0);
  }
  for (int i = 0; i < 4; ++i) CHECK(b.done_values[b.at(119, i)] != 0.0);
  for (double v : b.bootstrap) CHECK(v == 0.0);
}

TEST_CASE("treating the time limit as terminal leaves no truncation values") {
  TrainConfig cfg;
  cfg.time_limit_bootstrap = false;
  env::VslEnv env(short_desk());
  Learner l = make_learner(cfg, env.num_agents());
  RolloutCursor cursor;
  auto b = collect_rollout(env, l, 12, cursor);
  CHECK(b.done_values.empty());
  compute_gae(b, cfg.gamma, cfg.gae_lambda);
  // At a terminal end the advantage is the plain reward minus V.
  for (int i = 0; i < 4; ++i) {
    CHECK(b.advantages[b.at(5, i)] ==
          doctest::Approx(b.rewards[b.at(5, i)] - b.values[b.at(5, i)]));
  }
}

TEST_CASE("eight-agent buffer holds 120 x 8 transitions") {
  Scenario s = builtin_scenario("training");
  s.warmup_s = 60.0;
  env::VslEnv env(s);
  TrainConfig cfg;
  Learner l = make_learner(cfg, 8);
  RolloutCursor cursor;
  const auto b = collect_rollout(env, l, 120, cursor);
  CHECK(b.samples() == 960);
  CHECK(b.critic_in.size() == 960u * critic_input_dim(Algorithm::kMappo, 8));
}

TEST_CASE("same seed gives an identical buffer") {
  auto run = [] {
    TrainConfig cfg;
    cfg.seed = 9;
    env::VslEnv env(short_desk());
    Learner l = make_learner(cfg, env.num_agents());
    RolloutCursor cursor;
    return collect_rollout(env, l, 12, cursor);
  };
  const auto a = run(), b = run();
  CHECK(a.actions == b.actions);
  CHECK(a.rewards == b.rewards);
  CHECK(a.values == b.values);
  CHECK(a.obs == b.obs);
}

TEST_CASE("on-policy single pass: surrogate averages to zero") {
  TrainConfig cfg;
  cfg.ppo_epochs = 1;
  ToyEnv env(2);
  Learner l = make_learner(cfg, 2);
  RolloutCursor cursor;
  auto b = collect_rollout(env, l, 120, cursor);
  compute_gae(b, cfg.gamma, cfg.gae_lambda);
  const auto r = ppo_update(l, b);
  CHECK(std::abs(r.actor_loss) <= 1e-12);
  CHECK(r.entropy == doctest::Approx(std::log(5.0)).epsilon(1e-3));
}

TEST_CASE("toy bandit reaches 95% of the optimum within 5k steps") {
  TrainConfig cfg;
  cfg.training_step_max = 5000;
  cfg.batch_size = 40;
  ToyEnv env(1, 2);
  const auto res = train::train(cfg, env);
  REQUIRE(!res.curve.empty());
  CHECK(res.curve.back().mean_total >= 0.95);
}

TEST_CASE("zero step budget fires only the initial checkpoint") {
  TrainConfig cfg;
  cfg.training_step_max = 0;
  ToyEnv env;
  int fired = 0;
  TrainHooks hooks;
  hooks.on_checkpoint = [&](const Learner& l) {
    ++fired;
    CHECK(l.training_step == 0);
  };
  const auto res = train::train(cfg, env, hooks);
  CHECK(fired == 1);
  CHECK(res.curve.empty());
}

TEST_CASE("periodic checkpoints fire on boundaries and at the end") {
  TrainConfig cfg;
  cfg.training_step_max = 600;
  cfg.checkpoint_every = 240;
  ToyEnv env;
  std::vector<std::int64_t> steps;
  TrainHooks hooks;
  hooks.on_checkpoint = [&](const Learner& l) { steps.push_back(l.training_step); };
  train::train(cfg, env, hooks);
  CHECK(steps == std::vector<std::int64_t>{240, 480, 600});
}

TEST_CASE("resuming reproduces an uninterrupted run") {
  TrainConfig cfg;
  cfg.training_step_max = 480;
  ToyEnv env_a(2);
  const auto full = train::train(cfg, env_a);

  TrainConfig half = cfg;
  half.training_step_max = 240;
  ToyEnv env_b(2);
  const auto first = train::train(half, env_b);
  ToyEnv env_c(2);
  const auto rest = train::train(cfg, env_c, {}, &first.learner);
  const auto a = full.learner.actor.params(), b = rest.learner.actor.params();
  CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
  CHECK(rest.curve.back().mean_total == full.curve.back().mean_total);
}

TEST_CASE("same seed trains bit-identically") {
  TrainConfig cfg;
  cfg.training_step_max = 24;
  cfg.batch_size = 12;
  cfg.episode_length = 6;
  auto run = [&] {
    env::VslEnv env(short_desk());
    return train::train(cfg, env);
  };
  const auto a = run(), b = run();
  REQUIRE(a.curve.size() == b.curve.size());
  for (std::size_t k = 0; k < a.curve.size(); ++k) {
    CHECK(a.curve[k].mean_total == b.curve[k].mean_total);
    CHECK(a.curve[k].critic_loss == b.curve[k].critic_loss);
  }
}

TEST_CASE("config JSON round-trips and rejects unknown or invalid fields") {
  TrainConfig c;
  c.seed = 17;
  c.algorithm = Algorithm::kIppo;
  c.actor_lr = 1.25e-4;
  const auto back = config_from_json_text(config_to_json_text(c));
  CHECK(config_hash(back) == config_hash(c));
  CHECK(back.algorithm == Algorithm::kIppo);
  c.seed = 18;
  CHECK(config_hash(back) != config_hash(c));
  CHECK_THROWS_AS(config_from_json_text(R"({"sed": 3})"), ValidationError);
  CHECK_THROWS_AS(config_from_json_text(R"({"clip_eps": -1.0})"), ValidationError);
  CHECK_THROWS_AS(config_from_json_text("{not json"), ValidationError);
  CHECK_THROWS_AS(algorithm_from_string("dqn"), ValidationError);
  CHECK(algorithm_from_string("MAPPO") == Algorithm::kMappo);
}

TEST_CASE("defaults follow the published hyperparameters") {
  const TrainConfig c;
  CHECK(c.episode_length == 120);
  CHECK(c.batch_size == 120);
  CHECK(c.num_minibatch == 1);
  CHECK(c.ppo_epochs == 15);
  CHECK(c.actor_lr == 7e-4);
  CHECK(c.critic_lr == 5e-4);
  CHECK(c.entropy_coef == 0.05);
  CHECK(c.gamma == 0.99);
  CHECK(c.hidden_size == 64);
  CHECK(c.hidden_layers == 2);
}
