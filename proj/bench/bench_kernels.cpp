#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "marvel/controllers.hpp"
#include "marvel/evaluation.hpp"
#include "marvel/kernels.hpp"
#include "marvel/mlp.hpp"
#include "marvel/scenario.hpp"
#include "marvel/trainer.hpp"

namespace {

using namespace marvel;

struct GradientFixture {
  nn::Mlp net{{5, 64, 64, 5}};
  std::vector<std::vector<double>> inputs;
  std::vector<int> targets;

  GradientFixture() {
    std::mt19937_64 rng(7);
    net.init_orthogonal(rng);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 480; ++i) {
      inputs.push_back({u(rng), u(rng), u(rng), u(rng), u(rng)});
      targets.push_back(i % 5);
    }
  }

  void item(std::size_t i, std::span<double> acc) const {
    nn::Mlp::Cache cache;
    const auto logits = net.forward(inputs[i], cache);
    const auto p = nn::softmax(logits);
    std::vector<double> d(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) d[k] = p[k] - (static_cast<int>(k) == targets[i]);
    net.backward(cache, d, acc);
  }
};

void BM_PolicyGradientSerial(benchmark::State& state) {
  GradientFixture f;
  std::vector<double> g(f.net.param_count());
  for (auto _ : state) {
    std::fill(g.begin(), g.end(), 0.0);
    kernels::accumulate_serial(f.inputs.size(), g,
                               [&](std::size_t i, std::span<double> acc) { f.item(i, acc); });
    benchmark::DoNotOptimize(g.data());
  }
}
BENCHMARK(BM_PolicyGradientSerial)->Unit(benchmark::kMillisecond);

void BM_PolicyGradientParallel(benchmark::State& state) {
  GradientFixture f;
  std::vector<double> g(f.net.param_count());
  for (auto _ : state) {
    std::fill(g.begin(), g.end(), 0.0);
    kernels::accumulate_parallel(f.inputs.size(), g,
                                 [&](std::size_t i, std::span<double> acc) { f.item(i, acc); });
    benchmark::DoNotOptimize(g.data());
  }
}
BENCHMARK(BM_PolicyGradientParallel)->Unit(benchmark::kMillisecond);

void ppo_update_bench(benchmark::State& state, bool parallel) {
  train::TrainConfig config;
  config.parallel_gradients = parallel;
  config.batch_size = 120;
  train::ToyEnv env(4);
  train::Learner learner = train::make_learner(config, env.num_agents());
  train::RolloutCursor cursor;
  train::TrajectoryBuffer buffer = train::collect_rollout(env, learner, config.batch_size, cursor);
  train::compute_gae(buffer, config.gamma, config.gae_lambda);
  for (auto _ : state) {
    state.PauseTiming();
    train::Learner copy = learner;
    train::TrajectoryBuffer b = buffer;
    state.ResumeTiming();
    benchmark::DoNotOptimize(train::ppo_update(copy, b));
  }
}
void BM_PpoUpdateSerial(benchmark::State& state) { ppo_update_bench(state, false); }
void BM_PpoUpdateParallel(benchmark::State& state) { ppo_update_bench(state, true); }
BENCHMARK(BM_PpoUpdateSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PpoUpdateParallel)->Unit(benchmark::kMillisecond);

void BM_EvaluationSerial(benchmark::State& state) {
  Scenario s = builtin_scenario("desk-eval");
  s.episode_steps = 20;
  const auto seeds = eval::evaluation_seeds(1, 4);
  control::NoControl controller;
  for (auto _ : state) {
    benchmark::DoNotOptimize(eval::run_evaluation_serial(s, controller, seeds));
  }
}
BENCHMARK(BM_EvaluationSerial)->Unit(benchmark::kMillisecond)->Iterations(2);

void BM_EvaluationParallel(benchmark::State& state) {
  Scenario s = builtin_scenario("desk-eval");
  s.episode_steps = 20;
  const auto seeds = eval::evaluation_seeds(1, 4);
  control::NoControl controller;
  for (auto _ : state) {
    benchmark::DoNotOptimize(eval::run_evaluation(s, controller, seeds));
  }
}
BENCHMARK(BM_EvaluationParallel)->Unit(benchmark::kMillisecond)->Iterations(2);

}  // namespace

BENCHMARK_MAIN();
