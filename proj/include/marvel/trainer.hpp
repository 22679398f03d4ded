#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "marvel/mlp.hpp"
#include "marvel/optim.hpp"
#include "marvel/vsl_env.hpp"

namespace marvel::train {

enum class Algorithm { kMappo, kIppo };

std::string to_string(Algorithm a);
// Accepts "mappo" or "ippo" (any case); throws ValidationError otherwise.
Algorithm algorithm_from_string(const std::string& name);

struct TrainConfig {
  int episode_length = 120;
  int batch_size = 120;
  int num_minibatch = 1;
  int ppo_epochs = 15;
  double actor_lr = 7e-4;
  double critic_lr = 5e-4;
  double entropy_coef = 0.05;
  double value_loss_coef = 1.0;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  double max_grad_norm = 10.0;
  std::int64_t training_step_max = 10000;
  std::uint64_t seed = 1;
  Algorithm algorithm = Algorithm::kMappo;
  int hidden_size = 64;
  int hidden_layers = 2;
  double popart_beta = 0.9;
  std::int64_t checkpoint_every = 0;  // steps; 0 keeps only the final one
  bool parallel_gradients = true;
  // Episode ends are time limits: bootstrap from V of the final state
  // instead of treating it as terminal.
  bool time_limit_bootstrap = true;

  void validate() const;
};

std::string config_to_json_text(const TrainConfig& c);
TrainConfig config_from_json_text(const std::string& text);
TrainConfig load_config_file(const std::string& path);
// FNV-1a over the canonical JSON form.
std::uint64_t config_hash(const TrainConfig& c);

// Per step t and agent i, flattened as t * n_agents + i.
struct TrajectoryBuffer {
  int n_steps = 0;
  int n_agents = 0;
  int obs_dim = 0;
  int critic_dim = 0;
  std::vector<double> obs;
  std::vector<double> critic_in;
  std::vector<int> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<env::RewardBreakdown> breakdown;
  std::vector<double> values;  // unnormalized
  std::vector<std::uint8_t> dones;  // per step
  std::vector<double> bootstrap;    // per agent, value after the last step (0 if terminal)
  std::vector<double> done_values;  // per sample, value after a truncated episode end, else 0
  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t at(int t, int agent) const {
    return static_cast<std::size_t>(t) * n_agents + agent;
  }
  std::size_t samples() const { return actions.size(); }
};

// Shared policy and critic plus optimizer and normalization state.
struct Learner {
  TrainConfig config;
  int n_agents = 1;
  nn::Mlp actor;
  nn::Mlp critic;
  nn::AdamState actor_opt;
  nn::AdamState critic_opt;
  nn::PopArtStats popart;
  std::int64_t training_step = 0;
  std::uint64_t episode_counter = 0;
  std::mt19937_64 rng;
};

int critic_input_dim(Algorithm a, int n_agents);
Learner make_learner(const TrainConfig& config, int n_agents);

// Backward GAE on one agent's series. dones[t] marks the last step of an
// episode; `bootstrap` is V after the final step when it is not terminal.
// A non-empty `done_values` gives the value to bootstrap from at each done
// step (truncation); otherwise done steps bootstrap from 0.
void compute_gae(std::span<const double> rewards, std::span<const double> values,
                 std::span<const std::uint8_t> dones, double bootstrap, double gamma,
                 double lambda, std::span<double> advantages, std::span<double> returns,
                 std::span<const double> done_values = {});
void compute_gae(TrajectoryBuffer& buffer, double gamma, double lambda);

// Tracks the environment between buffers.
struct RolloutCursor {
  bool need_reset = true;
  std::vector<double> last_actions_mph;
};

// Gathers `batch_size` control steps with the stochastic shared policy.
// Environment errors are rethrown with the step index attached.
TrajectoryBuffer collect_rollout(env::MultiAgentEnv& env, Learner& learner, int batch_size,
                                 RolloutCursor& cursor);

struct LossReport {
  double actor_loss = 0.0;  // clipped surrogate part, averaged over epochs
  double critic_loss = 0.0;
  double entropy = 0.0;
  double actor_grad_norm = 0.0;
  double critic_grad_norm = 0.0;
};

// Advantage normalization, PopArt refresh, then E epochs of K minibatches.
// Throws std::runtime_error when a loss turns non-finite.
LossReport ppo_update(Learner& learner, TrajectoryBuffer& buffer);

// Mean-zero, unit-std rescale (population std) in place.
void normalize_advantages(std::span<double> adv);

struct CurvePoint {
  std::int64_t step = 0;
  std::uint64_t seed = 0;
  double mean_total = 0.0;
  double mean_r1 = 0.0;
  double mean_r2 = 0.0;
  double mean_r3 = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
};

struct TrainHooks {
  std::function<void(const Learner&)> on_checkpoint;
  std::function<void(const CurvePoint&)> on_progress;
};

struct TrainResult {
  Learner learner;
  std::vector<CurvePoint> curve;
};

// Collect -> GAE -> update until training_step_max. With a resume learner
// the run continues from its step and RNG state.
TrainResult train(const TrainConfig& config, env::MultiAgentEnv& env,
                  const TrainHooks& hooks = {}, const Learner* resume = nullptr);

// Single- or multi-agent bandit with a fixed best action, used to check the
// trainer end to end. Reward = 1 - |a - best| / 4, so the optimum is 1.
class ToyEnv : public env::MultiAgentEnv {
 public:
  explicit ToyEnv(int agents = 1, int best_action = 2, int episode_length = 120)
      : agents_(agents), best_(best_action), length_(episode_length) {}
  int num_agents() const override { return agents_; }
  void reset(std::uint64_t) override { t_ = 0; }
  env::ObsVector observe(int agent, double prev_action_mph) const override;
  env::StepResult step(std::span<const int> action_indices) override;
  bool done() const override { return t_ >= length_; }

 private:
  int agents_;
  int best_;
  int length_;
  int t_ = 0;
};

std::uint64_t episode_seed(std::uint64_t base, std::uint64_t episode);

}  // namespace marvel::train
