#include "marvel/trainer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "marvel/kernels.hpp"
#include "marvel/units.hpp"

namespace marvel::train {

using nlohmann::json;

std::string to_string(Algorithm a) { return a == Algorithm::kMappo ? "mappo" : "ippo"; }

Algorithm algorithm_from_string(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "mappo") return Algorithm::kMappo;
  if (s == "ippo") return Algorithm::kIppo;
  throw ValidationError("unknown algorithm '" + name + "' (expected mappo or ippo)");
}

void TrainConfig::validate() const {
  if (episode_length < 1 || batch_size < 1) {
    throw ValidationError("episode_length and batch_size must be positive");
  }
  if (num_minibatch < 1 || batch_size % num_minibatch != 0) {
    throw ValidationError("num_minibatch must divide batch_size");
  }
  if (ppo_epochs < 1) throw ValidationError("ppo_epochs must be positive");
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) throw ValidationError("learning rates must be > 0");
  if (gamma < 0.0 || gamma > 1.0 || gae_lambda < 0.0 || gae_lambda > 1.0) {
    throw ValidationError("gamma and gae_lambda must lie in [0, 1]");
  }
  if (entropy_coef < 0.0 || value_loss_coef < 0.0) {
    throw ValidationError("loss coefficients must be >= 0");
  }
  if (!(clip_eps > 0.0) || !(max_grad_norm > 0.0)) {
    throw ValidationError("clip_eps and max_grad_norm must be > 0");
  }
  if (training_step_max < 0) throw ValidationError("training_step_max must be >= 0");
  if (hidden_size < 1 || hidden_layers < 0) throw ValidationError("bad hidden layer shape");
  if (!(popart_beta > 0.0 && popart_beta <= 1.0)) {
    throw ValidationError("popart_beta must lie in (0, 1]");
  }
  if (checkpoint_every < 0) throw ValidationError("checkpoint_every must be >= 0");
}

namespace {

json config_json(const TrainConfig& c) {
  return json{{"episode_length", c.episode_length},
              {"batch_size", c.batch_size},
              {"num_minibatch", c.num_minibatch},
              {"ppo_epochs", c.ppo_epochs},
              {"actor_lr", c.actor_lr},
              {"critic_lr", c.critic_lr},
              {"entropy_coef", c.entropy_coef},
              {"value_loss_coef", c.value_loss_coef},
              {"gamma", c.gamma},
              {"gae_lambda", c.gae_lambda},
              {"clip_eps", c.clip_eps},
              {"max_grad_norm", c.max_grad_norm},
              {"training_step_max", c.training_step_max},
              {"seed", c.seed},
              {"algorithm", to_string(c.algorithm)},
              {"hidden_size", c.hidden_size},
              {"hidden_layers", c.hidden_layers},
              {"popart_beta", c.popart_beta},
              {"checkpoint_every", c.checkpoint_every},
              {"parallel_gradients", c.parallel_gradients},
              {"time_limit_bootstrap", c.time_limit_bootstrap}};
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::string config_to_json_text(const TrainConfig& c) { return config_json(c).dump(2); }

TrainConfig config_from_json_text(const std::string& text) {
  TrainConfig c;
  try {
    const json j = json::parse(text);
    static const char* kKnown[] = {
        "episode_length", "batch_size",  "num_minibatch",     "ppo_epochs",   "actor_lr",
        "critic_lr",      "entropy_coef", "value_loss_coef",  "gamma",        "gae_lambda",
        "clip_eps",       "max_grad_norm", "training_step_max", "seed",       "algorithm",
        "hidden_size",    "hidden_layers", "popart_beta",     "checkpoint_every",
        "parallel_gradients", "time_limit_bootstrap"};
    for (const auto& [key, value] : j.items()) {
      if (std::find_if(std::begin(kKnown), std::end(kKnown),
                       [&](const char* k) { return key == k; }) == std::end(kKnown)) {
        throw ValidationError("unknown training config field '" + key + "'");
      }
    }
    read_opt(j, "episode_length", c.episode_length);
    read_opt(j, "batch_size", c.batch_size);
    read_opt(j, "num_minibatch", c.num_minibatch);
    read_opt(j, "ppo_epochs", c.ppo_epochs);
    read_opt(j, "actor_lr", c.actor_lr);
    read_opt(j, "critic_lr", c.critic_lr);
    read_opt(j, "entropy_coef", c.entropy_coef);
    read_opt(j, "value_loss_coef", c.value_loss_coef);
    read_opt(j, "gamma", c.gamma);
    read_opt(j, "gae_lambda", c.gae_lambda);
    read_opt(j, "clip_eps", c.clip_eps);
    read_opt(j, "max_grad_norm", c.max_grad_norm);
    read_opt(j, "training_step_max", c.training_step_max);
    read_opt(j, "seed", c.seed);
    if (j.contains("algorithm")) c.algorithm = algorithm_from_string(j.at("algorithm"));
    read_opt(j, "hidden_size", c.hidden_size);
    read_opt(j, "hidden_layers", c.hidden_layers);
    read_opt(j, "popart_beta", c.popart_beta);
    read_opt(j, "checkpoint_every", c.checkpoint_every);
    read_opt(j, "parallel_gradients", c.parallel_gradients);
    read_opt(j, "time_limit_bootstrap", c.time_limit_bootstrap);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("training config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open training config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

std::uint64_t config_hash(const TrainConfig& c) { return fnv1a(config_json(c).dump()); }

int critic_input_dim(Algorithm a, int n_agents) {
  if (a == Algorithm::kIppo) return env::kObsDim;
  return env::kObsDim * n_agents + (n_agents > 1 ? n_agents : 0);
}

Learner make_learner(const TrainConfig& config, int n_agents) {
  config.validate();
  if (n_agents < 1) throw std::invalid_argument("need at least one agent");
  Learner l;
  l.config = config;
  l.n_agents = n_agents;
  l.rng.seed(config.seed);
  std::vector<int> actor_sizes{env::kObsDim};
  std::vector<int> critic_sizes{critic_input_dim(config.algorithm, n_agents)};
  for (int k = 0; k < config.hidden_layers; ++k) {
    actor_sizes.push_back(config.hidden_size);
    critic_sizes.push_back(config.hidden_size);
  }
  actor_sizes.push_back(env::kNumActions);
  critic_sizes.push_back(1);
  l.actor = nn::Mlp(actor_sizes);
  l.critic = nn::Mlp(critic_sizes);
  // Separate streams so the critic shape never changes the actor draw.
  std::mt19937_64 actor_rng(config.seed * 0x9E3779B97F4A7C15ULL + 1);
  std::mt19937_64 critic_rng(config.seed * 0x9E3779B97F4A7C15ULL + 2);
  l.actor.init_orthogonal(actor_rng, std::sqrt(2.0), 0.01);
  l.critic.init_orthogonal(critic_rng, std::sqrt(2.0), 1.0);
  l.actor_opt = nn::AdamState(l.actor.param_count(), config.actor_lr);
  l.critic_opt = nn::AdamState(l.critic.param_count(), config.critic_lr);
  l.popart.beta = config.popart_beta;
  return l;
}

void compute_gae(std::span<const double> rewards, std::span<const double> values,
                 std::span<const std::uint8_t> dones, double bootstrap, double gamma,
                 double lambda, std::span<double> advantages, std::span<double> returns,
                 std::span<const double> done_values) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n || advantages.size() != n || returns.size() != n ||
      (!done_values.empty() && done_values.size() != n)) {
    throw std::invalid_argument("compute_gae: series lengths differ");
  }
  double gae = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    double next_value;
    if (dones[k]) {
      next_value = done_values.empty() ? 0.0 : done_values[k];
      gae = 0.0;
    } else {
      next_value = k + 1 < n ? values[k + 1] : bootstrap;
    }
    const double delta = rewards[k] + gamma * next_value - values[k];
    gae = delta + gamma * lambda * gae;
    advantages[k] = gae;
    returns[k] = gae + values[k];
  }
}

void compute_gae(TrajectoryBuffer& b, double gamma, double lambda) {
  const std::size_t T = static_cast<std::size_t>(b.n_steps);
  b.advantages.assign(b.samples(), 0.0);
  b.returns.assign(b.samples(), 0.0);
  const bool truncated = b.done_values.size() == b.samples();
  std::vector<double> r(T), v(T), dv(truncated ? T : 0), adv(T), ret(T);
  for (int i = 0; i < b.n_agents; ++i) {
    for (int t = 0; t < b.n_steps; ++t) {
      r[t] = b.rewards[b.at(t, i)];
      v[t] = b.values[b.at(t, i)];
      if (truncated) dv[t] = b.done_values[b.at(t, i)];
    }
    compute_gae(r, v, b.dones, b.bootstrap[i], gamma, lambda, adv, ret, dv);
    for (int t = 0; t < b.n_steps; ++t) {
      b.advantages[b.at(t, i)] = adv[t];
      b.returns[b.at(t, i)] = ret[t];
    }
  }
}

std::uint64_t episode_seed(std::uint64_t base, std::uint64_t episode) {
  // splitmix64 finalizer over the pair.
  std::uint64_t z = base * 0x9E3779B97F4A7C15ULL + episode + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

std::vector<double> critic_input(Algorithm algo, const env::MultiAgentEnv& env, int agent,
                                 const env::ObsVector& local_obs,
                                 const std::vector<double>& last_actions_mph) {
  if (algo == Algorithm::kIppo) return {local_obs.begin(), local_obs.end()};
  // Global state from the limits already on the signs, so it does not see
  // any action chosen in the current step.
  const int n = env.num_agents();
  std::vector<env::ObsVector> obs(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    obs[static_cast<std::size_t>(j)] =
        env.observe(j, j == 0 ? env::kDefaultPrevActionMph : last_actions_mph[j - 1]);
  }
  std::vector<double> in = env::global_state(obs);
  if (n > 1) {
    for (int j = 0; j < n; ++j) in.push_back(j == agent ? 1.0 : 0.0);
  }
  return in;
}

int sample_index(std::span<const double> probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  double c = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    c += probs[k];
    if (x < c) return static_cast<int>(k);
  }
  for (std::size_t k = probs.size(); k-- > 0;) {
    if (probs[k] > 0.0) return static_cast<int>(k);
  }
  return 0;
}

// Critic values of the current state with every sign holding its limit.
std::vector<double> hold_values(const env::MultiAgentEnv& env, const Learner& learner,
                                const std::vector<double>& last_actions_mph) {
  const int n = env.num_agents();
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double prev = i == 0 ? env::kDefaultPrevActionMph : last_actions_mph[i - 1];
    const env::ObsVector o = env.observe(i, prev);
    const std::vector<double> ci =
        critic_input(learner.config.algorithm, env, i, o, last_actions_mph);
    out[static_cast<std::size_t>(i)] =
        learner.popart.denormalize(nn::forward_value(learner.critic, ci));
  }
  return out;
}

}  // namespace

TrajectoryBuffer collect_rollout(env::MultiAgentEnv& env, Learner& learner, int batch_size,
                                 RolloutCursor& cursor) {
  const int n = env.num_agents();
  if (n != learner.n_agents) throw std::invalid_argument("learner/env agent count mismatch");
  const Algorithm algo = learner.config.algorithm;
  TrajectoryBuffer b;
  b.n_steps = batch_size;
  b.n_agents = n;
  b.obs_dim = env::kObsDim;
  b.critic_dim = critic_input_dim(algo, n);
  const std::size_t total = static_cast<std::size_t>(batch_size) * n;
  b.obs.reserve(total * b.obs_dim);
  b.critic_in.reserve(total * b.critic_dim);
  b.actions.reserve(total);
  b.log_probs.reserve(total);
  b.rewards.reserve(total);
  b.breakdown.reserve(total);
  b.values.reserve(total);
  b.dones.reserve(batch_size);
  const bool truncate = learner.config.time_limit_bootstrap;
  if (truncate) b.done_values.assign(total, 0.0);

  for (int t = 0; t < batch_size; ++t) {
    try {
      if (cursor.need_reset || env.done()) {
        env.reset(episode_seed(learner.config.seed, learner.episode_counter++));
        cursor.need_reset = false;
        cursor.last_actions_mph.assign(static_cast<std::size_t>(n), env::kDefaultPrevActionMph);
      }
      std::vector<int> actions(static_cast<std::size_t>(n));
      double prev = env::kDefaultPrevActionMph;
      for (int i = 0; i < n; ++i) {
        const env::ObsVector o = env.observe(i, prev);
        const nn::PolicyOutput out = nn::forward_policy(learner.actor, o);
        const int a = sample_index(out.probs, learner.rng);
        actions[static_cast<std::size_t>(i)] = a;
        prev = env::action_value(a);
        const std::vector<double> ci = critic_input(algo, env, i, o, cursor.last_actions_mph);
        b.obs.insert(b.obs.end(), o.begin(), o.end());
        b.critic_in.insert(b.critic_in.end(), ci.begin(), ci.end());
        b.actions.push_back(a);
        b.log_probs.push_back(out.log_probs[static_cast<std::size_t>(a)]);
        b.values.push_back(learner.popart.denormalize(nn::forward_value(learner.critic, ci)));
      }
      const env::StepResult res = env.step(actions);
      for (int i = 0; i < n; ++i) {
        const env::RewardBreakdown& r = res.rewards.at(static_cast<std::size_t>(i));
        b.rewards.push_back(r.total);
        b.breakdown.push_back(r);
        cursor.last_actions_mph[static_cast<std::size_t>(i)] =
            env::action_value(actions[static_cast<std::size_t>(i)]);
      }
      b.dones.push_back(res.done ? 1 : 0);
      if (res.done) {
        cursor.need_reset = true;
        if (truncate) {
          const std::vector<double> v = hold_values(env, learner, cursor.last_actions_mph);
          std::copy(v.begin(), v.end(), b.done_values.begin() + b.at(t, 0));
        }
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("rollout step " + std::to_string(t) + ": " + e.what());
    }
  }

  b.bootstrap.assign(static_cast<std::size_t>(n), 0.0);
  if (!b.dones.back()) {
    // Next decisions are unknown; neighbours are assumed to hold their limits.
    b.bootstrap = hold_values(env, learner, cursor.last_actions_mph);
  }
  return b;
}

void normalize_advantages(std::span<double> adv) {
  if (adv.empty()) return;
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / n);
  const double scale = sd > 1e-12 ? 1.0 / sd : 1.0;
  for (double& a : adv) a = (a - mean) * scale;
}

LossReport ppo_update(Learner& L, TrajectoryBuffer& b) {
  const TrainConfig& c = L.config;
  if (b.advantages.size() != b.samples()) {
    throw std::invalid_argument("ppo_update: compute advantages first");
  }
  std::vector<double> adv = b.advantages;
  normalize_advantages(adv);

  nn::popart_update(L.popart, L.critic, b.returns);
  std::vector<double> targets(b.samples());
  for (std::size_t k = 0; k < targets.size(); ++k) targets[k] = L.popart.normalize(b.returns[k]);

  const std::size_t n_samples = b.samples();
  const std::size_t n_actor = L.actor.param_count();
  const std::size_t n_critic = L.critic.param_count();
  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), std::size_t{0});

  LossReport report;
  int passes = 0;
  for (int epoch = 0; epoch < c.ppo_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), L.rng);
    for (int mb = 0; mb < c.num_minibatch; ++mb) {
      const std::size_t lo = n_samples * mb / c.num_minibatch;
      const std::size_t hi = n_samples * (mb + 1) / c.num_minibatch;
      const std::size_t m = hi - lo;
      const double inv_m = 1.0 / static_cast<double>(m);

      // Trailing slots carry the surrogate and entropy sums.
      std::vector<double> g_actor(n_actor + 2, 0.0);
      auto actor_item = [&](std::size_t j, std::span<double> acc) {
        const std::size_t s = order[lo + j];
        const std::span<const double> x(b.obs.data() + s * b.obs_dim, b.obs_dim);
        nn::Mlp::Cache cache;
        const std::vector<double> logits = L.actor.forward(x, cache);
        const std::vector<double> logp = nn::log_softmax(logits);
        std::vector<double> p(logp.size());
        for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::exp(logp[k]);
        const int a = b.actions[s];
        const double ratio = std::exp(logp[a] - b.log_probs[s]);
        const double A = adv[s];
        const double surr1 = ratio * A;
        const double surr2 = std::clamp(ratio, 1.0 - c.clip_eps, 1.0 + c.clip_eps) * A;
        const double h = nn::entropy(p);
        std::vector<double> d(p.size(), 0.0);
        if (surr1 <= surr2) {
          for (std::size_t k = 0; k < p.size(); ++k) {
            d[k] = -A * ratio * ((static_cast<int>(k) == a ? 1.0 : 0.0) - p[k]) * inv_m;
          }
        }
        for (std::size_t k = 0; k < p.size(); ++k) {
          // dH/dz_k = -p_k (log p_k + H); the loss carries -entropy_coef * H.
          d[k] += c.entropy_coef * p[k] * (logp[k] + h) * inv_m;
        }
        L.actor.backward(cache, d, acc.first(n_actor));
        acc[n_actor] += -std::min(surr1, surr2);
        acc[n_actor + 1] += h;
      };

      std::vector<double> g_critic(n_critic + 1, 0.0);
      auto critic_item = [&](std::size_t j, std::span<double> acc) {
        const std::size_t s = order[lo + j];
        const std::span<const double> x(b.critic_in.data() + s * b.critic_dim, b.critic_dim);
        nn::Mlp::Cache cache;
        const double v = L.critic.forward(x, cache)[0];
        const double err = v - targets[s];
        const double d = 2.0 * c.value_loss_coef * err * inv_m;
        L.critic.backward(cache, std::span<const double>(&d, 1), acc.first(n_critic));
        acc[n_critic] += c.value_loss_coef * err * err;
      };

      if (c.parallel_gradients) {
        kernels::accumulate_parallel(m, g_actor, actor_item);
        kernels::accumulate_parallel(m, g_critic, critic_item);
      } else {
        kernels::accumulate_serial(m, g_actor, actor_item);
        kernels::accumulate_serial(m, g_critic, critic_item);
      }
      const double surrogate = g_actor[n_actor] * inv_m;
      const double ent = g_actor[n_actor + 1] * inv_m;
      const double closs = g_critic[n_critic] * inv_m;
      if (!std::isfinite(surrogate) || !std::isfinite(ent) || !std::isfinite(closs)) {
        std::ostringstream os;
        os << "non-finite loss at epoch " << epoch << " minibatch " << mb
           << " (actor " << surrogate << ", entropy " << ent << ", critic " << closs << ")";
        throw std::runtime_error(os.str());
      }
      std::span<double> ga(g_actor.data(), n_actor);
      std::span<double> gc(g_critic.data(), n_critic);
      report.actor_grad_norm = nn::clip_grad_norm(ga, c.max_grad_norm);
      report.critic_grad_norm = nn::clip_grad_norm(gc, c.max_grad_norm);
      nn::adam_update(L.actor.params(), ga, L.actor_opt);
      nn::adam_update(L.critic.params(), gc, L.critic_opt);
      report.actor_loss += surrogate;
      report.entropy += ent;
      report.critic_loss += closs;
      ++passes;
    }
  }
  report.actor_loss /= passes;
  report.entropy /= passes;
  report.critic_loss /= passes;
  return report;
}

TrainResult train(const TrainConfig& config, env::MultiAgentEnv& env, const TrainHooks& hooks,
                  const Learner* resume) {
  config.validate();
  TrainResult result;
  if (resume != nullptr) {
    result.learner = *resume;
    result.learner.config = config;
  } else {
    result.learner = make_learner(config, env.num_agents());
  }
  Learner& L = result.learner;
  if (L.n_agents != env.num_agents()) {
    throw std::invalid_argument("checkpoint agent count does not match the environment");
  }
  RolloutCursor cursor;
  if (config.training_step_max == 0 && hooks.on_checkpoint) hooks.on_checkpoint(L);
  while (L.training_step < config.training_step_max) {
    TrajectoryBuffer buf = collect_rollout(env, L, config.batch_size, cursor);
    compute_gae(buf, config.gamma, config.gae_lambda);
    const LossReport loss = ppo_update(L, buf);
    const std::int64_t before = L.training_step;
    L.training_step += config.batch_size;

    CurvePoint p;
    p.step = L.training_step;
    p.seed = config.seed;
    const double inv = 1.0 / static_cast<double>(buf.samples());
    for (const auto& r : buf.breakdown) {
      p.mean_total += r.total * inv;
      p.mean_r1 += r.r1 * inv;
      p.mean_r2 += r.r2 * inv;
      p.mean_r3 += r.r3 * inv;
    }
    p.actor_loss = loss.actor_loss;
    p.critic_loss = loss.critic_loss;
    p.entropy = loss.entropy;
    result.curve.push_back(p);
    if (hooks.on_progress) hooks.on_progress(p);

    const bool last = L.training_step >= config.training_step_max;
    const bool periodic = config.checkpoint_every > 0 &&
                          before / config.checkpoint_every != L.training_step / config.checkpoint_every;
    if (hooks.on_checkpoint && (last || periodic)) hooks.on_checkpoint(L);
  }
  return result;
}

env::ObsVector ToyEnv::observe(int agent, double prev_action_mph) const {
  return {prev_action_mph / env::kSpeedNorm, 0.5, 0.1 * agent, 0.5, 0.0};
}

env::StepResult ToyEnv::step(std::span<const int> action_indices) {
  if (done()) throw std::logic_error("toy env stepped after the episode ended");
  env::StepResult res;
  for (int a : action_indices) {
    const double r = 1.0 - std::abs(a - best_) / 4.0;
    res.rewards.push_back(env::RewardBreakdown{0.0, 0.0, r, r});
  }
  ++t_;
  res.done = done();
  return res;
}

}  // namespace marvel::train
