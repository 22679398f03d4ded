#include "marvel/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "marvel/units.hpp"

namespace marvel::io {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "marvel-checkpoint";
constexpr int kVersion = 1;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

json net_json(const nn::Mlp& net) {
  return json{{"layer_sizes", net.layer_sizes()},
              {"params", std::vector<double>(net.params().begin(), net.params().end())}};
}

nn::Mlp net_from(const json& j) {
  nn::Mlp net(j.at("layer_sizes").get<std::vector<int>>());
  const auto p = j.at("params").get<std::vector<double>>();
  if (p.size() != net.param_count()) throw ValidationError("checkpoint: parameter count mismatch");
  std::copy(p.begin(), p.end(), net.params().begin());
  return net;
}

json adam_json(const nn::AdamState& s) {
  return json{{"lr", s.lr},     {"beta1", s.beta1}, {"beta2", s.beta2},
              {"eps", s.eps},   {"step", s.step},   {"m", s.m},
              {"v", s.v}};
}

nn::AdamState adam_from(const json& j) {
  nn::AdamState s;
  s.lr = j.at("lr");
  s.beta1 = j.at("beta1");
  s.beta2 = j.at("beta2");
  s.eps = j.at("eps");
  s.step = j.at("step");
  s.m = j.at("m").get<std::vector<double>>();
  s.v = j.at("v").get<std::vector<double>>();
  return s;
}

}  // namespace

std::string checkpoint_to_text(const train::Learner& l, const std::string& scenario_name) {
  std::ostringstream rng_state;
  rng_state << l.rng;
  json body{{"format", kFormat},
            {"version", kVersion},
            {"scenario", scenario_name},
            {"config", json::parse(train::config_to_json_text(l.config))},
            {"config_hash", hex64(train::config_hash(l.config))},
            {"n_agents", l.n_agents},
            {"training_step", l.training_step},
            {"episode_counter", l.episode_counter},
            {"rng_state", rng_state.str()},
            {"actor", net_json(l.actor)},
            {"critic", net_json(l.critic)},
            {"actor_opt", adam_json(l.actor_opt)},
            {"critic_opt", adam_json(l.critic_opt)},
            {"popart",
             {{"beta", l.popart.beta},
              {"sigma_min", l.popart.sigma_min},
              {"running_mean", l.popart.running_mean},
              {"running_sq", l.popart.running_sq},
              {"debias", l.popart.debias}}}};
  body["checksum"] = hex64(fnv1a(body.dump()));
  return body.dump(1);
}

LoadedCheckpoint checkpoint_from_text(const std::string& text,
                                      const std::optional<train::TrainConfig>& expected) {
  LoadedCheckpoint out;
  try {
    json body = json::parse(text);
    if (body.value("format", "") != kFormat) throw ValidationError("not a checkpoint file");
    if (body.at("version").get<int>() != kVersion) {
      throw ValidationError("unsupported checkpoint version");
    }
    const std::string stored = body.at("checksum");
    body.erase("checksum");
    if (hex64(fnv1a(body.dump())) != stored) {
      throw ValidationError("checkpoint checksum mismatch (file is corrupted)");
    }
    train::Learner& l = out.learner;
    l.config = train::config_from_json_text(body.at("config").dump());
    const std::string hash = body.at("config_hash");
    if (hash != hex64(train::config_hash(l.config))) {
      throw ValidationError("checkpoint config hash does not match its config");
    }
    out.config_hash = train::config_hash(l.config);
    if (expected && train::config_hash(*expected) != out.config_hash) {
      throw ValidationError("config hash mismatch: checkpoint " + hash + " vs config " +
                            hex64(train::config_hash(*expected)));
    }
    out.scenario_name = body.at("scenario");
    l.n_agents = body.at("n_agents");
    l.training_step = body.at("training_step");
    l.episode_counter = body.at("episode_counter");
    std::istringstream rs(body.at("rng_state").get<std::string>());
    rs >> l.rng;
    if (!rs) throw ValidationError("checkpoint: bad RNG state");
    l.actor = net_from(body.at("actor"));
    l.critic = net_from(body.at("critic"));
    l.actor_opt = adam_from(body.at("actor_opt"));
    l.critic_opt = adam_from(body.at("critic_opt"));
    if (l.actor_opt.m.size() != l.actor.param_count() ||
        l.critic_opt.m.size() != l.critic.param_count()) {
      throw ValidationError("checkpoint: optimizer state does not match the networks");
    }
    const json& p = body.at("popart");
    l.popart.beta = p.at("beta");
    l.popart.sigma_min = p.at("sigma_min");
    l.popart.running_mean = p.at("running_mean");
    l.popart.running_sq = p.at("running_sq");
    l.popart.debias = p.at("debias");
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
  return out;
}

void save_checkpoint(const std::string& path, const train::Learner& learner,
                     const std::string& scenario_name) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
    out << checkpoint_to_text(learner, scenario_name);
    if (!out) throw std::runtime_error("failed writing checkpoint '" + path + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("cannot move checkpoint into place at '" + path + "'");
  }
}

LoadedCheckpoint load_checkpoint(const std::string& path,
                                 const std::optional<train::TrainConfig>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_text(ss.str(), expected);
}

}  // namespace marvel::io
