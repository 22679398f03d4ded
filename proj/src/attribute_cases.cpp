#include "marvel/attribute_cases.hpp"

#include <cmath>
#include <map>

#include "marvel/reward.hpp"
#include "marvel/units.hpp"

namespace marvel::io {

namespace {

using LogIndex = std::map<std::pair<int, int>, const metrics::EpisodeLogRow*>;

LogIndex index_log(std::span<const metrics::EpisodeLogRow> log) {
  LogIndex idx;
  for (const auto& r : log) idx[{r.step, r.agent}] = &r;
  return idx;
}

int agent_count(std::span<const metrics::EpisodeLogRow> log) {
  int n = 0;
  for (const auto& r : log) n = std::max(n, r.agent + 1);
  return n;
}

std::optional<env::ObsVector> observation(const LogIndex& idx, int n_agents, int step,
                                          int agent) {
  double prev = env::kDefaultPrevActionMph;
  if (agent > 0) {
    auto it = idx.find({step, agent - 1});
    if (it == idx.end()) return std::nullopt;
    prev = it->second->action_mph;
  }
  auto own = idx.find({step - 1, agent});
  if (own == idx.end()) return std::nullopt;
  auto up = agent + 1 < n_agents ? idx.find({step - 1, agent + 1}) : own;
  if (up == idx.end()) return std::nullopt;
  env::AgentObservation o{prev, own->second->nu, own->second->occ, up->second->nu,
                          up->second->occ};
  return o.normalized();
}

}  // namespace

std::string Transition::label() const {
  return std::to_string(static_cast<int>(from_mph)) + "-" +
         std::to_string(static_cast<int>(to_mph));
}

const std::vector<Transition>& standard_transitions() {
  static const std::vector<Transition> cases = {{70, 30}, {40, 30}, {50, 40},
                                                {30, 70}, {30, 40}, {40, 50}};
  return cases;
}

Transition parse_transition(const std::string& text) {
  const auto dash = text.find('-');
  if (dash == std::string::npos) {
    throw ValidationError("transition '" + text + "' must look like 70-30");
  }
  try {
    std::size_t a = 0, b = 0;
    const double from = std::stod(text.substr(0, dash), &a);
    const double to = std::stod(text.substr(dash + 1), &b);
    if (a != dash || b != text.size() - dash - 1) throw std::invalid_argument("trailing");
    env::action_index(from);
    env::action_index(to);
    return {from, to};
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception&) {
    throw ValidationError("transition '" + text + "' must look like 70-30");
  }
}

std::optional<env::ObsVector> observation_from_log(std::span<const metrics::EpisodeLogRow> log,
                                                   int step, int agent) {
  return observation(index_log(log), agent_count(log), step, agent);
}

std::vector<CaseSample> attribute_transitions(std::span<const metrics::EpisodeLogRow> log,
                                              const nn::Mlp& actor,
                                              std::span<const Transition> transitions,
                                              int max_samples, int ig_steps) {
  const LogIndex idx = index_log(log);
  const int n_agents = agent_count(log);
  std::vector<CaseSample> out;
  std::vector<int> taken(transitions.size(), 0);
  // Log order is step-major, so the earliest switches come first.
  for (const auto& [key, row] : idx) {
    const auto [step, agent] = key;
    auto before = idx.find({step - 1, agent});
    if (before == idx.end()) continue;
    for (std::size_t c = 0; c < transitions.size(); ++c) {
      if (taken[c] >= max_samples) continue;
      if (before->second->action_mph != transitions[c].from_mph ||
          row->action_mph != transitions[c].to_mph) {
        continue;
      }
      const auto base = observation(idx, n_agents, step - 1, agent);
      const auto input = observation(idx, n_agents, step, agent);
      if (!base || !input) continue;
      CaseSample s;
      s.transition = transitions[c];
      s.step = step;
      s.agent = agent;
      s.baseline = *base;
      s.input = *input;
      s.attribution = nn::integrated_gradients(actor, s.baseline, s.input,
                                               env::action_index(row->action_mph), ig_steps);
      out.push_back(std::move(s));
      ++taken[c];
    }
  }
  return out;
}

std::vector<CaseSummary> summarize_cases(std::span<const CaseSample> samples,
                                         std::span<const Transition> transitions) {
  std::vector<CaseSummary> out;
  for (const auto& t : transitions) {
    CaseSummary s;
    s.transition = t;
    for (const auto& c : samples) {
      if (!(c.transition == t)) continue;
      ++s.samples;
      for (int k = 0; k < env::kObsDim; ++k) s.mean_attribution[k] += c.attribution.values[k];
      s.mean_gap += c.attribution.completeness_gap();
    }
    if (s.samples > 0) {
      for (auto& v : s.mean_attribution) v /= s.samples;
      s.mean_gap /= s.samples;
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace marvel::io
