#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "marvel/attribution.hpp"
#include "marvel/metrics.hpp"
#include "marvel/vsl_env.hpp"

namespace marvel::io {

struct Transition {
  double from_mph = 70.0;
  double to_mph = 70.0;
  std::string label() const;  // e.g. "70-30"
  bool operator==(const Transition&) const = default;
};

// The six decision cases studied for attribution: 70-30, 40-30, 50-40,
// 30-70, 30-40, 40-50.
const std::vector<Transition>& standard_transitions();
// Parses "70-30"; throws ValidationError on anything else.
Transition parse_transition(const std::string& text);

// Normalized observation of `agent` when deciding at `step`, rebuilt from a
// log: the downstream neighbour's limit at `step`, own and upstream readings
// from step - 1 (the last agent reuses its own). Agents must sit on
// consecutive gantries. Empty when step - 1 is not logged.
std::optional<env::ObsVector> observation_from_log(std::span<const metrics::EpisodeLogRow> log,
                                                   int step, int agent);

struct CaseSample {
  Transition transition;
  int step = 0;
  int agent = 0;
  env::ObsVector baseline{};  // observation one step before the switch
  env::ObsVector input{};     // observation at the switch
  nn::Attribution attribution;
};

struct CaseSummary {
  Transition transition;
  int samples = 0;
  std::array<double, env::kObsDim> mean_attribution{};
  double mean_gap = 0.0;
};

// Finds up to `max_samples` switches per transition (earliest first) and
// attributes the chosen action's probability with integrated gradients.
std::vector<CaseSample> attribute_transitions(std::span<const metrics::EpisodeLogRow> log,
                                              const nn::Mlp& actor,
                                              std::span<const Transition> transitions,
                                              int max_samples = 5, int ig_steps = 256);

std::vector<CaseSummary> summarize_cases(std::span<const CaseSample> samples,
                                         std::span<const Transition> transitions);

}  // namespace marvel::io
