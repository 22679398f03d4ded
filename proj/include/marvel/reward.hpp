#pragma once

#include <array>
#include <span>
#include <vector>

namespace marvel::env {

inline constexpr int kNumActions = 5;
inline constexpr std::array<double, kNumActions> kActionValuesMph = {30.0, 40.0, 50.0, 60.0, 70.0};
inline constexpr double kDefaultPrevActionMph = 70.0;

inline constexpr double action_value(int index) { return 30.0 + 10.0 * index; }
// Index of a legal limit value; throws std::invalid_argument otherwise.
int action_index(double mph);

struct RewardWeights {
  double w1 = 0.2;
  double w2 = 0.3;
  double w3 = 0.5;
  double a_diff = 10.0;
  double nu_max = 70.0;
  double congestion_speed = 35.0;

  void validate() const;
};

struct RewardBreakdown {
  double r1 = 0.0;
  double r2 = 0.0;
  double r3 = 0.0;
  double total = 0.0;
};

// -10 when the agent's reading is congested and it does not post 30.
double reward_adaptability(double nu_mph, double action_mph,
                           double congestion_speed = 35.0);

// Step-down term against the downstream neighbour's action. Pairs that match
// no listed case (e.g. 70 -> 60, 50 -> 50) score 0.
double reward_stepdown(double prev_action_mph, double action_mph, bool most_downstream,
                       double a_diff = 10.0);

// Exponential mobility term in [0, 1].
double reward_mobility(double nu_mph, double nu_max = 70.0);

RewardBreakdown combine(double r1, double r2, double r3, const RewardWeights& w);

// One breakdown per agent, downstream-first. actions[i-1] is agent i's
// downstream neighbour. Throws std::invalid_argument on length mismatch.
std::vector<RewardBreakdown> compute_rewards(std::span<const double> actions_mph,
                                             std::span<const double> nu_mph,
                                             const RewardWeights& w = {});

}  // namespace marvel::env
