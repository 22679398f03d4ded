#include "marvel/reward.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "marvel/units.hpp"

namespace marvel::env {

int action_index(double mph) {
  for (int i = 0; i < kNumActions; ++i) {
    if (kActionValuesMph[i] == mph) return i;
  }
  throw std::invalid_argument("speed limit " + std::to_string(mph) + " is not an action");
}

void RewardWeights::validate() const {
  if (w1 < 0.0 || w2 < 0.0 || w3 < 0.0) throw ValidationError("reward weights must be >= 0");
  if (!(a_diff > 0.0) || !(nu_max > 0.0) || !(congestion_speed > 0.0)) {
    throw ValidationError("a_diff, nu_max and congestion_speed must be positive");
  }
}

double reward_adaptability(double nu_mph, double action_mph, double congestion_speed) {
  return (nu_mph <= congestion_speed && action_mph != 30.0) ? -10.0 : 0.0;
}

double reward_stepdown(double prev_action_mph, double action_mph, bool most_downstream,
                       double a_diff) {
  if (most_downstream) return 0.0;
  const double p = prev_action_mph;
  const double a = action_mph;
  if (p == 30.0 && (a == 30.0 || a == 40.0)) return 0.0;
  if ((p == 40.0 && a == 50.0) || (p == 50.0 && a == 60.0) ||
      ((p == 60.0 || p == 70.0) && a == 70.0)) {
    return 2.0;
  }
  if (a > p + a_diff) return -2.0 * (a - p) / a_diff;
  return 0.0;
}

double reward_mobility(double nu_mph, double nu_max) {
  const double clipped = std::clamp(nu_mph, 0.0, nu_max);
  return (std::exp(clipped / nu_max) - 1.0) / (std::numbers::e - 1.0);
}

RewardBreakdown combine(double r1, double r2, double r3, const RewardWeights& w) {
  return RewardBreakdown{r1, r2, r3, w.w1 * r1 + w.w2 * r2 + w.w3 * r3};
}

std::vector<RewardBreakdown> compute_rewards(std::span<const double> actions_mph,
                                             std::span<const double> nu_mph,
                                             const RewardWeights& w) {
  if (actions_mph.size() != nu_mph.size()) {
    throw std::invalid_argument("one action and one reading per agent required");
  }
  std::vector<RewardBreakdown> out;
  out.reserve(actions_mph.size());
  for (std::size_t i = 0; i < actions_mph.size(); ++i) {
    const double prev = i == 0 ? kDefaultPrevActionMph : actions_mph[i - 1];
    out.push_back(combine(reward_adaptability(nu_mph[i], actions_mph[i], w.congestion_speed),
                          reward_stepdown(prev, actions_mph[i], i == 0, w.a_diff),
                          reward_mobility(nu_mph[i], w.nu_max), w));
  }
  return out;
}

}  // namespace marvel::env
