#include "marvel/attribution.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace marvel::nn {

double Attribution::completeness_gap() const {
  const double s = std::accumulate(values.begin(), values.end(), 0.0);
  return std::abs(s - (f_input - f_baseline));
}

std::vector<double> probability_input_gradient(const Mlp& policy, std::span<const double> x,
                                               int target) {
  if (target < 0 || target >= policy.output_dim()) {
    throw std::invalid_argument("target action out of range");
  }
  Mlp::Cache cache;
  const std::vector<double> logits = policy.forward(x, cache);
  const std::vector<double> p = softmax(logits);
  std::vector<double> d_logits(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    d_logits[k] = p[target] * ((static_cast<int>(k) == target ? 1.0 : 0.0) - p[k]);
  }
  std::vector<double> scratch(policy.param_count(), 0.0);
  std::vector<double> d_input;
  policy.backward(cache, d_logits, scratch, &d_input);
  return d_input;
}

Attribution integrated_gradients(const Mlp& policy, std::span<const double> baseline,
                                 std::span<const double> input, int target, int steps) {
  if (steps < 2) throw std::invalid_argument("integrated gradients needs at least 2 steps");
  if (baseline.size() != input.size()) {
    throw std::invalid_argument("baseline and input dimensions differ");
  }
  const std::size_t n = input.size();
  std::vector<double> total(n, 0.0);
  std::vector<double> point(n);
  for (int s = 0; s < steps; ++s) {
    const double alpha = (s + 0.5) / steps;
    for (std::size_t k = 0; k < n; ++k) point[k] = baseline[k] + alpha * (input[k] - baseline[k]);
    const std::vector<double> g = probability_input_gradient(policy, point, target);
    for (std::size_t k = 0; k < n; ++k) total[k] += g[k];
  }
  Attribution out;
  out.values.resize(n);
  for (std::size_t k = 0; k < n; ++k) out.values[k] = (input[k] - baseline[k]) * total[k] / steps;
  out.f_input = softmax(policy.forward(input))[target];
  out.f_baseline = softmax(policy.forward(baseline))[target];
  return out;
}

}  // namespace marvel::nn
