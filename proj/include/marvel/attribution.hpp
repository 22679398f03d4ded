#pragma once

#include <span>
#include <vector>

#include "marvel/mlp.hpp"

namespace marvel::nn {

struct Attribution {
  std::vector<double> values;  // one per input feature
  double f_input = 0.0;        // target-action probability at the input
  double f_baseline = 0.0;
  // |sum(values) - (f_input - f_baseline)|
  double completeness_gap() const;
};

// Gradient of softmax(net(x))[target] with respect to x.
std::vector<double> probability_input_gradient(const Mlp& policy, std::span<const double> x,
                                               int target);

// Integrated gradients of the target-action probability along the straight
// path baseline -> input, midpoint rule with `steps` intervals. Throws
// std::invalid_argument when steps < 2 or the dimensions differ.
Attribution integrated_gradients(const Mlp& policy, std::span<const double> baseline,
                                 std::span<const double> input, int target, int steps);

}  // namespace marvel::nn
