#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "marvel/mlp.hpp"

namespace marvel::nn {

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  AdamState() = default;
  AdamState(std::size_t n, double learning_rate) : lr(learning_rate), m(n, 0.0), v(n, 0.0) {}
};

// Bias-corrected Adam step. Throws std::invalid_argument on a shape mismatch.
void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state);

// Rescales `grads` in place so their L2 norm is at most `max_norm`.
// Returns the norm before clipping.
double clip_grad_norm(std::span<double> grads, double max_norm);

// Running return statistics for PopArt. `beta` is the weight of each new
// batch in the exponential averages; the debias term removes the bias
// toward the zero initial state.
struct PopArtStats {
  double beta = 0.9;
  double sigma_min = 1e-4;
  double running_mean = 0.0;
  double running_sq = 0.0;
  double debias = 0.0;

  double mean() const;
  double sigma() const;
  double normalize(double y) const { return (y - mean()) / sigma(); }
  double denormalize(double y) const { return y * sigma() + mean(); }
};

// Folds a batch of raw return targets into the statistics and rescales the
// last layer of `value_net` so its unnormalized outputs are unchanged.
// Throws std::invalid_argument on an empty batch.
void popart_update(PopArtStats& stats, Mlp& value_net, std::span<const double> targets);

}  // namespace marvel::nn
