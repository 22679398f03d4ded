#include "marvel/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace marvel::nn {

void adam_update(std::span<double> params, std::span<const double> grads, AdamState& s) {
  if (params.size() != grads.size() || s.m.size() != params.size() ||
      s.v.size() != params.size()) {
    throw std::invalid_argument("adam: parameter, gradient and moment sizes differ");
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grads[k];
    s.m[k] = s.beta1 * s.m[k] + (1.0 - s.beta1) * g;
    s.v[k] = s.beta2 * s.v[k] + (1.0 - s.beta2) * g * g;
    const double m_hat = s.m[k] / c1;
    const double v_hat = s.v[k] / c2;
    params[k] -= s.lr * m_hat / (std::sqrt(v_hat) + s.eps);
  }
}

double clip_grad_norm(std::span<double> grads, double max_norm) {
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (double& g : grads) g *= scale;
  }
  return norm;
}

double PopArtStats::mean() const { return debias > 0.0 ? running_mean / debias : 0.0; }

double PopArtStats::sigma() const {
  if (!(debias > 0.0)) return 1.0;
  const double mu = mean();
  const double var = running_sq / debias - mu * mu;
  return std::max(std::sqrt(std::max(var, 0.0)), sigma_min);
}

void popart_update(PopArtStats& stats, Mlp& value_net, std::span<const double> targets) {
  if (targets.empty()) throw std::invalid_argument("popart: empty target batch");
  if (value_net.output_dim() != 1) throw std::invalid_argument("popart: scalar head required");
  double sum = 0.0;
  double sq = 0.0;
  for (double t : targets) {
    sum += t;
    sq += t * t;
  }
  const double n = static_cast<double>(targets.size());
  const double old_mu = stats.mean();
  const double old_sigma = stats.sigma();
  const double b = stats.beta;
  stats.running_mean = (1.0 - b) * stats.running_mean + b * sum / n;
  stats.running_sq = (1.0 - b) * stats.running_sq + b * sq / n;
  stats.debias = (1.0 - b) * stats.debias + b;
  const double new_mu = stats.mean();
  const double new_sigma = stats.sigma();

  const int last = value_net.num_layers() - 1;
  const int n_in = value_net.layer_sizes()[last];
  for (int i = 0; i < n_in; ++i) value_net.weight(last, 0, i) *= old_sigma / new_sigma;
  double& bias = value_net.bias(last, 0);
  bias = (old_sigma * bias + old_mu - new_mu) / new_sigma;
}

}  // namespace marvel::nn
