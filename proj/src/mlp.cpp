#include "marvel/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace marvel::nn {

Mlp::Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("an MLP needs input and output sizes");
  for (int s : sizes_) {
    if (s < 1) throw std::invalid_argument("layer sizes must be positive");
  }
  std::size_t off = 0;
  for (int l = 0; l < num_layers(); ++l) {
    offsets_.push_back(off);
    off += static_cast<std::size_t>(sizes_[l + 1]) * (sizes_[l] + 1);
  }
  params_.assign(off, 0.0);
}

std::size_t Mlp::bias_offset(int layer) const {
  return offsets_.at(layer) + static_cast<std::size_t>(sizes_[layer + 1]) * sizes_[layer];
}

double& Mlp::weight(int layer, int out, int in) {
  return params_[offsets_.at(layer) + static_cast<std::size_t>(out) * sizes_[layer] + in];
}

double& Mlp::bias(int layer, int out) { return params_[bias_offset(layer) + out]; }

std::vector<double> Mlp::forward(std::span<const double> x) const {
  Cache c;
  return forward(x, c);
}

std::vector<double> Mlp::forward(std::span<const double> x, Cache& cache) const {
  if (static_cast<int>(x.size()) != input_dim()) {
    throw std::invalid_argument("input has " + std::to_string(x.size()) + " entries, expected " +
                                std::to_string(input_dim()));
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite network input");
  }
  cache.acts.resize(sizes_.size());
  cache.acts[0].assign(x.begin(), x.end());
  for (int l = 0; l < num_layers(); ++l) {
    const int n_in = sizes_[l];
    const int n_out = sizes_[l + 1];
    const double* w = params_.data() + offsets_[l];
    const double* b = w + static_cast<std::size_t>(n_out) * n_in;
    const std::vector<double>& in = cache.acts[l];
    std::vector<double>& out = cache.acts[l + 1];
    out.resize(n_out);
    const bool hidden = l + 1 < num_layers();
    for (int o = 0; o < n_out; ++o) {
      const double* row = w + static_cast<std::size_t>(o) * n_in;
      double z = b[o];
      for (int i = 0; i < n_in; ++i) z += row[i] * in[i];
      out[o] = hidden ? std::tanh(z) : z;
    }
  }
  return cache.acts.back();
}

void Mlp::backward(const Cache& cache, std::span<const double> d_out, std::span<double> grad,
                   std::vector<double>* d_input) const {
  if (static_cast<int>(d_out.size()) != output_dim() || grad.size() != params_.size()) {
    throw std::invalid_argument("backward: gradient shapes do not match the network");
  }
  std::vector<double> delta(d_out.begin(), d_out.end());
  std::vector<double> prev;
  for (int l = num_layers() - 1; l >= 0; --l) {
    const int n_in = sizes_[l];
    const int n_out = sizes_[l + 1];
    const double* w = params_.data() + offsets_[l];
    double* gw = grad.data() + offsets_[l];
    double* gb = gw + static_cast<std::size_t>(n_out) * n_in;
    const std::vector<double>& in = cache.acts[l];
    for (int o = 0; o < n_out; ++o) {
      const double d = delta[o];
      gb[o] += d;
      double* grow = gw + static_cast<std::size_t>(o) * n_in;
      for (int i = 0; i < n_in; ++i) grow[i] += d * in[i];
    }
    if (l == 0 && d_input == nullptr) break;
    prev.assign(n_in, 0.0);
    for (int o = 0; o < n_out; ++o) {
      const double d = delta[o];
      const double* row = w + static_cast<std::size_t>(o) * n_in;
      for (int i = 0; i < n_in; ++i) prev[i] += row[i] * d;
    }
    if (l > 0) {
      // in[] holds tanh activations of layer l-1.
      for (int i = 0; i < n_in; ++i) prev[i] *= 1.0 - in[i] * in[i];
    }
    delta.swap(prev);
  }
  if (d_input != nullptr) *d_input = delta;
}

void Mlp::init_orthogonal(std::mt19937_64& rng, double hidden_gain, double output_gain) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int l = 0; l < num_layers(); ++l) {
    const int n_in = sizes_[l];
    const int n_out = sizes_[l + 1];
    // Orthonormalize along the longer side with modified Gram-Schmidt.
    const bool by_rows = n_out <= n_in;
    const int count = by_rows ? n_out : n_in;
    const int len = by_rows ? n_in : n_out;
    std::vector<std::vector<double>> vecs(count, std::vector<double>(len));
    for (auto& v : vecs) {
      for (;;) {
        for (double& e : v) e = normal(rng);
        for (const auto* u = vecs.data(); u != &v; ++u) {
          double dot = 0.0;
          for (int k = 0; k < len; ++k) dot += (*u)[k] * v[k];
          for (int k = 0; k < len; ++k) v[k] -= dot * (*u)[k];
        }
        double norm = 0.0;
        for (double e : v) norm += e * e;
        norm = std::sqrt(norm);
        if (norm > 1e-8) {
          for (double& e : v) e /= norm;
          break;
        }
      }
    }
    const double gain = l + 1 == num_layers() ? output_gain : hidden_gain;
    for (int o = 0; o < n_out; ++o) {
      for (int i = 0; i < n_in; ++i) {
        weight(l, o, i) = gain * (by_rows ? vecs[o][i] : vecs[i][o]);
      }
      bias(l, o) = 0.0;
    }
  }
}

std::vector<double> log_softmax(std::span<const double> logits, const std::vector<bool>* mask) {
  if (mask != nullptr && mask->size() != logits.size()) {
    throw std::invalid_argument("mask size does not match the logits");
  }
  const double neg_inf = -std::numeric_limits<double>::infinity();
  double mx = neg_inf;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    if (mask == nullptr || (*mask)[k]) mx = std::max(mx, logits[k]);
  }
  if (mx == neg_inf) throw std::invalid_argument("every action is masked out");
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    if (mask == nullptr || (*mask)[k]) sum += std::exp(logits[k] - mx);
  }
  const double lse = mx + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = (mask == nullptr || (*mask)[k]) ? logits[k] - lse : neg_inf;
  }
  return out;
}

std::vector<double> softmax(std::span<const double> logits, const std::vector<bool>* mask) {
  std::vector<double> p = log_softmax(logits, mask);
  for (double& v : p) v = std::exp(v);
  return p;
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

PolicyOutput forward_policy(const Mlp& net, std::span<const double> input,
                            const std::vector<bool>* mask) {
  PolicyOutput out;
  out.logits = net.forward(input);
  out.log_probs = log_softmax(out.logits, mask);
  out.probs.resize(out.log_probs.size());
  for (std::size_t k = 0; k < out.probs.size(); ++k) out.probs[k] = std::exp(out.log_probs[k]);
  return out;
}

double forward_value(const Mlp& net, std::span<const double> input) {
  if (net.output_dim() != 1) throw std::invalid_argument("value network must have one output");
  return net.forward(input)[0];
}

}  // namespace marvel::nn
