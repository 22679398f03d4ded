#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace marvel::nn {

// Fully connected net with tanh hidden layers and a linear output layer.
// Parameters live in one flat vector: for each layer, the row-major weight
// matrix (out x in) followed by the bias.
class Mlp {
 public:
  Mlp() = default;
  // All parameters start at zero. Needs at least an input and an output size.
  explicit Mlp(std::vector<int> layer_sizes);

  // Activations recorded by forward() for a later backward().
  struct Cache {
    std::vector<std::vector<double>> acts;  // acts[0] is the input
  };

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  std::size_t param_count() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t weight_offset(int layer) const { return offsets_.at(layer); }
  std::size_t bias_offset(int layer) const;
  double& weight(int layer, int out, int in);
  double& bias(int layer, int out);

  // Throws std::invalid_argument on a wrong-sized or non-finite input.
  std::vector<double> forward(std::span<const double> x) const;
  std::vector<double> forward(std::span<const double> x, Cache& cache) const;

  // Adds dL/dparams into `grad` given dL/doutput; fills dL/dinput if asked.
  void backward(const Cache& cache, std::span<const double> d_out, std::span<double> grad,
                std::vector<double>* d_input = nullptr) const;

  // Orthogonal rows/columns scaled by `hidden_gain`, output layer by
  // `output_gain`; biases zero.
  void init_orthogonal(std::mt19937_64& rng, double hidden_gain = 1.4142135623730951,
                       double output_gain = 0.01);

 private:
  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

// Softmax over logits; entries with mask[k] == false get probability 0.
// Throws if the mask leaves nothing valid.
std::vector<double> softmax(std::span<const double> logits,
                            const std::vector<bool>* mask = nullptr);
// Same as log(softmax) but computed stably; masked entries are -inf.
std::vector<double> log_softmax(std::span<const double> logits,
                                const std::vector<bool>* mask = nullptr);
// Shannon entropy in nats, skipping zero-probability entries.
double entropy(std::span<const double> probs);

struct PolicyOutput {
  std::vector<double> logits;
  std::vector<double> probs;
  std::vector<double> log_probs;
};

PolicyOutput forward_policy(const Mlp& net, std::span<const double> input,
                            const std::vector<bool>* mask = nullptr);
double forward_value(const Mlp& net, std::span<const double> input);

}  // namespace marvel::nn
