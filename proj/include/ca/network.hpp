#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ca/data.hpp"
#include "ca/tensor.hpp"

namespace ca {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 32;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 1;
};

// EMA mean/variance of hidden-layer pre-activations, one vector pair per
// hidden layer; the target statistics for the data-free feature regularizer.
struct ActivationStats {
  std::vector<std::vector<double>> mean;
  std::vector<std::vector<double>> var;
  std::vector<std::size_t> count;  // batches folded into each layer's EMA
  bool empty() const { return mean.empty(); }
};

// K-class MLP: relu hidden layers, softmax output. Serves as both the
// standard network and the auxiliary (distilled) network.
class Mlp {
 public:
  Mlp() = default;
  // He-style random init, deterministic per seed.
  Mlp(std::vector<std::size_t> layer_dims, std::uint64_t seed);

  const std::vector<std::size_t>& layer_dims() const { return dims_; }
  int class_count() const { return static_cast<int>(dims_.back()); }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t layer_count() const { return weights_.size(); }

  std::vector<Tensor>& weights() { return weights_; }
  std::vector<Tensor>& biases() { return biases_; }
  const std::vector<Tensor>& weights() const { return weights_; }
  const std::vector<Tensor>& biases() const { return biases_; }

  // Builds the forward pass inside the caller's graph; returns the logits
  // node. pre_activations, when non-null, receives hidden-layer nodes.
  NodeId logits_node(Graph& g, NodeId input, std::vector<NodeId>* pre_activations = nullptr) const;

  // Graph-free inference paths.
  Tensor logits(std::span<const double> batch, std::size_t n) const;
  Tensor predict(std::span<const double> batch, std::size_t n) const;
  std::vector<double> predict_one(std::span<const double> x) const;
  double confidence(std::span<const double> x) const;

  void set_requires_grad(bool b);
  void zero_grad();
  std::uint64_t fingerprint() const;

 private:
  std::vector<std::size_t> dims_;
  std::vector<Tensor> weights_;  // [in, out] per layer
  std::vector<Tensor> biases_;   // [1, out]
};

struct TrainResult {
  double final_accuracy = 0.0;
  double final_loss = 0.0;
  std::vector<double> epoch_losses;
  ActivationStats stats;
};

// Minibatch SGD with momentum + weight decay on the cross-entropy loss.
// Records pre-activation EMA statistics (decay 0.9) during the final epoch.
TrainResult train_standard(Mlp& net, const Dataset& dataset, const TrainConfig& cfg);

double accuracy_on(const Mlp& net, const Dataset& dataset);

void save_checkpoint(const Mlp& net, const ActivationStats& stats, std::uint64_t train_seed,
                     const std::string& kind, const std::string& path);
struct Checkpoint {
  Mlp net;
  ActivationStats stats;
  std::uint64_t train_seed = 0;
  std::string kind;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ca
