#pragma once

#include <cstdint>
#include <vector>

#include "mislas/data.hpp"
#include "mislas/tensor.hpp"

namespace mislas {

/// y = x W^T + b with W stored out x in.
struct Linear {
  Tensor weight;
  Tensor bias;

  /// Uniform(-1/sqrt(in), 1/sqrt(in)) initialization.
  static Linear init(Index in, Index out, Rng& rng);
  Index in_features() const { return weight.cols(); }
  Index out_features() const { return weight.rows(); }
  Tensor forward(const Tensor& x) const;
};

enum class BnMode { Train, Eval, ShiftLearn };

std::string to_string(BnMode m);
BnMode bn_mode_from_string(const std::string& s);

/// Per-channel batch normalization state.
///
/// Train and ShiftLearn normalize with the biased batch statistics and fold
/// them into the running estimates; Eval normalizes with the running
/// estimates. In ShiftLearn the affine parameters are used as constants, so
/// they never receive gradient.
struct BatchNormState {
  RowVector running_mean;
  RowVector running_var;
  Tensor scale;  // alpha
  Tensor shift;  // beta
  double momentum = 0.1;
  double eps = 1e-5;
  BnMode mode = BnMode::Train;

  static BatchNormState init(Index channels, double momentum = 0.1, double eps = 1e-5);
  Index channels() const { return running_mean.size(); }
};

Tensor bn_forward(BatchNormState& state, const Tensor& h);

enum class Activation { Relu, Tanh, Identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct BackboneConfig {
  Index input_dim = 2;
  std::vector<Index> hidden{64, 64}; // widths of the Linear -> [BN] -> act blocks
  Activation activation = Activation::Relu;
  bool batch_norm = true;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
  std::uint64_t seed = 0;

  Index feature_dim() const { return hidden.empty() ? input_dim : hidden.back(); }
  void validate() const;
};

/// MLP feature extractor; with no hidden layers it is the identity.
class Backbone {
 public:
  Backbone() = default;
  explicit Backbone(BackboneConfig cfg);

  const BackboneConfig& config() const { return cfg_; }
  Index feature_dim() const { return cfg_.feature_dim(); }

  /// Sets every BN layer to `mode` for this call and runs the blocks.
  Tensor forward(const Tensor& x, BnMode mode);

  std::vector<Linear>& linears() { return linears_; }
  const std::vector<Linear>& linears() const { return linears_; }
  std::vector<BatchNormState>& norms() { return norms_; }
  const std::vector<BatchNormState>& norms() const { return norms_; }

  /// Weights, biases and BN affine parameters.
  std::vector<Tensor> parameters() const;
  void set_trainable(bool on);

 private:
  BackboneConfig cfg_;
  std::vector<Linear> linears_;
  std::vector<BatchNormState> norms_;
};

/// Runs `steps` ShiftLearn forward passes of sampler batches through a frozen
/// backbone so the BN running statistics follow the sampler's distribution.
void bn_shift_stats(Backbone& backbone, Sampler& sampler, Index batch_size, long steps);

}  // namespace mislas
