#include "mislas/net.hpp"

#include <cmath>

#include "mislas/ops.hpp"

namespace mislas {

Linear Linear::init(Index in, Index out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix w(out, in);
  for (Index r = 0; r < out; ++r)
    for (Index c = 0; c < in; ++c) w(r, c) = u(rng);
  Matrix b(1, out);
  for (Index c = 0; c < out; ++c) b(0, c) = u(rng);
  return {Tensor::parameter(std::move(w)), Tensor::parameter(std::move(b))};
}

Tensor Linear::forward(const Tensor& x) const {
  if (x.cols() != in_features()) {
    throw DimensionError("linear: expected width " + std::to_string(in_features()) + ", got " +
                         std::to_string(x.cols()));
  }
  return add_row(matmul(x, transpose(weight)), bias);
}

std::string to_string(BnMode m) {
  switch (m) {
    case BnMode::Train: return "train";
    case BnMode::Eval: return "eval";
    case BnMode::ShiftLearn: return "shift_learn";
  }
  return "?";
}

BnMode bn_mode_from_string(const std::string& s) {
  if (s == "train") return BnMode::Train;
  if (s == "eval") return BnMode::Eval;
  if (s == "shift_learn") return BnMode::ShiftLearn;
  throw DomainError("unknown BN mode '" + s + "'");
}

BatchNormState BatchNormState::init(Index channels, double momentum, double eps) {
  if (!(momentum > 0.0 && momentum <= 1.0)) throw DomainError("BN momentum must lie in (0, 1]");
  if (!(eps > 0.0)) throw DomainError("BN eps must be positive");
  BatchNormState s;
  s.running_mean = RowVector::Zero(channels);
  s.running_var = RowVector::Ones(channels);
  s.scale = Tensor::parameter(Matrix::Ones(1, channels));
  s.shift = Tensor::parameter(Matrix::Zero(1, channels));
  s.momentum = momentum;
  s.eps = eps;
  return s;
}

Tensor bn_forward(BatchNormState& state, const Tensor& h) {
  if (h.cols() != state.channels()) {
    throw DimensionError("batch norm: expected " + std::to_string(state.channels()) + " channels, got " +
                         std::to_string(h.cols()));
  }
  const bool frozen_affine = state.mode == BnMode::ShiftLearn;
  Tensor alpha = frozen_affine ? Tensor::constant(state.scale.value()) : state.scale;
  Tensor beta = frozen_affine ? Tensor::constant(state.shift.value()) : state.shift;

  if (state.mode == BnMode::Eval) {
    Tensor mu = Tensor::constant(state.running_mean);
    RowVector inv = (state.running_var.array() + state.eps).rsqrt();
    Tensor normalized = mul_row(sub_row(h, mu), Tensor::constant(inv));
    return add_row(mul_row(normalized, alpha), beta);
  }

  if (h.rows() < 2) throw ContractError("batch norm in training modes needs at least two rows");
  Tensor mu = col_mean(h);
  Tensor centered = sub_row(h, mu);
  Tensor var = col_mean(square(centered));
  Tensor inv = rsqrt(add_scalar(var, state.eps));
  Tensor normalized = mul_row(centered, inv);

  const double m = state.momentum;
  state.running_mean = (1.0 - m) * state.running_mean + m * mu.value().row(0);
  state.running_var = (1.0 - m) * state.running_var + m * var.value().row(0);

  return add_row(mul_row(normalized, alpha), beta);
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  if (s == "identity") return Activation::Identity;
  throw DomainError("unknown activation '" + s + "'");
}

void BackboneConfig::validate() const {
  if (input_dim < 1) throw DomainError("backbone input width must be positive");
  for (Index w : hidden) {
    if (w < 1) throw DomainError("hidden widths must be positive");
  }
  if (batch_norm && hidden.empty()) throw DomainError("batch norm requires at least one hidden layer");
}

Backbone::Backbone(BackboneConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(cfg_.seed);
  Index in = cfg_.input_dim;
  for (Index w : cfg_.hidden) {
    linears_.push_back(Linear::init(in, w, rng));
    if (cfg_.batch_norm) norms_.push_back(BatchNormState::init(w, cfg_.bn_momentum, cfg_.bn_eps));
    in = w;
  }
}

Tensor Backbone::forward(const Tensor& x, BnMode mode) {
  if (x.cols() != cfg_.input_dim) {
    throw DimensionError("backbone: expected input width " + std::to_string(cfg_.input_dim) + ", got " +
                         std::to_string(x.cols()));
  }
  Tensor h = x;
  for (std::size_t i = 0; i < linears_.size(); ++i) {
    h = linears_[i].forward(h);
    if (cfg_.batch_norm) {
      norms_[i].mode = mode;
      h = bn_forward(norms_[i], h);
    }
    switch (cfg_.activation) {
      case Activation::Relu: h = relu(h); break;
      case Activation::Tanh: h = mislas::tanh(h); break;
      case Activation::Identity: break;
    }
  }
  return h;
}

std::vector<Tensor> Backbone::parameters() const {
  std::vector<Tensor> out;
  for (const auto& l : linears_) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  for (const auto& n : norms_) {
    out.push_back(n.scale);
    out.push_back(n.shift);
  }
  return out;
}

void Backbone::set_trainable(bool on) {
  for (auto& p : parameters()) p.set_requires_grad(on);
}

void bn_shift_stats(Backbone& backbone, Sampler& sampler, Index batch_size, long steps) {
  if (steps <= 0) return;
  if (sampler.kind() != SamplerKind::ClassBalanced) {
    throw ContractError("shift learning expects a class-balanced sampler");
  }
  for (const auto& p : backbone.parameters()) {
    if (p.requires_grad()) throw ContractError("shift learning expects a frozen backbone");
  }
  for (long s = 0; s < steps; ++s) {
    Batch b = sampler.next_batch(batch_size);
    backbone.forward(Tensor::constant(std::move(b.features)), BnMode::ShiftLearn);
  }
}

}  // namespace mislas
