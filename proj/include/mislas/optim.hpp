#pragma once

#include <vector>

#include "mislas/tensor.hpp"

namespace mislas {

/// Parameters sharing a learning-rate multiplier and L2 coefficient.
struct ParamGroup {
  std::vector<Tensor> params;
  double lr_multiplier = 1.0;
  double weight_decay = 0.0;
};

/// SGD with heavy-ball momentum (no dampening, no Nesterov).
///
/// buf <- momentum * buf + (grad + wd * p);  p <- p - lr * mult * buf.
/// The first step initializes buf to the gradient.
class Sgd {
 public:
  explicit Sgd(std::vector<ParamGroup> groups, double momentum = 0.9);

  void step(double lr);
  void zero_grad();

  const std::vector<ParamGroup>& groups() const { return groups_; }

 private:
  std::vector<ParamGroup> groups_;
  double momentum_;
  std::vector<std::vector<Matrix>> buffers_;
};

}  // namespace mislas
