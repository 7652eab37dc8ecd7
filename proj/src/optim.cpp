#include "mislas/optim.hpp"

namespace mislas {

Sgd::Sgd(std::vector<ParamGroup> groups, double momentum) : groups_(std::move(groups)), momentum_(momentum) {
  buffers_.resize(groups_.size());
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    for (const auto& p : groups_[g].params) {
      if (!p.requires_grad()) throw ContractError("optimizer given a tensor that does not require grad");
    }
    buffers_[g].resize(groups_[g].params.size());
  }
}

void Sgd::step(double lr) {
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    auto& group = groups_[g];
    const double step_size = lr * group.lr_multiplier;
    for (std::size_t i = 0; i < group.params.size(); ++i) {
      auto& p = group.params[i];
      Matrix d = p.grad();
      if (group.weight_decay != 0.0) d += group.weight_decay * p.value();
      auto& buf = buffers_[g][i];
      if (buf.size() == 0) {
        buf = std::move(d);
      } else {
        buf = momentum_ * buf + d;
      }
      p.mutable_value() -= step_size * buf;
    }
  }
}

void Sgd::zero_grad() {
  for (auto& group : groups_) {
    for (auto& p : group.params) p.zero_grad();
  }
}

}  // namespace mislas
