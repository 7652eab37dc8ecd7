#include "mislas/classifier.hpp"

#include <cmath>

#include "mislas/ops.hpp"

namespace mislas {

std::string to_string(HeadMode m) {
  switch (m) {
    case HeadMode::CRT: return "crt";
    case HeadMode::LWS: return "lws";
    case HeadMode::Generalized: return "generalized";
  }
  return "?";
}

HeadMode head_mode_from_string(const std::string& s) {
  if (s == "crt") return HeadMode::CRT;
  if (s == "lws") return HeadMode::LWS;
  if (s == "generalized") return HeadMode::Generalized;
  throw DomainError("unknown head mode '" + s + "'");
}

GeneralizedHead GeneralizedHead::from_weight(Matrix w, HeadMode mode, double retention, double lr_ratio_dw) {
  if (!(lr_ratio_dw >= 0.0)) throw DomainError("dW learning-rate ratio must be non-negative");
  GeneralizedHead h;
  const Index m = w.rows();
  const Index k = w.cols();
  h.weight = Tensor::constant(std::move(w));
  h.delta_weight = Tensor::constant(Matrix::Zero(m, k));
  h.scale = Tensor::constant(Matrix::Ones(1, k));
  h.mode = mode;
  h.lr_ratio_dw = lr_ratio_dw;
  switch (mode) {
    case HeadMode::CRT:
      h.retention = 0.0;
      h.delta_weight.set_requires_grad(true);
      break;
    case HeadMode::LWS:
      h.retention = 1.0;
      h.scale.set_requires_grad(true);
      break;
    case HeadMode::Generalized:
      h.retention = retention;
      h.delta_weight.set_requires_grad(true);
      h.scale.set_requires_grad(true);
      break;
  }
  return h;
}

Matrix GeneralizedHead::combined_weight() const { return retention * weight.value() + delta_weight.value(); }

Tensor head_forward(const GeneralizedHead& head, const Tensor& x) {
  if (x.cols() != head.feature_dim()) {
    throw DimensionError("head: expected feature width " + std::to_string(head.feature_dim()) + ", got " +
                         std::to_string(x.cols()));
  }
  Tensor combined = add(scale(head.weight, head.retention), head.delta_weight);
  return mul_row(matmul(x, combined), head.scale);
}

std::vector<ParamGroup> head_param_groups(const GeneralizedHead& head, double dw_weight_decay) {
  std::vector<ParamGroup> groups;
  if (head.scale.requires_grad()) groups.push_back({{head.scale}, 1.0, 0.0});
  if (head.delta_weight.requires_grad()) {
    const double mult = head.mode == HeadMode::CRT ? 1.0 : head.lr_ratio_dw;
    groups.push_back({{head.delta_weight}, mult, dw_weight_decay});
  }
  return groups;
}

std::vector<double> column_norms(const Matrix& w) {
  std::vector<double> out(w.cols());
  for (Index k = 0; k < w.cols(); ++k) out[k] = w.col(k).norm();
  return out;
}

WeightNorms weight_norms(const GeneralizedHead& head) {
  WeightNorms n;
  Matrix eff = head.combined_weight();
  const auto& s = head.scale.value();
  for (Index k = 0; k < eff.cols(); ++k) eff.col(k) *= s(0, k);
  n.effective = column_norms(eff);
  n.raw = column_norms(head.weight.value());
  return n;
}

}  // namespace mislas
