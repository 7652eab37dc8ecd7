#pragma once

#include <string>
#include <vector>

#include "mislas/optim.hpp"
#include "mislas/tensor.hpp"

namespace mislas {

/// cRT: s = 1 fixed, r = 0, dW learnable.
/// LWS: r = 1, dW = 0 fixed, s learnable.
/// Generalized: s and dW learnable, r fixed (default 1).
enum class HeadMode { CRT, LWS, Generalized };

std::string to_string(HeadMode m);
HeadMode head_mode_from_string(const std::string& s);

/// Stage-2 classifier z = diag(s) (r W + dW)^T x, with W (M x K) frozen.
struct GeneralizedHead {
  Tensor weight;        // W, never trained here
  Tensor delta_weight;  // dW
  Tensor scale;         // s, stored 1 x K
  double retention = 1.0;
  double lr_ratio_dw = 1.0;
  HeadMode mode = HeadMode::Generalized;

  /// dW = 0 and s = 1, so the head starts at W^T x. `retention` is forced to
  /// 0 in cRT mode and 1 in LWS mode.
  static GeneralizedHead from_weight(Matrix w, HeadMode mode, double retention = 1.0, double lr_ratio_dw = 1.0);

  Index feature_dim() const { return weight.rows(); }
  Index num_classes() const { return weight.cols(); }
  /// r W + dW.
  Matrix combined_weight() const;
};

/// Logits for a batch of features (m x M) -> m x K.
Tensor head_forward(const GeneralizedHead& head, const Tensor& x);

/// {s} at 1x and {dW} at lr_ratio_dw x (1x in cRT mode, where dW is the whole
/// classifier). Frozen tensors are left out. L2 applies to dW only.
std::vector<ParamGroup> head_param_groups(const GeneralizedHead& head, double dw_weight_decay = 0.0);

struct WeightNorms {
  std::vector<double> effective;  // ||s_k (r W + dW)[:, k]||
  std::vector<double> raw;        // ||W[:, k]||
};

WeightNorms weight_norms(const GeneralizedHead& head);
/// Column norms of a plain M x K weight.
std::vector<double> column_norms(const Matrix& w);

}  // namespace mislas
