#pragma once

#include <string>
#include <vector>

#include "mislas/tensor.hpp"

namespace mislas {

/// Shape of the map from class count N_y to smoothing factor eps_y.
enum class RelatedFnKind { Concave, Linear, Convex, Exponential };

struct RelatedFn {
  RelatedFnKind kind = RelatedFnKind::Concave;
  double p = 2.0;  // exponent, Exponential only
};

std::string to_string(RelatedFnKind k);
RelatedFnKind related_fn_from_string(const std::string& s);

/// eps_y as a function of the class count, decreasing from eps1 at n_1 to
/// epsK at n_K. With t = (n_y - n_K) / (n_1 - n_K):
///   Concave      epsK + (eps1 - epsK) sin(pi t / 2)
///   Linear       epsK + (eps1 - epsK) t
///   Convex       eps1 + (eps1 - epsK) sin(3 pi / 2 + pi t / 2)
///   Exponential  epsK + (eps1 - epsK) t^p
/// Endpoints return eps1 / epsK exactly. A balanced set (n_1 == n_K) maps every
/// class to eps1.
double related_fn_eval(const RelatedFn& fn, double eps1, double epsK, double n_y, double n_1, double n_K);

/// Per-class label-smoothing factors materialized from class counts.
struct SmoothingSchedule {
  RelatedFn fn;
  double eps1 = 0.0;
  double epsK = 0.0;
  std::vector<double> eps;

  /// Requires 0 <= epsK <= eps1 <= 0.5 and non-increasing counts.
  static SmoothingSchedule make(const RelatedFn& fn, double eps1, double epsK, const std::vector<long>& counts);
  int num_classes() const { return static_cast<int>(eps.size()); }
};

/// q[y] = 1 - eps, q[i != y] = eps / (K - 1).
RowVector las_targets(double eps_y, int y, int num_classes);
RowVector las_targets(const SmoothingSchedule& schedule, int y);
Matrix las_targets(const SmoothingSchedule& schedule, const std::vector<int>& labels);

/// Mean over rows of -sum_i q_i log softmax(z)_i.
Tensor soft_ce_loss(const Matrix& targets, const Tensor& logits);
/// Plain cross-entropy on hard labels.
Tensor ce_loss(const std::vector<int>& labels, const Tensor& logits);

/// Positive per-class weights.
struct ClassWeights {
  std::vector<double> w;

  explicit ClassWeights(std::vector<double> weights);
  /// w_y proportional to (1 - gamma) / (1 - gamma^N_y), rescaled to mean 1.
  static ClassWeights effective_number(const std::vector<long>& counts, double gamma = 0.999);
};

/// Mean over rows of -w_y log p_y.
Tensor weighted_ce_loss(const ClassWeights& weights, const std::vector<int>& labels, const Tensor& logits);

/// log((K-1)(1-eps)/eps): the logit gap between the target class and every
/// other class at the minimum of the smoothed loss. +inf for eps == 0.
double las_optimal_logit_gap(int num_classes, double eps_y);

}  // namespace mislas
