#include "mislas/losses.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "mislas/data.hpp"
#include "mislas/ops.hpp"

namespace mislas {

std::string to_string(RelatedFnKind k) {
  switch (k) {
    case RelatedFnKind::Concave: return "concave";
    case RelatedFnKind::Linear: return "linear";
    case RelatedFnKind::Convex: return "convex";
    case RelatedFnKind::Exponential: return "exponential";
  }
  return "?";
}

RelatedFnKind related_fn_from_string(const std::string& s) {
  if (s == "concave") return RelatedFnKind::Concave;
  if (s == "linear") return RelatedFnKind::Linear;
  if (s == "convex") return RelatedFnKind::Convex;
  if (s == "exponential") return RelatedFnKind::Exponential;
  throw DomainError("unknown related function '" + s + "'");
}

namespace {

void check_eps_pair(double eps1, double epsK) {
  if (!(0.0 <= epsK && epsK <= eps1 && eps1 <= 0.5)) {
    throw DomainError("smoothing factors must satisfy 0 <= epsK <= eps1 <= 0.5");
  }
}

}  // namespace

double related_fn_eval(const RelatedFn& fn, double eps1, double epsK, double n_y, double n_1, double n_K) {
  check_eps_pair(eps1, epsK);
  if (n_1 < n_K) throw DomainError("n_1 must be >= n_K");
  if (n_y < n_K || n_y > n_1) throw DomainError("n_y must lie in [n_K, n_1]");
  if (n_1 == n_K) return eps1;
  if (n_y == n_1) return eps1;
  if (n_y == n_K) return epsK;

  using std::numbers::pi;
  const double t = (n_y - n_K) / (n_1 - n_K);
  switch (fn.kind) {
    case RelatedFnKind::Concave: return epsK + (eps1 - epsK) * std::sin(pi * t / 2.0);
    case RelatedFnKind::Linear: return epsK + (eps1 - epsK) * t;
    case RelatedFnKind::Convex: return eps1 + (eps1 - epsK) * std::sin(3.0 * pi / 2.0 + pi * t / 2.0);
    case RelatedFnKind::Exponential:
      if (!(fn.p > 0.0)) throw DomainError("exponential related function needs p > 0");
      return epsK + (eps1 - epsK) * std::pow(t, fn.p);
  }
  throw DomainError("unknown related function");
}

SmoothingSchedule SmoothingSchedule::make(const RelatedFn& fn, double eps1, double epsK,
                                          const std::vector<long>& counts) {
  check_eps_pair(eps1, epsK);
  if (counts.empty()) throw DomainError("schedule needs at least one class");
  for (std::size_t j = 1; j < counts.size(); ++j) {
    if (counts[j] > counts[j - 1]) throw DomainError("class counts must be non-increasing");
  }
  SmoothingSchedule s;
  s.fn = fn;
  s.eps1 = eps1;
  s.epsK = epsK;
  const double n1 = static_cast<double>(counts.front());
  const double nK = static_cast<double>(counts.back());
  s.eps.reserve(counts.size());
  for (long n : counts) s.eps.push_back(related_fn_eval(fn, eps1, epsK, static_cast<double>(n), n1, nK));
  return s;
}

RowVector las_targets(double eps_y, int y, int num_classes) {
  if (num_classes < 2) throw DomainError("label smoothing needs at least two classes");
  if (y < 0 || y >= num_classes) throw DomainError("label out of range");
  if (!(eps_y >= 0.0 && eps_y <= 1.0)) throw DomainError("smoothing factor must lie in [0, 1]");
  RowVector q = RowVector::Constant(num_classes, eps_y / static_cast<double>(num_classes - 1));
  q(y) = 1.0 - eps_y;
  return q;
}

RowVector las_targets(const SmoothingSchedule& schedule, int y) {
  if (y < 0 || y >= schedule.num_classes()) throw DomainError("label out of range");
  return las_targets(schedule.eps[y], y, schedule.num_classes());
}

Matrix las_targets(const SmoothingSchedule& schedule, const std::vector<int>& labels) {
  Matrix q(static_cast<Index>(labels.size()), schedule.num_classes());
  for (std::size_t i = 0; i < labels.size(); ++i) q.row(static_cast<Index>(i)) = las_targets(schedule, labels[i]);
  return q;
}

Tensor soft_ce_loss(const Matrix& targets, const Tensor& logits) {
  if (targets.rows() != logits.rows() || targets.cols() != logits.cols()) {
    throw DimensionError("soft_ce_loss: targets and logits differ in shape");
  }
  if (logits.rows() == 0) throw DimensionError("soft_ce_loss: empty batch");
  const double inv_m = 1.0 / static_cast<double>(logits.rows());
  return scale(sum(mul(Tensor::constant(targets), log_softmax(logits))), -inv_m);
}

Tensor ce_loss(const std::vector<int>& labels, const Tensor& logits) {
  return soft_ce_loss(one_hot(labels, static_cast<int>(logits.cols())), logits);
}

ClassWeights::ClassWeights(std::vector<double> weights) : w(std::move(weights)) {
  for (double v : w) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("class weights must be positive");
  }
}

ClassWeights ClassWeights::effective_number(const std::vector<long>& counts, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("effective-number gamma must lie in [0, 1)");
  std::vector<double> w;
  w.reserve(counts.size());
  for (long n : counts) {
    if (n < 1) throw DomainError("effective-number weights need every class populated");
    w.push_back((1.0 - gamma) / (1.0 - std::pow(gamma, static_cast<double>(n))));
  }
  double total = 0.0;
  for (double v : w) total += v;
  const double norm = static_cast<double>(w.size()) / total;
  for (double& v : w) v *= norm;
  return ClassWeights(std::move(w));
}

Tensor weighted_ce_loss(const ClassWeights& weights, const std::vector<int>& labels, const Tensor& logits) {
  if (static_cast<Index>(weights.w.size()) != logits.cols()) {
    throw DimensionError("weighted_ce_loss: one weight per class required");
  }
  Matrix q = one_hot(labels, static_cast<int>(logits.cols()));
  for (std::size_t i = 0; i < labels.size(); ++i) q(static_cast<Index>(i), labels[i]) = weights.w[labels[i]];
  return soft_ce_loss(q, logits);
}

double las_optimal_logit_gap(int num_classes, double eps_y) {
  if (num_classes < 2) throw DomainError("need at least two classes");
  if (eps_y == 0.0) return std::numeric_limits<double>::infinity();
  if (!(eps_y > 0.0 && eps_y < 1.0)) throw DomainError("smoothing factor must lie in [0, 1)");
  return std::log(static_cast<double>(num_classes - 1) * (1.0 - eps_y) / eps_y);
}

}  // namespace mislas
