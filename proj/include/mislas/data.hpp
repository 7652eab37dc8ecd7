#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mislas/tensor.hpp"

namespace mislas {

using Rng = std::mt19937_64;

enum class Split { Many, Medium, Few };

std::string to_string(Split s);
Split split_from_string(const std::string& s);
/// many > 100, 20 <= medium <= 100, few < 20 training instances.
Split split_for_count(long count);

/// Features with integer labels in [0, K).
struct LabeledSet {
  Matrix features;
  std::vector<int> labels;

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }
};

/// Long-tailed training set, its balanced test set, and per-class metadata.
///
/// Classes are indexed in non-increasing order of training count, and the
/// split tags are derived from the training counts.
struct LongTailedDataset {
  LabeledSet train;
  LabeledSet test;
  std::vector<long> class_counts;
  std::vector<Split> splits;
  std::uint64_t seed = 0;
  double spread = 0.0;

  int num_classes() const { return static_cast<int>(class_counts.size()); }
  Index dim() const { return train.dim(); }
  double imbalance_factor() const;

  /// Throws DomainError when an invariant does not hold.
  void validate() const;
};

/// Exponential profile counts[j] = round(n_max * beta^(-j/(k-1))), beta = n_max/n_min,
/// with both endpoints exact.
std::vector<long> make_longtail_profile(long n_max, long n_min, int k);

/// Class centers: +/- unit axes while 2*dim allows, then seeded unit
/// directions. Depends only on (k, dim).
Matrix blob_centers(int k, Index dim);

/// Draws `counts[j]` isotropic Gaussian samples around `centers.row(j)` with
/// standard deviation `spread`, plus `test_per_class` samples per class for a
/// balanced test set.
LongTailedDataset gen_blobs_at(const std::vector<long>& counts, const Matrix& centers, double spread,
                               std::uint64_t seed, long test_per_class = 100);

/// Blobs centered on the unit sphere in R^dim.
LongTailedDataset gen_gaussian_blobs(const std::vector<long>& counts, Index dim, double spread,
                                     std::uint64_t seed, long test_per_class = 100);

/// Builds metadata (counts, splits) for externally produced sets. Classes
/// must already be ordered by non-increasing training count.
LongTailedDataset dataset_from_sets(LabeledSet train, LabeledSet test, int num_classes);

enum class SamplerKind { InstanceBalanced, ClassBalanced };

struct Batch {
  Matrix features;
  std::vector<int> labels;
};

/// Draws batches with replacement under one of the two sampling strategies.
/// Owns its RNG; one sampler per thread.
class Sampler {
 public:
  Sampler(SamplerKind kind, const LongTailedDataset& ds, std::uint64_t seed);

  Batch next_batch(Index m);
  /// Draws a single training-instance index.
  Index draw();
  SamplerKind kind() const { return kind_; }

 private:
  SamplerKind kind_;
  const LongTailedDataset* ds_;
  Rng rng_;
  std::vector<std::vector<Index>> by_class_;
  std::vector<int> nonempty_classes_;
};

struct MixupConfig {
  double alpha = 0.2;
  bool enabled = false;
  /// Overrides the Beta draw; used for endpoint checks.
  std::optional<double> forced_lambda;

  void validate() const;
};

/// lambda ~ Beta(alpha, alpha), or the forced value.
double draw_mixup_lambda(const MixupConfig& cfg, Rng& rng);

struct MixedBatch {
  Matrix features;
  Matrix targets;  // soft labels, one row per sample
  double lambda = 1.0;
};

/// x = l*x1 + (1-l)*x2, y = l*y1 + (1-l)*y2 with y given as probability rows.
MixedBatch mixup_batch(const Matrix& x1, const Matrix& y1, const Matrix& x2, const Matrix& y2,
                       const MixupConfig& cfg, Rng& rng);

/// Mixes a batch with a random permutation of itself.
MixedBatch mixup_shuffled(const Matrix& x, const Matrix& y, const MixupConfig& cfg, Rng& rng);

Matrix one_hot(const std::vector<int>& labels, int num_classes);

}  // namespace mislas
