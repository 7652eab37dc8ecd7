#include "mislas/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mislas {

std::string to_string(Split s) {
  switch (s) {
    case Split::Many: return "many";
    case Split::Medium: return "medium";
    case Split::Few: return "few";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "many") return Split::Many;
  if (s == "medium") return Split::Medium;
  if (s == "few") return Split::Few;
  throw DomainError("unknown split tag '" + s + "'");
}

Split split_for_count(long count) {
  if (count > 100) return Split::Many;
  if (count >= 20) return Split::Medium;
  return Split::Few;
}

double LongTailedDataset::imbalance_factor() const {
  if (class_counts.empty() || class_counts.back() == 0) return 0.0;
  return static_cast<double>(class_counts.front()) / static_cast<double>(class_counts.back());
}

void LongTailedDataset::validate() const {
  const int k = num_classes();
  if (k < 1) throw DomainError("dataset has no classes");
  if (static_cast<int>(splits.size()) != k) throw DomainError("split tags do not cover every class");
  if (train.labels.size() != static_cast<std::size_t>(train.features.rows())) {
    throw DomainError("train labels and features disagree in length");
  }
  if (test.labels.size() != static_cast<std::size_t>(test.features.rows())) {
    throw DomainError("test labels and features disagree in length");
  }
  if (test.size() > 0 && test.dim() != train.dim()) throw DomainError("train and test feature widths differ");
  for (int j = 1; j < k; ++j) {
    if (class_counts[j] > class_counts[j - 1]) throw DomainError("class counts must be non-increasing");
  }
  std::vector<long> seen(k, 0);
  for (int y : train.labels) {
    if (y < 0 || y >= k) throw DomainError("train label out of range");
    ++seen[y];
  }
  for (int y : test.labels) {
    if (y < 0 || y >= k) throw DomainError("test label out of range");
  }
  if (seen != class_counts) throw DomainError("class counts disagree with label frequencies");
  for (int j = 0; j < k; ++j) {
    if (splits[j] != split_for_count(class_counts[j])) throw DomainError("split tag disagrees with class count");
  }
}

std::vector<long> make_longtail_profile(long n_max, long n_min, int k) {
  if (n_min < 1) throw DomainError("n_min must be at least 1");
  if (n_max < n_min) throw DomainError("n_max must be >= n_min");
  if (k < 2) throw DomainError("need at least two classes");
  const double beta = static_cast<double>(n_max) / static_cast<double>(n_min);
  std::vector<long> counts(k);
  counts.front() = n_max;
  counts.back() = n_min;
  for (int j = 1; j < k - 1; ++j) {
    const double e = -static_cast<double>(j) / static_cast<double>(k - 1);
    counts[j] = std::lround(static_cast<double>(n_max) * std::pow(beta, e));
  }
  return counts;
}

Matrix blob_centers(int k, Index dim) {
  if (dim < 2) throw DomainError("blob dimension must be >= 2");
  Matrix c = Matrix::Zero(k, dim);
  Rng rng(0x6d69736c6173ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int j = 0; j < k; ++j) {
    if (j < 2 * dim) {
      c(j, j / 2) = (j % 2 == 0) ? 1.0 : -1.0;
    } else {
      for (Index d = 0; d < dim; ++d) c(j, d) = normal(rng);
      c.row(j).normalize();
    }
  }
  return c;
}

LongTailedDataset gen_blobs_at(const std::vector<long>& counts, const Matrix& centers, double spread,
                               std::uint64_t seed, long test_per_class) {
  const int k = static_cast<int>(counts.size());
  if (centers.rows() != k) throw DimensionError("one center per class required");
  if (centers.cols() < 1) throw DomainError("centers need at least one coordinate");
  if (!(spread > 0.0)) throw DomainError("spread must be positive");
  if (test_per_class < 0) throw DomainError("test_per_class must be non-negative");
  for (long n : counts) {
    if (n < 0) throw DomainError("negative class count");
  }

  const Index dim = centers.cols();
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, spread);

  auto fill = [&](LabeledSet& set, auto count_of) {
    Index total = 0;
    for (int j = 0; j < k; ++j) total += count_of(j);
    set.features.resize(total, dim);
    set.labels.resize(total);
    Index row = 0;
    for (int j = 0; j < k; ++j) {
      for (long i = 0; i < count_of(j); ++i, ++row) {
        for (Index d = 0; d < dim; ++d) set.features(row, d) = centers(j, d) + normal(rng);
        set.labels[row] = j;
      }
    }
  };

  LongTailedDataset ds;
  fill(ds.train, [&](int j) { return counts[j]; });
  fill(ds.test, [&](int) { return test_per_class; });
  ds.class_counts = counts;
  ds.splits.reserve(k);
  for (long n : counts) ds.splits.push_back(split_for_count(n));
  ds.seed = seed;
  ds.spread = spread;
  ds.validate();
  return ds;
}

LongTailedDataset gen_gaussian_blobs(const std::vector<long>& counts, Index dim, double spread,
                                     std::uint64_t seed, long test_per_class) {
  return gen_blobs_at(counts, blob_centers(static_cast<int>(counts.size()), dim), spread, seed,
                      test_per_class);
}

LongTailedDataset dataset_from_sets(LabeledSet train, LabeledSet test, int num_classes) {
  if (num_classes < 1) throw DomainError("need at least one class");
  LongTailedDataset ds;
  ds.class_counts.assign(num_classes, 0);
  for (int y : train.labels) {
    if (y < 0 || y >= num_classes) throw DomainError("label out of range");
    ++ds.class_counts[y];
  }
  for (long n : ds.class_counts) ds.splits.push_back(split_for_count(n));
  ds.train = std::move(train);
  ds.test = std::move(test);
  ds.validate();
  return ds;
}

Sampler::Sampler(SamplerKind kind, const LongTailedDataset& ds, std::uint64_t seed)
    : kind_(kind), ds_(&ds), rng_(seed) {
  if (ds.train.size() == 0) throw DomainError("cannot sample from an empty dataset");
  by_class_.resize(ds.num_classes());
  for (Index i = 0; i < ds.train.size(); ++i) by_class_[ds.train.labels[i]].push_back(i);
  for (int j = 0; j < ds.num_classes(); ++j) {
    if (!by_class_[j].empty()) nonempty_classes_.push_back(j);
  }
}

Index Sampler::draw() {
  if (kind_ == SamplerKind::InstanceBalanced) {
    std::uniform_int_distribution<Index> pick(0, ds_->train.size() - 1);
    return pick(rng_);
  }
  std::uniform_int_distribution<std::size_t> pick_class(0, nonempty_classes_.size() - 1);
  const auto& members = by_class_[nonempty_classes_[pick_class(rng_)]];
  std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
  return members[pick(rng_)];
}

Batch Sampler::next_batch(Index m) {
  if (m < 1) throw DomainError("batch size must be >= 1");
  Batch b;
  b.features.resize(m, ds_->dim());
  b.labels.resize(m);
  for (Index r = 0; r < m; ++r) {
    const Index i = draw();
    b.features.row(r) = ds_->train.features.row(i);
    b.labels[r] = ds_->train.labels[i];
  }
  return b;
}

void MixupConfig::validate() const {
  if (enabled && !(alpha > 0.0)) throw DomainError("mixup alpha must be positive");
  if (forced_lambda && (*forced_lambda < 0.0 || *forced_lambda > 1.0)) {
    throw DomainError("forced mixup lambda must lie in [0, 1]");
  }
}

double draw_mixup_lambda(const MixupConfig& cfg, Rng& rng) {
  if (!(cfg.alpha > 0.0)) throw DomainError("mixup alpha must be positive");
  if (cfg.forced_lambda) return *cfg.forced_lambda;
  std::gamma_distribution<double> gamma(cfg.alpha, 1.0);
  const double a = gamma(rng);
  const double b = gamma(rng);
  if (a + b == 0.0) return 0.5;
  return a / (a + b);
}

MixedBatch mixup_batch(const Matrix& x1, const Matrix& y1, const Matrix& x2, const Matrix& y2,
                       const MixupConfig& cfg, Rng& rng) {
  if (x1.rows() != x2.rows() || x1.cols() != x2.cols()) throw DimensionError("mixup: feature shapes differ");
  if (y1.rows() != y2.rows() || y1.cols() != y2.cols() || y1.rows() != x1.rows()) {
    throw DimensionError("mixup: label shapes differ");
  }
  const double lam = draw_mixup_lambda(cfg, rng);
  MixedBatch out;
  out.lambda = lam;
  out.features = lam * x1 + (1.0 - lam) * x2;
  out.targets = lam * y1 + (1.0 - lam) * y2;
  return out;
}

MixedBatch mixup_shuffled(const Matrix& x, const Matrix& y, const MixupConfig& cfg, Rng& rng) {
  std::vector<Index> perm(x.rows());
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix x2(x.rows(), x.cols());
  Matrix y2(y.rows(), y.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    x2.row(r) = x.row(perm[r]);
    y2.row(r) = y.row(perm[r]);
  }
  return mixup_batch(x, y, x2, y2, cfg, rng);
}

Matrix one_hot(const std::vector<int>& labels, int num_classes) {
  Matrix out = Matrix::Zero(static_cast<Index>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) throw DomainError("label out of range");
    out(static_cast<Index>(i), labels[i]) = 1.0;
  }
  return out;
}

}  // namespace mislas
