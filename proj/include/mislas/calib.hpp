#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mislas/data.hpp"
#include "mislas/tensor.hpp"

namespace mislas {

struct Prediction {
  double confidence = 0.0;  // max softmax probability
  int predicted = 0;
  int label = 0;

  bool correct() const { return predicted == label; }
};

/// Per-sample predictions; optionally keeps the full probability rows.
struct PredictionLog {
  int num_classes = 0;
  std::vector<Prediction> records;
  Matrix probabilities;  // N x K when logged, else empty

  static PredictionLog from_probabilities(Matrix probs, const std::vector<int>& labels);
  std::size_t size() const { return records.size(); }
  bool has_probabilities() const { return probabilities.size() != 0; }
};

enum class Direction { OverConfident, UnderConfident, Mixed };
std::string to_string(Direction d);

struct ReliabilityRow {
  double bin_lo = 0.0;
  double bin_hi = 0.0;
  long count = 0;
  double accuracy = 0.0;
  double confidence = 0.0;
};

struct CalibrationReport {
  int bins = 0;
  std::vector<ReliabilityRow> rows;
  double ece_percent = 0.0;
  /// |S_b|-weighted mean of (conf - acc).
  double signed_gap = 0.0;
  Direction direction = Direction::Mixed;
};

/// Index of the bin ((b-1)/B, b/B] holding `confidence`; 0 lands in the first bin.
int confidence_bin(double confidence, int bins);

/// Equal-width binning of (0, 1] into `bins` half-open bins.
CalibrationReport ece(const PredictionLog& log, int bins = 15);
/// One row per bin, empty bins included.
std::vector<ReliabilityRow> reliability_bins(const PredictionLog& log, int bins = 15);

struct SplitAccuracy {
  std::optional<double> many;
  std::optional<double> medium;
  std::optional<double> few;
  double all = 0.0;
  long n_many = 0;
  long n_medium = 0;
  long n_few = 0;
};

/// Accuracies in percent; a split with no test samples is reported absent.
SplitAccuracy split_accuracy(const PredictionLog& log, const std::vector<Split>& splits);

struct DistributionSummary {
  std::vector<double> samples;  // true-class probabilities
  double mean = 0.0;
  double median = 0.0;
  double frac_above_099 = 0.0;
};

struct ProbabilityDistribution {
  DistributionSummary many;
  DistributionSummary medium;
  DistributionSummary few;

  const DistributionSummary& of(Split s) const;
};

/// Needs the full probability rows.
ProbabilityDistribution probability_distribution(const PredictionLog& log, const std::vector<Split>& splits);

}  // namespace mislas
