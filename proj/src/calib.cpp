#include "mislas/calib.hpp"

#include <algorithm>
#include <cmath>

namespace mislas {

PredictionLog PredictionLog::from_probabilities(Matrix probs, const std::vector<int>& labels) {
  if (static_cast<Index>(labels.size()) != probs.rows()) {
    throw DimensionError("prediction log: one label per probability row required");
  }
  PredictionLog log;
  log.num_classes = static_cast<int>(probs.cols());
  log.records.reserve(labels.size());
  for (Index i = 0; i < probs.rows(); ++i) {
    Index arg = 0;
    const double conf = probs.row(i).maxCoeff(&arg);
    log.records.push_back({conf, static_cast<int>(arg), labels[i]});
  }
  log.probabilities = std::move(probs);
  return log;
}

std::string to_string(Direction d) {
  switch (d) {
    case Direction::OverConfident: return "over-confident";
    case Direction::UnderConfident: return "under-confident";
    case Direction::Mixed: return "mixed";
  }
  return "?";
}

int confidence_bin(double confidence, int bins) {
  if (bins < 1) throw DomainError("bin count must be >= 1");
  if (!(confidence >= 0.0 && confidence <= 1.0)) throw DomainError("confidence must lie in [0, 1]");
  int b = static_cast<int>(std::ceil(confidence * bins)) - 1;
  b = std::clamp(b, 0, bins - 1);
  // Agree with the edges b / B as computed by division.
  while (b > 0 && confidence <= static_cast<double>(b) / bins) --b;
  while (b < bins - 1 && confidence > static_cast<double>(b + 1) / bins) ++b;
  return b;
}

std::vector<ReliabilityRow> reliability_bins(const PredictionLog& log, int bins) {
  if (bins < 1) throw DomainError("bin count must be >= 1");
  if (log.records.empty()) throw DomainError("cannot bin an empty prediction log");
  std::vector<double> conf_sum(bins, 0.0);
  std::vector<double> correct_sum(bins, 0.0);
  std::vector<long> count(bins, 0);
  for (const auto& r : log.records) {
    const int b = confidence_bin(r.confidence, bins);
    conf_sum[b] += r.confidence;
    correct_sum[b] += r.correct() ? 1.0 : 0.0;
    ++count[b];
  }
  std::vector<ReliabilityRow> rows(bins);
  for (int b = 0; b < bins; ++b) {
    rows[b].bin_lo = static_cast<double>(b) / bins;
    rows[b].bin_hi = static_cast<double>(b + 1) / bins;
    rows[b].count = count[b];
    if (count[b] > 0) {
      rows[b].accuracy = correct_sum[b] / static_cast<double>(count[b]);
      rows[b].confidence = conf_sum[b] / static_cast<double>(count[b]);
    }
  }
  return rows;
}

CalibrationReport ece(const PredictionLog& log, int bins) {
  CalibrationReport rep;
  rep.bins = bins;
  rep.rows = reliability_bins(log, bins);
  const double n = static_cast<double>(log.records.size());
  double total = 0.0;
  double signed_gap = 0.0;
  for (const auto& row : rep.rows) {
    if (row.count == 0) continue;
    const double w = static_cast<double>(row.count) / n;
    total += w * std::abs(row.accuracy - row.confidence);
    signed_gap += w * (row.confidence - row.accuracy);
  }
  rep.ece_percent = total * 100.0;
  rep.signed_gap = signed_gap;
  constexpr double tie = 1e-12;
  if (signed_gap > tie) {
    rep.direction = Direction::OverConfident;
  } else if (signed_gap < -tie) {
    rep.direction = Direction::UnderConfident;
  } else {
    rep.direction = Direction::Mixed;
  }
  return rep;
}

SplitAccuracy split_accuracy(const PredictionLog& log, const std::vector<Split>& splits) {
  if (log.records.empty()) throw DomainError("cannot score an empty prediction log");
  long hit[3] = {0, 0, 0};
  long tot[3] = {0, 0, 0};
  long all_hit = 0;
  for (const auto& r : log.records) {
    if (r.label < 0 || r.label >= static_cast<int>(splits.size())) {
      throw DomainError("label " + std::to_string(r.label) + " has no split tag");
    }
    const int s = static_cast<int>(splits[r.label]);
    ++tot[s];
    if (r.correct()) {
      ++hit[s];
      ++all_hit;
    }
  }
  auto pct = [&](int s) -> std::optional<double> {
    if (tot[s] == 0) return std::nullopt;
    return 100.0 * static_cast<double>(hit[s]) / static_cast<double>(tot[s]);
  };
  SplitAccuracy out;
  out.many = pct(0);
  out.medium = pct(1);
  out.few = pct(2);
  out.n_many = tot[0];
  out.n_medium = tot[1];
  out.n_few = tot[2];
  out.all = 100.0 * static_cast<double>(all_hit) / static_cast<double>(log.records.size());
  return out;
}

const DistributionSummary& ProbabilityDistribution::of(Split s) const {
  switch (s) {
    case Split::Many: return many;
    case Split::Medium: return medium;
    case Split::Few: return few;
  }
  return few;
}

namespace {

void summarize(DistributionSummary& d) {
  if (d.samples.empty()) return;
  const double n = static_cast<double>(d.samples.size());
  double total = 0.0;
  long above = 0;
  for (double v : d.samples) {
    total += v;
    if (v > 0.99) ++above;
  }
  d.mean = total / n;
  d.frac_above_099 = static_cast<double>(above) / n;
  std::vector<double> sorted = d.samples;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  d.median = sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
}

}  // namespace

ProbabilityDistribution probability_distribution(const PredictionLog& log, const std::vector<Split>& splits) {
  if (!log.has_probabilities()) throw ContractError("probability distribution needs full probability rows");
  ProbabilityDistribution out;
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    const int y = log.records[i].label;
    if (y < 0 || y >= static_cast<int>(splits.size())) throw DomainError("label has no split tag");
    const double p = log.probabilities(static_cast<Index>(i), y);
    switch (splits[y]) {
      case Split::Many: out.many.samples.push_back(p); break;
      case Split::Medium: out.medium.samples.push_back(p); break;
      case Split::Few: out.few.samples.push_back(p); break;
    }
  }
  summarize(out.many);
  summarize(out.medium);
  summarize(out.few);
  return out;
}

}  // namespace mislas
