#include <doctest.h>

#include <cmath>
#include <random>

#include "mislas/calib.hpp"
#include "mislas/errors.hpp"
#include "mislas/losses.hpp"

using namespace mislas;

namespace {

PredictionLog make_log(std::initializer_list<std::pair<double, bool>> items) {
  PredictionLog log;
  log.num_classes = 2;
  for (auto [conf, ok] : items) log.records.push_back({conf, 0, ok ? 0 : 1});
  return log;
}

}  // namespace

TEST_CASE("hand-computed ECE") {
  const auto log = make_log({{0.9, true}, {0.9, false}, {0.6, true}, {0.6, true}});
  const CalibrationReport rep = ece(log, 15);
  CHECK(rep.ece_percent == doctest::Approx(40.0));
  CHECK(rep.rows.size() == 15);
  // +0.2 from the 0.9 bin cancels -0.2 from the 0.6 bin
  CHECK(rep.signed_gap == doctest::Approx(0.0));
  CHECK(rep.direction == Direction::Mixed);
}

TEST_CASE("bins are right-closed") {
  CHECK(confidence_bin(0.0, 15) == 0);
  CHECK(confidence_bin(1.0, 15) == 14);
  CHECK(confidence_bin(1.0 / 15, 15) == 0);
  CHECK(confidence_bin(2.0 / 15, 15) == 1);
  CHECK(confidence_bin(std::nextafter(2.0 / 15, 1.0), 15) == 2);
  CHECK(confidence_bin(0.5, 1) == 0);
  CHECK_THROWS_AS(confidence_bin(1.1, 15), DomainError);
  CHECK_THROWS_AS(confidence_bin(0.5, 0), DomainError);
}

TEST_CASE("perfect and over-confident logs") {
  CHECK(ece(make_log({{1.0, true}, {1.0, true}}), 10).ece_percent == 0.0);
  CHECK(ece(make_log({{1.0, true}, {1.0, true}}), 10).direction == Direction::Mixed);
  CHECK(ece(make_log({{0.6, true}, {0.6, true}}), 10).direction == Direction::UnderConfident);
  const auto over = ece(make_log({{0.95, false}, {0.95, true}}), 10);
  CHECK(over.direction == Direction::OverConfident);
  CHECK(over.ece_percent == doctest::Approx(45.0));
}

TEST_CASE("degenerate inputs") {
  PredictionLog empty;
  CHECK_THROWS_AS(ece(empty, 15), DomainError);
  CHECK_THROWS_AS(ece(make_log({{0.5, true}}), 0), DomainError);
}

TEST_CASE("split accuracies leave empty splits absent") {
  PredictionLog log;
  log.num_classes = 3;
  log.records = {{0.9, 0, 0}, {0.8, 1, 0}, {0.7, 1, 1}, {0.6, 0, 1}};
  const auto acc = split_accuracy(log, {Split::Many, Split::Medium, Split::Few});
  CHECK(*acc.many == doctest::Approx(50.0));
  CHECK(*acc.medium == doctest::Approx(50.0));
  CHECK_FALSE(acc.few.has_value());
  CHECK(acc.all == doctest::Approx(50.0));
}

TEST_CASE("probability distributions per split") {
  Matrix p(3, 2);
  p << 0.995, 0.005, 0.3, 0.7, 0.2, 0.8;
  const auto log = PredictionLog::from_probabilities(p, {0, 1, 0});
  CHECK(log.records[1].predicted == 1);
  CHECK(log.records[2].confidence == 0.8);
  const auto d = probability_distribution(log, {Split::Many, Split::Few});
  CHECK(d.many.samples == std::vector<double>{0.995, 0.2});
  CHECK(d.many.frac_above_099 == doctest::Approx(0.5));
  CHECK(d.few.mean == doctest::Approx(0.7));
  CHECK(d.of(Split::Medium).samples.empty());
  PredictionLog bare = log;
  bare.probabilities.resize(0, 0);
  CHECK_THROWS_AS(probability_distribution(bare, {Split::Many, Split::Few}), ContractError);
}

TEST_CASE("reliability rows partition (0, 1] and reproduce the ECE") {
  Rng rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PredictionLog log;
  log.num_classes = 3;
  for (int i = 0; i < 200; ++i) log.records.push_back({u(rng), static_cast<int>(rng() % 3), static_cast<int>(rng() % 3)});
  for (int bins : {1, 7, 15}) {
    const auto rows = reliability_bins(log, bins);
    REQUIRE(rows.size() == static_cast<std::size_t>(bins));
    CHECK(rows.front().bin_lo == 0.0);
    CHECK(rows.back().bin_hi == 1.0);
    long total = 0;
    double e = 0.0;
    for (std::size_t b = 0; b < rows.size(); ++b) {
      if (b > 0) CHECK(rows[b].bin_lo == rows[b - 1].bin_hi);
      total += rows[b].count;
      e += static_cast<double>(rows[b].count) / 200.0 * std::abs(rows[b].accuracy - rows[b].confidence);
    }
    CHECK(total == 200);
    CHECK(std::abs(e * 100.0 - ece(log, bins).ece_percent) < 1e-12);
  }
  const auto one = reliability_bins(log, 1);
  double conf = 0.0, acc = 0.0;
  for (const auto& r : log.records) {
    conf += r.confidence / 200.0;
    acc += r.correct() ? 1.0 / 200.0 : 0.0;
  }
  CHECK(one[0].confidence == doctest::Approx(conf));
  CHECK(one[0].accuracy == doctest::Approx(acc));
}

TEST_CASE("calibrated bins give zero ECE") {
  // Each occupied bin: mean confidence equals its accuracy.
  const auto log = make_log({{0.5, true}, {0.5, false}, {0.75, true}, {0.75, true}, {0.75, true}, {0.75, false}});
  CHECK(ece(log, 15).ece_percent == doctest::Approx(0.0));
  for (const auto& r : ece(log, 15).rows) CHECK(r.accuracy - r.confidence == doctest::Approx(0.0));
}

TEST_CASE("split accuracy examples") {
  PredictionLog all_right;
  all_right.num_classes = 3;
  for (int y = 0; y < 3; ++y) all_right.records.push_back({0.9, y, y});
  const auto a = split_accuracy(all_right, {Split::Many, Split::Medium, Split::Few});
  CHECK(*a.many == 100.0);
  CHECK(*a.medium == 100.0);
  CHECK(*a.few == 100.0);
  CHECK(a.all == 100.0);

  PredictionLog mixed;
  mixed.num_classes = 3;
  mixed.records = {{0.9, 0, 0}, {0.9, 0, 0}, {0.9, 0, 1}, {0.9, 2, 2}, {0.9, 0, 2}, {0.9, 0, 2}};
  const auto m = split_accuracy(mixed, {Split::Many, Split::Medium, Split::Few});
  const double weighted = (*m.many * m.n_many + *m.medium * m.n_medium + *m.few * m.n_few) /
                          static_cast<double>(m.n_many + m.n_medium + m.n_few);
  CHECK(m.all == doctest::Approx(weighted));
}

TEST_CASE("distribution examples") {
  const std::vector<int> labels{0, 1, 2, 3};
  const auto uniform = PredictionLog::from_probabilities(Matrix::Constant(4, 4, 0.25), labels);
  const auto d = probability_distribution(uniform, {Split::Many, Split::Many, Split::Few, Split::Few});
  for (double p : d.many.samples) CHECK(p == 0.25);
  const auto onehot = PredictionLog::from_probabilities(Matrix::Identity(4, 4), {0, 2, 2, 3});
  const auto e = probability_distribution(onehot, {Split::Many, Split::Medium, Split::Few, Split::Few});
  for (const auto* s : {&e.many, &e.medium, &e.few}) {
    for (double p : s->samples) CHECK((p == 0.0 || p == 1.0));
  }
}

TEST_CASE("smoothed optimum puts head mass near 1 - eps1 and tail near 1 - epsK") {
  const auto sched = SmoothingSchedule::make({RelatedFnKind::Concave}, 0.4, 0.1, {500, 200, 50, 5});
  Matrix probs(4, 4);
  for (int y = 0; y < 4; ++y) probs.row(y) = las_targets(sched, y);
  const auto log = PredictionLog::from_probabilities(probs, {0, 1, 2, 3});
  const auto d = probability_distribution(log, {Split::Many, Split::Many, Split::Medium, Split::Few});
  CHECK(d.many.samples[0] == doctest::Approx(0.6));
  CHECK(d.few.samples[0] == doctest::Approx(0.9));
}
