#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "mislas/classifier.hpp"
#include "mislas/data.hpp"
#include "mislas/losses.hpp"
#include "mislas/ops.hpp"
#include "mislas/optim.hpp"

using namespace mislas;

namespace {

Matrix sample_weight() {
  Matrix w(3, 2);
  w << 1, 0, 2, 1, 0, -1;
  return w;
}

}  // namespace

TEST_CASE("modes fix what is learnable") {
  const auto crt = GeneralizedHead::from_weight(sample_weight(), HeadMode::CRT, 1.0);
  CHECK(crt.retention == 0.0);
  CHECK(crt.delta_weight.requires_grad());
  CHECK_FALSE(crt.scale.requires_grad());
  const auto lws = GeneralizedHead::from_weight(sample_weight(), HeadMode::LWS, 0.3);
  CHECK(lws.retention == 1.0);
  CHECK_FALSE(lws.delta_weight.requires_grad());
  CHECK(lws.scale.requires_grad());
  const auto gen = GeneralizedHead::from_weight(sample_weight(), HeadMode::Generalized, 0.5);
  CHECK(gen.delta_weight.requires_grad());
  CHECK(gen.scale.requires_grad());
  CHECK_FALSE(gen.weight.requires_grad());
  CHECK(head_mode_from_string("lws") == HeadMode::LWS);
}

TEST_CASE("forward is diag(s)(rW + dW)^T x") {
  auto head = GeneralizedHead::from_weight(sample_weight(), HeadMode::Generalized, 0.5);
  head.delta_weight.mutable_value().setConstant(0.1);
  head.scale.mutable_value() << 2.0, -1.0;
  Matrix x(1, 3);
  x << 1, 1, 1;
  const Matrix z = head_forward(head, Tensor::constant(x)).value();
  // column sums of 0.5 W + 0.1: (1.5 + 0.3, 0 + 0.3)
  CHECK(z(0, 0) == doctest::Approx(2.0 * 1.8));
  CHECK(z(0, 1) == doctest::Approx(-1.0 * 0.3));
}

TEST_CASE("parameter groups carry the dW learning-rate ratio") {
  const auto gen = GeneralizedHead::from_weight(sample_weight(), HeadMode::Generalized, 1.0, 0.2);
  const auto groups = head_param_groups(gen, 5e-4);
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].lr_multiplier == 1.0);
  CHECK(groups[0].weight_decay == 0.0);
  CHECK(groups[1].lr_multiplier == 0.2);
  CHECK(groups[1].weight_decay == 5e-4);

  // One plain step: the dW update is 0.2 x the s-rate update of the same gradient.
  auto head = GeneralizedHead::from_weight(sample_weight(), HeadMode::Generalized, 1.0, 0.2);
  Sgd opt(head_param_groups(head), 0.9);
  Matrix x(2, 3);
  x << 1, 0, 1, 0, 1, 1;
  backward(ce_loss({0, 1}, head_forward(head, Tensor::constant(x))));
  const Matrix g = head.delta_weight.grad();
  opt.step(0.1);
  CHECK(head.delta_weight.value().isApprox(-0.1 * 0.2 * g));

  const auto crt = GeneralizedHead::from_weight(sample_weight(), HeadMode::CRT, 1.0, 0.2);
  const auto crt_groups = head_param_groups(crt);
  REQUIRE(crt_groups.size() == 1);
  CHECK(crt_groups[0].lr_multiplier == 1.0);
  const auto lws = GeneralizedHead::from_weight(sample_weight(), HeadMode::LWS);
  REQUIRE(head_param_groups(lws).size() == 1);
}

TEST_CASE("cRT steps match a plain linear classifier bit for bit") {
  Rng rng(3);
  std::normal_distribution<double> n;
  auto head = GeneralizedHead::from_weight(Matrix::Random(4, 3), HeadMode::CRT);
  Sgd a(head_param_groups(head, 1e-3), 0.9);
  Tensor w = Tensor::parameter(Matrix::Zero(4, 3));
  Sgd b({ParamGroup{{w}, 1.0, 1e-3}}, 0.9);
  for (int step = 0; step < 100; ++step) {
    Matrix x(8, 4);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
    std::vector<int> y(8);
    for (auto& v : y) v = static_cast<int>(rng() % 3);
    a.zero_grad();
    backward(ce_loss(y, head_forward(head, Tensor::constant(x))));
    a.step(0.1);
    b.zero_grad();
    backward(ce_loss(y, matmul(Tensor::constant(x), w)));
    b.step(0.1);
    const Matrix got = head.combined_weight();
    REQUIRE(std::memcmp(got.data(), w.value().data(), sizeof(double) * got.size()) == 0);
  }
}

TEST_CASE("weight norms") {
  auto head = GeneralizedHead::from_weight(sample_weight(), HeadMode::LWS);
  head.scale.mutable_value() << 2.0, 0.5;
  const WeightNorms n = weight_norms(head);
  CHECK(n.raw[0] == doctest::Approx(std::sqrt(5.0)));
  CHECK(n.effective[0] == doctest::Approx(2.0 * std::sqrt(5.0)));
  CHECK(n.effective[1] == doctest::Approx(0.5 * std::sqrt(2.0)));
  CHECK(column_norms(sample_weight())[1] == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("degeneration identities of the forward pass") {
  const Matrix w = sample_weight();
  const Matrix x = Matrix::Random(4, 3);
  const Tensor xt = Tensor::constant(x);
  auto gen = GeneralizedHead::from_weight(w, HeadMode::Generalized);
  CHECK(head_forward(gen, xt).value() == x * w);

  auto crt = GeneralizedHead::from_weight(w, HeadMode::CRT);
  crt.delta_weight.mutable_value() = Matrix::Random(3, 2);
  CHECK(head_forward(crt, xt).value().isApprox(x * crt.delta_weight.value(), 1e-15));

  auto lws = GeneralizedHead::from_weight(w, HeadMode::LWS);
  lws.scale.mutable_value() << 0.5, 3.0;
  CHECK(head_forward(lws, xt).value().isApprox(x * w * lws.scale.value().asDiagonal(), 1e-15));
}

TEST_CASE("dW frozen by a zero ratio and W outside every group") {
  auto head = GeneralizedHead::from_weight(sample_weight(), HeadMode::Generalized, 1.0, 0.0);
  for (const auto& g : head_param_groups(head)) {
    for (const auto& p : g.params) CHECK(p.handle() != head.weight.handle());
  }
  Sgd opt(head_param_groups(head), 0.9);
  Matrix x(3, 3);
  x << 1, 0, 1, 0, 1, 1, 1, 1, 0;
  for (int step = 0; step < 10; ++step) {
    opt.zero_grad();
    backward(ce_loss({0, 1, 1}, head_forward(head, Tensor::constant(x))));
    opt.step(0.1);
  }
  CHECK(head.delta_weight.value().isZero(0.0));
  CHECK(head.scale.value() != RowVector::Ones(2));
  CHECK(head.weight.value() == sample_weight());
}

TEST_CASE("norm examples") {
  Matrix q = Matrix::Identity(3, 3).leftCols(2);
  auto head = GeneralizedHead::from_weight(q, HeadMode::Generalized);
  for (double n : weight_norms(head).effective) CHECK(n == doctest::Approx(1.0));
  head.scale.mutable_value()(0, 1) = 2.0;
  CHECK(weight_norms(head).effective[1] == doctest::Approx(2.0));
}
