// Randomized gradient cases covering every differentiable op, layer, loss
// and the generalized head. Each case draws fresh shapes and values and
// returns the worst relative error of one trial.
#pragma once

#include <utility>

#include "gradcheck.hpp"
#include "mislas/classifier.hpp"
#include "mislas/losses.hpp"
#include "mislas/net.hpp"

namespace gradcheck {

struct Case {
  std::string name;
  std::function<double(Rng&)> trial;
};

namespace detail {

using namespace mislas;

inline Case unary(std::string name, std::function<Tensor(const Tensor&)> op, bool positive = false,
                  bool kink = false) {
  return {std::move(name), [op, positive, kink](Rng& rng) {
            const Index r = dim_between(rng, 1, 5), c = dim_between(rng, 1, 5);
            Matrix x = positive ? random_matrix(r, c, rng, 0.2, 2.0)
                                : (kink ? away_from_zero(r, c, rng) : random_matrix(r, c, rng, -2.0, 2.0));
            Tensor a = Tensor::parameter(x);
            Tensor out = op(a);
            const Matrix w = random_matrix(out.rows(), out.cols(), rng);
            return max_relative_error([&](const std::vector<Tensor>& in) { return project(op(in[0]), w); }, {a});
          }};
}

inline Case binary(std::string name, std::function<Tensor(const Tensor&, const Tensor&)> op, bool row_operand) {
  return {std::move(name), [op, row_operand](Rng& rng) {
            const Index r = dim_between(rng, 1, 5), c = dim_between(rng, 1, 5);
            Tensor a = Tensor::parameter(random_matrix(r, c, rng));
            Tensor b = Tensor::parameter(random_matrix(row_operand ? 1 : r, c, rng));
            const Matrix w = random_matrix(r, c, rng);
            return max_relative_error([&](const std::vector<Tensor>& in) { return project(op(in[0], in[1]), w); },
                                      {a, b});
          }};
}

inline std::vector<int> random_labels(Index m, int k, Rng& rng) {
  std::uniform_int_distribution<int> u(0, k - 1);
  std::vector<int> y(m);
  for (auto& v : y) v = u(rng);
  return y;
}

// False when a BN channel has near-zero batch variance or a ReLU input sits
// near its kink; central differences are unreliable at such points.
inline bool well_conditioned(const Backbone& net, const Tensor& x) {
  Matrix h = x.value();
  for (std::size_t i = 0; i < net.linears().size(); ++i) {
    const Matrix lin = net.linears()[i].forward(Tensor::constant(h)).value();
    const RowVector mu = lin.colwise().mean();
    const RowVector var = (lin.rowwise() - mu).array().square().colwise().mean();
    if (var.minCoeff() < 1e-2) return false;
    BatchNormState bn = net.norms()[i];
    bn.mode = BnMode::Train;
    const Matrix pre = bn_forward(bn, Tensor::constant(lin)).value();
    if (net.config().activation == Activation::Relu && pre.cwiseAbs().minCoeff() < 1e-3) return false;
    h = net.config().activation == Activation::Relu ? Matrix(pre.cwiseMax(0.0)) : Matrix(pre.array().tanh().matrix());
  }
  return true;
}

}  // namespace detail

inline std::vector<Case> standard_cases() {
  using namespace mislas;
  using detail::binary;
  using detail::well_conditioned;
  using detail::unary;
  std::vector<Case> cases;

  cases.push_back({"matmul", [](Rng& rng) {
                     const Index m = dim_between(rng, 1, 5), k = dim_between(rng, 1, 5), n = dim_between(rng, 1, 5);
                     Tensor a = Tensor::parameter(random_matrix(m, k, rng));
                     Tensor b = Tensor::parameter(random_matrix(k, n, rng));
                     const Matrix w = random_matrix(m, n, rng);
                     return max_relative_error(
                         [&](const std::vector<Tensor>& in) { return project(matmul(in[0], in[1]), w); }, {a, b});
                   }});
  cases.push_back(unary("transpose", [](const Tensor& a) { return transpose(a); }));
  cases.push_back(binary("add", [](const Tensor& a, const Tensor& b) { return add(a, b); }, false));
  cases.push_back(binary("sub", [](const Tensor& a, const Tensor& b) { return sub(a, b); }, false));
  cases.push_back(binary("mul", [](const Tensor& a, const Tensor& b) { return mul(a, b); }, false));
  cases.push_back(binary("add_row", [](const Tensor& a, const Tensor& b) { return add_row(a, b); }, true));
  cases.push_back(binary("sub_row", [](const Tensor& a, const Tensor& b) { return sub_row(a, b); }, true));
  cases.push_back(binary("mul_row", [](const Tensor& a, const Tensor& b) { return mul_row(a, b); }, true));
  cases.push_back(unary("scale", [](const Tensor& a) { return scale(a, -1.7); }));
  cases.push_back(unary("add_scalar", [](const Tensor& a) { return add_scalar(a, 0.3); }));
  cases.push_back(unary("square", [](const Tensor& a) { return square(a); }));
  cases.push_back(unary("rsqrt", [](const Tensor& a) { return rsqrt(a); }, true));
  cases.push_back(unary("relu", [](const Tensor& a) { return relu(a); }, false, true));
  cases.push_back(unary("tanh", [](const Tensor& a) { return tanh(a); }));
  cases.push_back(unary("sum", [](const Tensor& a) { return sum(a); }));
  cases.push_back(unary("mean", [](const Tensor& a) { return mean(a); }));
  cases.push_back(unary("col_mean", [](const Tensor& a) { return col_mean(a); }));
  cases.push_back(unary("softmax", [](const Tensor& a) { return softmax(a); }));
  cases.push_back(unary("log_softmax", [](const Tensor& a) { return log_softmax(a); }));

  cases.push_back({"linear", [](Rng& rng) {
                     const Index m = dim_between(rng, 1, 5), in = dim_between(rng, 1, 5), out = dim_between(rng, 1, 5);
                     Linear l = Linear::init(in, out, rng);
                     Tensor x = Tensor::parameter(random_matrix(m, in, rng));
                     const Matrix w = random_matrix(m, out, rng);
                     return max_relative_error(
                         [&](const std::vector<Tensor>& p) { return project(Linear{p[1], p[2]}.forward(p[0]), w); },
                         {x, l.weight, l.bias});
                   }});

  auto bn_case = [](std::string name, BnMode mode) {
    return Case{std::move(name), [mode](Rng& rng) {
                  const Index m = dim_between(rng, 2, 6), c = dim_between(rng, 1, 4);
                  BatchNormState st = BatchNormState::init(c);
                  st.scale.mutable_value() = random_matrix(1, c, rng, 0.5, 1.5);
                  st.shift.mutable_value() = random_matrix(1, c, rng);
                  st.running_mean = random_matrix(1, c, rng);
                  st.running_var = random_matrix(1, c, rng, 0.5, 1.5);
                  st.mode = mode;
                  Tensor h = Tensor::parameter(random_matrix(m, c, rng, -2.0, 2.0));
                  const Matrix w = random_matrix(m, c, rng);
                  return max_relative_error(
                      [&](const std::vector<Tensor>&) {
                        BatchNormState copy = st;  // running statistics must not drift between probes
                        return project(bn_forward(copy, h), w);
                      },
                      // ShiftLearn uses the affine parameters as constants.
                      mode == BnMode::ShiftLearn ? std::vector<Tensor>{h} : std::vector<Tensor>{h, st.scale, st.shift});
                }};
  };
  cases.push_back(bn_case("batchnorm_train", BnMode::Train));
  cases.push_back(bn_case("batchnorm_eval", BnMode::Eval));
  cases.push_back(bn_case("batchnorm_shift", BnMode::ShiftLearn));

  auto backbone_case = [](std::string name, Activation act) {
    return Case{std::move(name), [act](Rng& rng) {
                  BackboneConfig cfg;
                  cfg.input_dim = dim_between(rng, 1, 4);
                  cfg.hidden = {dim_between(rng, 2, 5), dim_between(rng, 2, 5)};
                  cfg.activation = act;
                  const Index m = dim_between(rng, 2, 5);
                  Backbone net;
                  Tensor x;
                  // Redraw ill-conditioned draws.
                  for (bool clear = false; !clear;) {
                    cfg.seed = rng();
                    net = Backbone(cfg);
                    x = Tensor::parameter(random_matrix(m, cfg.input_dim, rng, -2.0, 2.0));
                    clear = well_conditioned(net, x);
                  }
                  const Matrix w = random_matrix(m, cfg.hidden.back(), rng);
                  std::vector<Tensor> inputs{x};
                  for (const auto& p : net.parameters()) inputs.push_back(p);
                  const Backbone base = net;
                  return max_relative_error(
                      [&](const std::vector<Tensor>& in) {
                        Backbone probe = base;  // shares parameters, fresh running statistics
                        return project(probe.forward(in[0], BnMode::Train), w);
                      },
                      inputs);
                }};
  };
  cases.push_back(backbone_case("backbone_relu", Activation::Relu));
  cases.push_back(backbone_case("backbone_tanh", Activation::Tanh));

  cases.push_back({"soft_ce_loss", [](Rng& rng) {
                     const Index m = dim_between(rng, 1, 5);
                     const int k = static_cast<int>(dim_between(rng, 2, 6));
                     const double eps = std::uniform_real_distribution<double>(0.0, 0.5)(rng);
                     Matrix q(m, k);
                     const auto y = detail::random_labels(m, k, rng);
                     for (Index i = 0; i < m; ++i) q.row(i) = las_targets(eps, y[i], k);
                     Tensor z = Tensor::parameter(random_matrix(m, k, rng, -3.0, 3.0));
                     return max_relative_error([&](const std::vector<Tensor>& in) { return soft_ce_loss(q, in[0]); },
                                               {z});
                   }});
  cases.push_back({"ce_loss", [](Rng& rng) {
                     const Index m = dim_between(rng, 1, 5);
                     const int k = static_cast<int>(dim_between(rng, 2, 6));
                     const auto y = detail::random_labels(m, k, rng);
                     Tensor z = Tensor::parameter(random_matrix(m, k, rng, -3.0, 3.0));
                     return max_relative_error([&](const std::vector<Tensor>& in) { return ce_loss(y, in[0]); }, {z});
                   }});
  cases.push_back({"weighted_ce_loss", [](Rng& rng) {
                     const Index m = dim_between(rng, 1, 5);
                     const int k = static_cast<int>(dim_between(rng, 2, 6));
                     const auto y = detail::random_labels(m, k, rng);
                     std::vector<double> wv(k);
                     for (auto& v : wv) v = std::uniform_real_distribution<double>(0.1, 3.0)(rng);
                     const ClassWeights weights(wv);
                     Tensor z = Tensor::parameter(random_matrix(m, k, rng, -3.0, 3.0));
                     return max_relative_error(
                         [&](const std::vector<Tensor>& in) { return weighted_ce_loss(weights, y, in[0]); }, {z});
                   }});

  cases.push_back({"generalized_head", [](Rng& rng) {
                     const Index m = dim_between(rng, 1, 5), feat = dim_between(rng, 1, 5);
                     const int k = static_cast<int>(dim_between(rng, 2, 5));
                     GeneralizedHead head =
                         GeneralizedHead::from_weight(random_matrix(feat, k, rng), HeadMode::Generalized, 0.7, 0.2);
                     head.delta_weight.mutable_value() = random_matrix(feat, k, rng, -0.5, 0.5);
                     head.scale.mutable_value() = random_matrix(1, k, rng, 0.5, 1.5);
                     Tensor x = Tensor::parameter(random_matrix(m, feat, rng));
                     const auto y = detail::random_labels(m, k, rng);
                     return max_relative_error(
                         [&](const std::vector<Tensor>& in) { return ce_loss(y, head_forward(head, in[0])); },
                         {x, head.delta_weight, head.scale});
                   }});
  return cases;
}

}  // namespace gradcheck
