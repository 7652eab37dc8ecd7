#include "mislas/ops.hpp"

#include <cmath>
#include <sstream>

namespace mislas {

namespace {

std::string shape_str(const Tensor& t) {
  std::ostringstream os;
  os << '[' << t.rows() << 'x' << t.cols() << ']';
  return os.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

void require_row(const Tensor& a, const Tensor& row, const char* op) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError(std::string(op) + ": expected 1x" + std::to_string(a.cols()) + " row, got " +
                         shape_str(row));
  }
}

void require_nonempty(const Tensor& a, const char* op) {
  if (a.size() == 0) throw DimensionError(std::string(op) + ": empty input");
}

detail::Node& parent(detail::Node& n, std::size_t i) { return *n.parents[i]; }

void push(detail::Node& n, std::size_t i, const Matrix& g) {
  auto& p = parent(n, i);
  if (p.requires_grad) p.accumulate(g);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions disagree " + shape_str(a) + " * " + shape_str(b));
  }
  Matrix out = a.value() * b.value();
  return Tensor::from_op(std::move(out), "matmul", {a, b}, [](detail::Node& n) {
    const auto& av = parent(n, 0).value;
    const auto& bv = parent(n, 1).value;
    if (parent(n, 0).requires_grad) push(n, 0, n.grad * bv.transpose());
    if (parent(n, 1).requires_grad) push(n, 1, av.transpose() * n.grad);
  });
}

Tensor transpose(const Tensor& a) {
  Matrix out = a.value().transpose();
  return Tensor::from_op(std::move(out), "transpose", {a},
                         [](detail::Node& n) { push(n, 0, n.grad.transpose()); });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  return Tensor::from_op(a.value() + b.value(), "add", {a, b}, [](detail::Node& n) {
    push(n, 0, n.grad);
    push(n, 1, n.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  return Tensor::from_op(a.value() - b.value(), "sub", {a, b}, [](detail::Node& n) {
    push(n, 0, n.grad);
    if (parent(n, 1).requires_grad) push(n, 1, -n.grad);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Matrix out = a.value().cwiseProduct(b.value());
  return Tensor::from_op(std::move(out), "mul", {a, b}, [](detail::Node& n) {
    if (parent(n, 0).requires_grad) push(n, 0, n.grad.cwiseProduct(parent(n, 1).value));
    if (parent(n, 1).requires_grad) push(n, 1, n.grad.cwiseProduct(parent(n, 0).value));
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  require_row(a, row, "add_row");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return Tensor::from_op(std::move(out), "add_row", {a, row}, [](detail::Node& n) {
    push(n, 0, n.grad);
    if (parent(n, 1).requires_grad) push(n, 1, n.grad.colwise().sum());
  });
}

Tensor sub_row(const Tensor& a, const Tensor& row) {
  require_row(a, row, "sub_row");
  Matrix out = a.value().rowwise() - row.value().row(0);
  return Tensor::from_op(std::move(out), "sub_row", {a, row}, [](detail::Node& n) {
    push(n, 0, n.grad);
    if (parent(n, 1).requires_grad) push(n, 1, -n.grad.colwise().sum());
  });
}

Tensor mul_row(const Tensor& a, const Tensor& row) {
  require_row(a, row, "mul_row");
  Matrix out = a.value().array().rowwise() * row.value().row(0).array();
  return Tensor::from_op(std::move(out), "mul_row", {a, row}, [](detail::Node& n) {
    const auto& av = parent(n, 0).value;
    const auto& rv = parent(n, 1).value;
    if (parent(n, 0).requires_grad) {
      Matrix g = n.grad.array().rowwise() * rv.row(0).array();
      push(n, 0, g);
    }
    if (parent(n, 1).requires_grad) push(n, 1, n.grad.cwiseProduct(av).colwise().sum());
  });
}

Tensor scale(const Tensor& a, double c) {
  return Tensor::from_op(a.value() * c, "scale", {a}, [c](detail::Node& n) { push(n, 0, n.grad * c); });
}

Tensor add_scalar(const Tensor& a, double c) {
  Matrix out = a.value().array() + c;
  return Tensor::from_op(std::move(out), "add_scalar", {a}, [](detail::Node& n) { push(n, 0, n.grad); });
}

Tensor square(const Tensor& a) {
  Matrix out = a.value().array().square();
  return Tensor::from_op(std::move(out), "square", {a}, [](detail::Node& n) {
    push(n, 0, 2.0 * n.grad.cwiseProduct(parent(n, 0).value));
  });
}

Tensor rsqrt(const Tensor& a) {
  if ((a.value().array() <= 0.0).any()) throw DomainError("rsqrt: non-positive input");
  Matrix out = a.value().array().rsqrt();
  return Tensor::from_op(out, "rsqrt", {a}, [out](detail::Node& n) {
    // d/da a^{-1/2} = -1/2 a^{-3/2}
    Matrix g = n.grad.array() * (-0.5 * out.array().cube());
    push(n, 0, g);
  });
}

Tensor relu(const Tensor& a) {
  Matrix out = a.value().cwiseMax(0.0);
  return Tensor::from_op(std::move(out), "relu", {a}, [](detail::Node& n) {
    Matrix g = (parent(n, 0).value.array() > 0.0).select(n.grad, 0.0);
    push(n, 0, g);
  });
}

Tensor tanh(const Tensor& a) {
  Matrix out = a.value().array().tanh();
  return Tensor::from_op(out, "tanh", {a}, [out](detail::Node& n) {
    Matrix g = n.grad.array() * (1.0 - out.array().square());
    push(n, 0, g);
  });
}

Tensor sum(const Tensor& a) {
  return Tensor::from_op(Matrix::Constant(1, 1, a.value().sum()), "sum", {a}, [](detail::Node& n) {
    const auto& av = parent(n, 0).value;
    push(n, 0, Matrix::Constant(av.rows(), av.cols(), n.grad(0, 0)));
  });
}

Tensor mean(const Tensor& a) {
  require_nonempty(a, "mean");
  const double inv = 1.0 / static_cast<double>(a.size());
  return Tensor::from_op(Matrix::Constant(1, 1, a.value().mean()), "mean", {a}, [inv](detail::Node& n) {
    const auto& av = parent(n, 0).value;
    push(n, 0, Matrix::Constant(av.rows(), av.cols(), n.grad(0, 0) * inv));
  });
}

Tensor col_mean(const Tensor& a) {
  require_nonempty(a, "col_mean");
  Matrix out = a.value().colwise().mean();
  const double inv = 1.0 / static_cast<double>(a.rows());
  return Tensor::from_op(std::move(out), "col_mean", {a}, [inv](detail::Node& n) {
    const auto rows = parent(n, 0).value.rows();
    Matrix g = (n.grad * inv).replicate(rows, 1);
    push(n, 0, g);
  });
}

Matrix softmax_rows(const Matrix& z) {
  Matrix out = z.colwise() - z.rowwise().maxCoeff();
  out = out.array().exp();
  out.array().colwise() /= out.rowwise().sum().array();
  return out;
}

Tensor softmax(const Tensor& z) {
  require_nonempty(z, "softmax");
  Matrix p = softmax_rows(z.value());
  return Tensor::from_op(p, "softmax", {z}, [p](detail::Node& n) {
    // dz = p * (g - <g, p>) row-wise
    Vector dot = n.grad.cwiseProduct(p).rowwise().sum();
    Matrix g = p.array() * (n.grad.colwise() - dot).array();
    push(n, 0, g);
  });
}

Tensor log_softmax(const Tensor& z) {
  require_nonempty(z, "log_softmax");
  const Matrix& zv = z.value();
  Vector zmax = zv.rowwise().maxCoeff();
  Matrix shifted = zv.colwise() - zmax;
  Vector lse = shifted.array().exp().rowwise().sum().log();
  Matrix out = shifted.colwise() - lse;
  Matrix p = out.array().exp();
  return Tensor::from_op(std::move(out), "log_softmax", {z}, [p](detail::Node& n) {
    // dz = g - p * sum(g) row-wise
    Vector gsum = n.grad.rowwise().sum();
    Matrix g = n.grad - (p.array().colwise() * gsum.array()).matrix();
    push(n, 0, g);
  });
}

}  // namespace mislas
