#pragma once

#include "mislas/tensor.hpp"

namespace mislas {

// Differentiable operations. Row-wise ops treat each row as one sample; a
// "row" operand is a 1 x n tensor broadcast over the rows of an m x n one.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor sub_row(const Tensor& a, const Tensor& row);
Tensor mul_row(const Tensor& a, const Tensor& row);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);

Tensor square(const Tensor& a);
/// Elementwise 1/sqrt(a); requires a > 0.
Tensor rsqrt(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Column means: m x n -> 1 x n.
Tensor col_mean(const Tensor& a);

/// Row-wise softmax with max subtraction.
Tensor softmax(const Tensor& z);
/// Row-wise log-softmax, z - logsumexp(z).
Tensor log_softmax(const Tensor& z);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, double c) { return scale(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return scale(a, c); }

/// Plain (non-recorded) row-wise softmax of a dense matrix.
Matrix softmax_rows(const Matrix& z);

}  // namespace mislas
