#pragma once

#include <vector>

#include "aevb/rng.hpp"
#include "aevb/tensor.hpp"

namespace aevb {

// Differentiable primitives. Binary elementwise ops accept equal shapes, a
// single-element operand, or an operand whose shape equals the trailing
// dimensions of the other (broadcast over the leading batch axis).

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);

/// Sum of all elements (rank-0 result).
Tensor sum(const Tensor& x);
/// Sum over one axis, which is removed from the shape.
Tensor sum(const Tensor& x, std::size_t axis);
/// Mean of all elements (rank-0 result).
Tensor mean(const Tensor& x);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Elements [begin, end) along `axis`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& x, Shape shape);
/// 2-D transpose.
Tensor transpose(const Tensor& x);

Tensor softplus(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
/// Along the last axis.
Tensor softmax(const Tensor& x);
Tensor log_softmax(const Tensor& x);
/// Reduces the last axis.
Tensor logsumexp(const Tensor& x);

/// Inverted dropout: zeroes entries with probability `rate` and scales the
/// survivors by 1/(1-rate). Masks are drawn row by row from `rng`.
Tensor dropout(const Tensor& x, double rate, BatchRng& rng);
Tensor dropout(const Tensor& x, double rate, SeededRng& rng);

/// Elementwise clamp; gradient passes only inside [lo, hi].
Tensor clamp(const Tensor& x, double lo, double hi);

/// log C(lambda) of the continuous Bernoulli, elementwise on (0, 1).
Tensor cb_log_normalizer(const Tensor& lambda);
/// Scalar evaluation of the same function.
double cb_log_normalizer(double lambda);

/// Solves W * U = B for W, where U is upper triangular (only the upper
/// triangle of `u` is read). `b` is [rows, n], `u` is [n, n].
Tensor solve_right_upper(const Tensor& b, const Tensor& u);

// Operator sugar.
inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& x) { return neg(x); }
inline Tensor operator+(const Tensor& a, double b) { return add(a, Tensor::scalar(b)); }
inline Tensor operator+(double a, const Tensor& b) { return add(Tensor::scalar(a), b); }
inline Tensor operator-(const Tensor& a, double b) { return sub(a, Tensor::scalar(b)); }
inline Tensor operator-(double a, const Tensor& b) { return sub(Tensor::scalar(a), b); }
inline Tensor operator*(const Tensor& a, double b) { return mul(a, Tensor::scalar(b)); }
inline Tensor operator*(double a, const Tensor& b) { return mul(Tensor::scalar(a), b); }
inline Tensor operator/(const Tensor& a, double b) { return div(a, Tensor::scalar(b)); }
inline Tensor square(const Tensor& x) { return mul(x, x); }

}  // namespace aevb
