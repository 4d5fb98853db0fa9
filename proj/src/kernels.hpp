#pragma once

// Internal numeric kernels shared by the forward primitives and the backward
// sweep. Not installed.

#include <vector>

#include "aevb/tape.hpp"
#include "aevb/tensor.hpp"

namespace aevb::kernels {

/// Row-major C = op(A) * op(B).
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a, bool transpose_b);
Tensor transpose2d(const Tensor& x);

/// Output shape of a broadcasting binary op; throws ShapeError naming `prim`.
Shape broadcast_shape(const char* prim, const Shape& a, const Shape& b);
/// Sums `g` down to `target` (inverse of leading-axis broadcasting).
Tensor reduce_to(const Tensor& g, const Shape& target);

double sigmoid(double x);
double softplus(double x);
double cb_log_normalizer(double lambda);
double cb_log_normalizer_grad(double lambda);

/// Gradients with respect to each input of `node`, given the output gradient.
std::vector<Tensor> backward(const Tape::Node& node, const Tensor& g);

}  // namespace aevb::kernels
