#pragma once

#include <functional>

#include "aevb/tensor.hpp"

namespace aevb {

/// Central-difference gradient of a scalar function. With
/// `scale_by_magnitude` the step for coordinate j is h * max(1, |x_j|).
/// Throws DomainError when an evaluation is not finite.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                  double h, bool scale_by_magnitude = false);

/// max_j |a_j - b_j| / max(1, |a_j|, |b_j|).
double max_relative_error(const Tensor& a, const Tensor& b);

}  // namespace aevb
