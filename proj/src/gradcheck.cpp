#include "aevb/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "aevb/errors.hpp"

namespace aevb {

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                  double h, bool scale_by_magnitude) {
  if (!(h > 0.0)) throw DomainError("finite_difference_gradient: step must be positive");
  Tensor grad(x.shape());
  auto g = grad.mutable_data();
  Tensor probe = x.detach();
  for (std::size_t j = 0; j < x.numel(); ++j) {
    const double x0 = x[j];
    const double step = scale_by_magnitude ? h * std::max(1.0, std::abs(x0)) : h;
    probe.mutable_data()[j] = x0 + step;
    const double up = f(probe);
    probe.mutable_data()[j] = x0 - step;
    const double down = f(probe);
    probe.mutable_data()[j] = x0;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw DomainError("finite_difference_gradient: non-finite evaluation at coordinate " +
                        std::to_string(j));
    g[j] = (up - down) / (2.0 * step);
  }
  return grad;
}

double max_relative_error(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel()) throw ShapeError("max_relative_error: size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double scale = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace aevb
