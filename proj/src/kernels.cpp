#include "kernels.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "aevb/errors.hpp"

namespace aevb::kernels {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.dim(0)),
                  static_cast<Eigen::Index>(t.dim(1)));
}

// [outer, last] view of a tensor for last-axis row operations.
std::pair<std::size_t, std::size_t> rows_last(const Tensor& t) {
  const std::size_t last = t.rank() == 0 ? 1 : t.shape().back();
  return {t.numel() / last, last};
}

Tensor map_binary(const Tensor& g, const Tensor& a, const Tensor& b,
                  double (*fn)(double, double, double)) {
  Tensor out(g.shape());
  auto o = out.mutable_data();
  auto gd = g.data();
  auto ad = a.data();
  auto bd = b.data();
  const std::size_t na = ad.size(), nb = bd.size();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = fn(gd[i], ad[i % na], bd[i % nb]);
  return out;
}

Tensor map_unary(const Tensor& g, const Tensor& x, double (*fn)(double, double)) {
  Tensor out(g.shape());
  auto o = out.mutable_data();
  auto gd = g.data();
  auto xd = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = fn(gd[i], xd[i]);
  return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a, bool transpose_b) {
  const auto am = as_matrix(a);
  const auto bm = as_matrix(b);
  const Eigen::Index rows = transpose_a ? am.cols() : am.rows();
  const Eigen::Index cols = transpose_b ? bm.rows() : bm.cols();
  Tensor out(Shape{static_cast<std::size_t>(rows), static_cast<std::size_t>(cols)});
  MutMap om(out.mutable_data().data(), rows, cols);
  if (!transpose_a && !transpose_b) om.noalias() = am * bm;
  else if (transpose_a && !transpose_b) om.noalias() = am.transpose() * bm;
  else if (!transpose_a && transpose_b) om.noalias() = am * bm.transpose();
  else om.noalias() = am.transpose() * bm.transpose();
  return out;
}

Tensor transpose2d(const Tensor& x) {
  const std::size_t r = x.dim(0), c = x.dim(1);
  Tensor out(Shape{c, r});
  auto o = out.mutable_data();
  auto xd = x.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) o[j * r + i] = xd[i * c + j];
  return out;
}

Shape broadcast_shape(const char* prim, const Shape& a, const Shape& b) {
  if (a == b) return a;
  const std::size_t na = shape_numel(a), nb = shape_numel(b);
  // Equal sizes: the higher rank wins, so [3] with [1,3] gives [1,3].
  const bool a_big = na != nb ? na > nb : a.size() >= b.size();
  if (na == 1 && nb == 1) return a_big ? a : b;
  if (na == 1) return b;
  if (nb == 1) return a;
  const Shape& big = a_big ? a : b;
  const Shape& small = a_big ? b : a;
  std::size_t lead = 0;
  while (lead < small.size() && small[lead] == 1) ++lead;
  const std::size_t tail = small.size() - lead;
  bool ok = tail <= big.size();
  for (std::size_t k = 0; ok && k < tail; ++k)
    ok = small[lead + k] == big[big.size() - tail + k];
  if (!ok)
    throw ShapeError(std::string(prim) + ": cannot broadcast " + shape_str(a) + " with " +
                     shape_str(b));
  return big;
}

Tensor reduce_to(const Tensor& g, const Shape& target) {
  if (g.shape() == target) return g;
  Tensor out(target);
  auto o = out.mutable_data();
  auto gd = g.data();
  const std::size_t n = o.size();
  for (std::size_t i = 0; i < gd.size(); ++i) o[i % n] += gd[i];
  return out;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

namespace {
// |lambda - 1/2| below this uses the Taylor branch.
constexpr double kCbTaylorRadius = 1e-2;
}

double cb_log_normalizer(double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0))
    throw DomainError("cb_log_normalizer: lambda=" + std::to_string(lambda) + " outside (0,1)");
  const double u = 1.0 - 2.0 * lambda;
  if (std::abs(lambda - 0.5) < kCbTaylorRadius) {
    const double u2 = u * u;
    // log(atanh(u)/u) = u^2/3 + 13 u^4/90 + O(u^6)
    return std::log(2.0) + u2 / 3.0 + 13.0 * u2 * u2 / 90.0;
  }
  return std::log(2.0 * std::atanh(u) / u);
}

double cb_log_normalizer_grad(double lambda) {
  const double u = 1.0 - 2.0 * lambda;
  double d_du;
  if (std::abs(lambda - 0.5) < kCbTaylorRadius) {
    d_du = 2.0 * u / 3.0 + 52.0 * u * u * u / 90.0;
  } else {
    d_du = 1.0 / ((1.0 - u * u) * std::atanh(u)) - 1.0 / u;
  }
  return -2.0 * d_du;
}

std::vector<Tensor> backward(const Tape::Node& n, const Tensor& g) {
  const auto& s = n.saved;
  switch (n.kind) {
    case Prim::Leaf:
      return {};
    case Prim::MatMul:
      return {matmul(g, s[1], false, true), matmul(s[0], g, true, false)};
    case Prim::Add:
      return {reduce_to(g, s[0].shape()), reduce_to(g, s[1].shape())};
    case Prim::Sub: {
      Tensor gb = map_unary(g, g, [](double gi, double) { return -gi; });
      return {reduce_to(g, s[0].shape()), reduce_to(gb, s[1].shape())};
    }
    case Prim::Mul: {
      Tensor ga = map_binary(g, s[0], s[1], [](double gi, double, double b) { return gi * b; });
      Tensor gb = map_binary(g, s[0], s[1], [](double gi, double a, double) { return gi * a; });
      return {reduce_to(ga, s[0].shape()), reduce_to(gb, s[1].shape())};
    }
    case Prim::Div: {
      Tensor ga = map_binary(g, s[0], s[1], [](double gi, double, double b) { return gi / b; });
      Tensor gb = map_binary(g, s[0], s[1],
                             [](double gi, double a, double b) { return -gi * a / (b * b); });
      return {reduce_to(ga, s[0].shape()), reduce_to(gb, s[1].shape())};
    }
    case Prim::Neg:
      return {map_unary(g, g, [](double gi, double) { return -gi; })};
    case Prim::Exp:
      return {map_unary(g, n.value, [](double gi, double y) { return gi * y; })};
    case Prim::Log:
      return {map_unary(g, s[0], [](double gi, double x) { return gi / x; })};
    case Prim::Sum:
      return {Tensor(s[0].shape(), g.item())};
    case Prim::Mean:
      return {Tensor(s[0].shape(), g.item() / static_cast<double>(s[0].numel()))};
    case Prim::SumAxis: {
      const Shape& in = s[0].shape();
      std::size_t outer = 1, inner = 1;
      for (std::size_t k = 0; k < n.axis; ++k) outer *= in[k];
      for (std::size_t k = n.axis + 1; k < in.size(); ++k) inner *= in[k];
      const std::size_t extent = in[n.axis];
      Tensor out(in);
      auto o = out.mutable_data();
      auto gd = g.data();
      for (std::size_t a = 0; a < outer; ++a)
        for (std::size_t e = 0; e < extent; ++e)
          for (std::size_t b = 0; b < inner; ++b)
            o[(a * extent + e) * inner + b] = gd[a * inner + b];
      return {out};
    }
    case Prim::Concat: {
      std::vector<Tensor> parts;
      const Shape& out_shape = g.shape();
      std::size_t outer = 1, inner = 1;
      for (std::size_t k = 0; k < n.axis; ++k) outer *= out_shape[k];
      for (std::size_t k = n.axis + 1; k < out_shape.size(); ++k) inner *= out_shape[k];
      const std::size_t total = out_shape[n.axis];
      std::size_t offset = 0;
      auto gd = g.data();
      for (const auto& part : s) {
        const std::size_t extent = part.shape()[n.axis];
        Tensor pg(part.shape());
        auto p = pg.mutable_data();
        for (std::size_t a = 0; a < outer; ++a)
          for (std::size_t e = 0; e < extent; ++e)
            for (std::size_t b = 0; b < inner; ++b)
              p[(a * extent + e) * inner + b] = gd[(a * total + offset + e) * inner + b];
        offset += extent;
        parts.push_back(std::move(pg));
      }
      return parts;
    }
    case Prim::Slice: {
      const Shape& in = s[0].shape();
      std::size_t outer = 1, inner = 1;
      for (std::size_t k = 0; k < n.axis; ++k) outer *= in[k];
      for (std::size_t k = n.axis + 1; k < in.size(); ++k) inner *= in[k];
      const std::size_t extent = in[n.axis];
      const std::size_t width = n.end - n.begin;
      Tensor out(in);
      auto o = out.mutable_data();
      auto gd = g.data();
      for (std::size_t a = 0; a < outer; ++a)
        for (std::size_t e = 0; e < width; ++e)
          for (std::size_t b = 0; b < inner; ++b)
            o[(a * extent + n.begin + e) * inner + b] = gd[(a * width + e) * inner + b];
      return {out};
    }
    case Prim::Reshape:
      return {g.with_shape(n.in_shape)};
    case Prim::Transpose:
      return {transpose2d(g)};
    case Prim::Softplus:
      return {map_unary(g, s[0], [](double gi, double x) { return gi * sigmoid(x); })};
    case Prim::Sigmoid:
      return {map_unary(g, n.value, [](double gi, double y) { return gi * y * (1.0 - y); })};
    case Prim::Tanh:
      return {map_unary(g, n.value, [](double gi, double y) { return gi * (1.0 - y * y); })};
    case Prim::Relu:
      return {map_unary(g, s[0], [](double gi, double x) { return x > 0.0 ? gi : 0.0; })};
    case Prim::Softmax: {
      auto [rows, cols] = rows_last(n.value);
      Tensor out(g.shape());
      auto o = out.mutable_data();
      auto gd = g.data();
      auto y = n.value.data();
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += gd[r * cols + c] * y[r * cols + c];
        for (std::size_t c = 0; c < cols; ++c)
          o[r * cols + c] = y[r * cols + c] * (gd[r * cols + c] - dot);
      }
      return {out};
    }
    case Prim::LogSoftmax: {
      auto [rows, cols] = rows_last(n.value);
      Tensor out(g.shape());
      auto o = out.mutable_data();
      auto gd = g.data();
      auto y = n.value.data();
      for (std::size_t r = 0; r < rows; ++r) {
        double total = 0.0;
        for (std::size_t c = 0; c < cols; ++c) total += gd[r * cols + c];
        for (std::size_t c = 0; c < cols; ++c)
          o[r * cols + c] = gd[r * cols + c] - std::exp(y[r * cols + c]) * total;
      }
      return {out};
    }
    case Prim::LogSumExp: {
      auto [rows, cols] = rows_last(s[0]);
      Tensor out(s[0].shape());
      auto o = out.mutable_data();
      auto gd = g.data();
      auto x = s[0].data();
      auto y = n.value.data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
          o[r * cols + c] = gd[r] * std::exp(x[r * cols + c] - y[r]);
      return {out};
    }
    case Prim::Dropout: {
      // saved: input, scaled mask
      return {map_unary(g, s[1], [](double gi, double m) { return gi * m; })};
    }
    case Prim::Clamp: {
      Tensor out(g.shape());
      auto o = out.mutable_data();
      auto gd = g.data();
      auto x = s[0].data();
      for (std::size_t i = 0; i < o.size(); ++i)
        o[i] = (x[i] >= n.lo && x[i] <= n.hi) ? gd[i] : 0.0;
      return {out};
    }
    case Prim::CbLogNormalizer:
      return {map_unary(g, s[0], [](double gi, double l) { return gi * cb_log_normalizer_grad(l); })};
    case Prim::SolveRightUpper: {
      // W = B U^{-1};  dB = G U^{-T};  dU = -triu(W^T dB)
      const auto u = as_matrix(s[1]);
      const auto gm = as_matrix(g);
      const auto w = as_matrix(n.value);
      RowMat gb = u.transpose().triangularView<Eigen::Lower>().solve<Eigen::OnTheRight>(gm);
      RowMat gu = -(w.transpose() * gb);
      gu = RowMat(gu.triangularView<Eigen::Upper>());
      Tensor tb(s[0].shape()), tu(s[1].shape());
      MutMap(tb.mutable_data().data(), gb.rows(), gb.cols()) = gb;
      MutMap(tu.mutable_data().data(), gu.rows(), gu.cols()) = gu;
      return {tb, tu};
    }
  }
  throw GraphError("backward: unknown primitive");
}

}  // namespace aevb::kernels
