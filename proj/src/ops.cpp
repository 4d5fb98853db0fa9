#include "aevb/ops.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>

#include "aevb/errors.hpp"
#include "aevb/tape.hpp"
#include "kernels.hpp"

namespace aevb {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Records `out` on the active tape when any input is attached to it.
Tensor finish(Tensor out, Tape::Node node, const std::vector<const Tensor*>& inputs) {
  Tape* tape = Tape::active();
  if (tape == nullptr) return out;
  bool attached = false;
  for (const Tensor* in : inputs) attached = attached || tape->owns(*in);
  if (!attached) return out;
  node.value = out.detach();
  const std::size_t index = tape->record(std::move(node), inputs);
  out.set_requires_grad(true);
  out.set_node({tape->id(), static_cast<std::uint32_t>(index)});
  return out;
}

Tape::Node make(Prim kind) {
  Tape::Node n;
  n.kind = kind;
  return n;
}

template <class Fn>
Tensor binary(Prim kind, const Tensor& a, const Tensor& b, Fn fn) {
  const Shape shape = kernels::broadcast_shape(prim_name(kind), a.shape(), b.shape());
  Tensor out(shape);
  auto o = out.mutable_data();
  auto ad = a.data();
  auto bd = b.data();
  const std::size_t na = ad.size(), nb = bd.size();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = fn(ad[i % na], bd[i % nb]);
  return finish(std::move(out), make(kind), {&a, &b});
}

template <class Fn>
Tensor unary(Prim kind, const Tensor& x, Fn fn) {
  Tensor out(x.shape());
  auto o = out.mutable_data();
  auto xd = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = fn(xd[i]);
  return finish(std::move(out), make(kind), {&x});
}

void require_rank(const char* prim, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank)
    throw ShapeError(std::string(prim) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(t.shape()));
}

void require_axis(const char* prim, const Tensor& t, std::size_t axis) {
  if (axis >= t.rank())
    throw ShapeError(std::string(prim) + ": axis " + std::to_string(axis) + " out of range for " +
                     shape_str(t.shape()));
}

Shape without_last(const Shape& s) { return Shape(s.begin(), s.end() - 1); }

std::pair<std::size_t, std::size_t> rows_last(const Tensor& t) {
  const std::size_t last = t.rank() == 0 ? 1 : t.shape().back();
  return {t.numel() / last, last};
}

Tensor apply_mask(const Tensor& x, Tensor mask) {
  Tensor out(x.shape());
  auto o = out.mutable_data();
  auto xd = x.data();
  auto m = mask.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = xd[i] * m[i];
  Tape::Node node = make(Prim::Dropout);
  node.saved.push_back(std::move(mask));
  return finish(std::move(out), std::move(node), {&x});
}

void check_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw DomainError("dropout: rate " + std::to_string(rate) + " outside [0,1)");
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  return finish(kernels::matmul(a, b, false, false), make(Prim::MatMul), {&a, &b});
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(Prim::Add, a, b, [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(Prim::Sub, a, b, [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(Prim::Mul, a, b, [](double x, double y) { return x * y; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (std::size_t i = 0; i < b.numel(); ++i)
    if (b[i] == 0.0) throw DomainError("div: zero divisor at flat index " + std::to_string(i));
  return binary(Prim::Div, a, b, [](double x, double y) { return x / y; });
}

Tensor neg(const Tensor& x) {
  return unary(Prim::Neg, x, [](double v) { return -v; });
}

Tensor exp(const Tensor& x) {
  return unary(Prim::Exp, x, [](double v) { return std::exp(v); });
}

Tensor log(const Tensor& x) {
  for (std::size_t i = 0; i < x.numel(); ++i)
    if (!(x[i] > 0.0))
      throw DomainError("log: non-positive argument " + std::to_string(x[i]) + " at flat index " +
                        std::to_string(i));
  return unary(Prim::Log, x, [](double v) { return std::log(v); });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return finish(Tensor::scalar(total), make(Prim::Sum), {&x});
}

Tensor sum(const Tensor& x, std::size_t axis) {
  require_axis("sum", x, axis);
  const Shape& in = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t k = 0; k < axis; ++k) outer *= in[k];
  for (std::size_t k = axis + 1; k < in.size(); ++k) inner *= in[k];
  const std::size_t extent = in[axis];
  Shape out_shape;
  for (std::size_t k = 0; k < in.size(); ++k)
    if (k != axis) out_shape.push_back(in[k]);
  Tensor out(out_shape);
  auto o = out.mutable_data();
  auto xd = x.data();
  for (std::size_t a = 0; a < outer; ++a)
    for (std::size_t e = 0; e < extent; ++e)
      for (std::size_t b = 0; b < inner; ++b) o[a * inner + b] += xd[(a * extent + e) * inner + b];
  Tape::Node node = make(Prim::SumAxis);
  node.axis = axis;
  return finish(std::move(out), std::move(node), {&x});
}

Tensor mean(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return finish(Tensor::scalar(total / static_cast<double>(x.numel())), make(Prim::Mean), {&x});
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  require_axis("concat", parts.front(), axis);
  std::size_t total = 0;
  for (const auto& p : parts) {
    bool ok = p.rank() == first.size();
    for (std::size_t k = 0; ok && k < first.size(); ++k) ok = k == axis || p.dim(k) == first[k];
    if (!ok)
      throw ShapeError("concat: shape " + shape_str(p.shape()) + " does not match " +
                       shape_str(first) + " off axis " + std::to_string(axis));
    total += p.dim(axis);
  }
  Shape out_shape = first;
  out_shape[axis] = total;
  std::size_t outer = 1, inner = 1;
  for (std::size_t k = 0; k < axis; ++k) outer *= first[k];
  for (std::size_t k = axis + 1; k < first.size(); ++k) inner *= first[k];
  Tensor out(out_shape);
  auto o = out.mutable_data();
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t extent = p.dim(axis);
    auto pd = p.data();
    for (std::size_t a = 0; a < outer; ++a)
      for (std::size_t e = 0; e < extent; ++e)
        for (std::size_t b = 0; b < inner; ++b)
          o[(a * total + offset + e) * inner + b] = pd[(a * extent + e) * inner + b];
    offset += extent;
  }
  Tape::Node node = make(Prim::Concat);
  node.axis = axis;
  std::vector<const Tensor*> inputs;
  for (const auto& p : parts) inputs.push_back(&p);
  return finish(std::move(out), std::move(node), inputs);
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  require_axis("slice", x, axis);
  const Shape& in = x.shape();
  if (begin >= end || end > in[axis])
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for axis " + std::to_string(axis) + " of " + shape_str(in));
  std::size_t outer = 1, inner = 1;
  for (std::size_t k = 0; k < axis; ++k) outer *= in[k];
  for (std::size_t k = axis + 1; k < in.size(); ++k) inner *= in[k];
  const std::size_t extent = in[axis];
  const std::size_t width = end - begin;
  Shape out_shape = in;
  out_shape[axis] = width;
  Tensor out(out_shape);
  auto o = out.mutable_data();
  auto xd = x.data();
  for (std::size_t a = 0; a < outer; ++a)
    for (std::size_t e = 0; e < width; ++e)
      for (std::size_t b = 0; b < inner; ++b)
        o[(a * width + e) * inner + b] = xd[(a * extent + begin + e) * inner + b];
  Tape::Node node = make(Prim::Slice);
  node.axis = axis;
  node.begin = begin;
  node.end = end;
  return finish(std::move(out), std::move(node), {&x});
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  Tape::Node node = make(Prim::Reshape);
  node.in_shape = x.shape();
  return finish(x.with_shape(std::move(shape)), std::move(node), {&x});
}

Tensor transpose(const Tensor& x) {
  require_rank("transpose", x, 2);
  return finish(kernels::transpose2d(x), make(Prim::Transpose), {&x});
}

Tensor softplus(const Tensor& x) { return unary(Prim::Softplus, x, kernels::softplus); }

Tensor sigmoid(const Tensor& x) { return unary(Prim::Sigmoid, x, kernels::sigmoid); }

Tensor tanh(const Tensor& x) {
  return unary(Prim::Tanh, x, [](double v) { return std::tanh(v); });
}

Tensor relu(const Tensor& x) {
  return unary(Prim::Relu, x, [](double v) { return v > 0.0 ? v : 0.0; });
}

Tensor softmax(const Tensor& x) {
  if (x.rank() == 0) throw ShapeError("softmax: rank-0 input");
  auto [rows, cols] = rows_last(x);
  Tensor out(x.shape());
  auto o = out.mutable_data();
  auto xd = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) mx = std::max(mx, xd[r * cols + c]);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += (o[r * cols + c] = std::exp(xd[r * cols + c] - mx));
    for (std::size_t c = 0; c < cols; ++c) o[r * cols + c] /= total;
  }
  return finish(std::move(out), make(Prim::Softmax), {&x});
}

Tensor log_softmax(const Tensor& x) {
  if (x.rank() == 0) throw ShapeError("log_softmax: rank-0 input");
  auto [rows, cols] = rows_last(x);
  Tensor out(x.shape());
  auto o = out.mutable_data();
  auto xd = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) mx = std::max(mx, xd[r * cols + c]);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += std::exp(xd[r * cols + c] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t c = 0; c < cols; ++c) o[r * cols + c] = xd[r * cols + c] - lse;
  }
  return finish(std::move(out), make(Prim::LogSoftmax), {&x});
}

Tensor logsumexp(const Tensor& x) {
  if (x.rank() == 0) throw ShapeError("logsumexp: rank-0 input");
  auto [rows, cols] = rows_last(x);
  Tensor out(without_last(x.shape()));
  auto o = out.mutable_data();
  auto xd = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) mx = std::max(mx, xd[r * cols + c]);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += std::exp(xd[r * cols + c] - mx);
    o[r] = mx + std::log(total);
  }
  return finish(std::move(out), make(Prim::LogSumExp), {&x});
}

Tensor dropout(const Tensor& x, double rate, BatchRng& rng) {
  check_rate(rate);
  if (rate == 0.0) return x;
  auto [rows, cols] = x.rank() >= 2 ? std::pair{x.dim(0), x.numel() / x.dim(0)}
                                    : std::pair{std::size_t{1}, x.numel()};
  const double scale = 1.0 / (1.0 - rate);
  Tensor mask(x.shape());
  auto m = mask.mutable_data();
  for (std::size_t r = 0; r < rows; ++r) {
    SeededRng& stream = rng.row(r);
    for (std::size_t c = 0; c < cols; ++c) m[r * cols + c] = stream.uniform() >= rate ? scale : 0.0;
  }
  return apply_mask(x, std::move(mask));
}

Tensor dropout(const Tensor& x, double rate, SeededRng& rng) {
  check_rate(rate);
  if (rate == 0.0) return x;
  const double scale = 1.0 / (1.0 - rate);
  Tensor mask(x.shape());
  for (double& v : mask.mutable_data()) v = rng.uniform() >= rate ? scale : 0.0;
  return apply_mask(x, std::move(mask));
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (!(lo <= hi)) throw DomainError("clamp: lo > hi");
  Tensor out(x.shape());
  auto o = out.mutable_data();
  auto xd = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::min(std::max(xd[i], lo), hi);
  Tape::Node node = make(Prim::Clamp);
  node.lo = lo;
  node.hi = hi;
  return finish(std::move(out), std::move(node), {&x});
}

Tensor cb_log_normalizer(const Tensor& lambda) {
  return unary(Prim::CbLogNormalizer, lambda, [](double l) { return kernels::cb_log_normalizer(l); });
}

double cb_log_normalizer(double lambda) { return kernels::cb_log_normalizer(lambda); }

Tensor solve_right_upper(const Tensor& b, const Tensor& u) {
  require_rank("solve_right_upper", b, 2);
  require_rank("solve_right_upper", u, 2);
  if (u.dim(0) != u.dim(1) || b.dim(1) != u.dim(0))
    throw ShapeError("solve_right_upper: incompatible shapes " + shape_str(b.shape()) + " / " +
                     shape_str(u.shape()));
  const std::size_t n = u.dim(0);
  for (std::size_t j = 0; j < n; ++j)
    if (u.at(j, j) == 0.0)
      throw DomainError("solve_right_upper: zero diagonal entry " + std::to_string(j));
  Eigen::Map<const RowMat> um(u.data().data(), n, n);
  Eigen::Map<const RowMat> bm(b.data().data(), b.dim(0), n);
  RowMat w = um.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(bm);
  Tensor out(b.shape());
  Eigen::Map<RowMat>(out.mutable_data().data(), b.dim(0), n) = w;
  return finish(std::move(out), make(Prim::SolveRightUpper), {&b, &u});
}

}  // namespace aevb
