#include "aevb/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "aevb/errors.hpp"

namespace aevb {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;

std::pair<std::size_t, std::size_t> rows_cols(const Shape& shape) {
  if (shape.empty()) return {1, 1};
  const std::size_t cols = shape.back();
  return {shape_numel(shape) / cols, cols};
}

template <class Draw>
Tensor row_noise(const Shape& shape, BatchRng& rng, Draw draw) {
  Tensor out(shape);
  auto [rows, cols] = rows_cols(shape);
  auto o = out.mutable_data();
  for (std::size_t r = 0; r < rows; ++r) {
    SeededRng& stream = rng.row(r);
    for (std::size_t c = 0; c < cols; ++c) o[r * cols + c] = draw(stream);
  }
  return out;
}

std::string coord(const char* what, std::size_t flat, double v) {
  return std::string(what) + ": coordinate " + std::to_string(flat) + " has value " + std::to_string(v);
}

void require_same_shape(const char* what, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

Shape without_last(const Shape& s) { return Shape(s.begin(), s.end() - 1); }

Tensor sum_last(const Tensor& t) { return t.rank() == 0 ? t : sum(t, t.rank() - 1); }

Tensor triu_mask(std::size_t n) {
  Tensor m(Shape{n, n});
  auto d = m.mutable_data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) d[i * n + j] = 1.0;
  return m;
}

Tensor eye(std::size_t n) {
  Tensor m(Shape{n, n});
  auto d = m.mutable_data();
  for (std::size_t i = 0; i < n; ++i) d[i * n + i] = 1.0;
  return m;
}

}  // namespace

Tensor standard_normal(const Shape& shape, BatchRng& rng) {
  return row_noise(shape, rng, [](SeededRng& s) { return s.normal(); });
}

Tensor standard_gumbel(const Shape& shape, BatchRng& rng) {
  return row_noise(shape, rng, [](SeededRng& s) { return s.gumbel(); });
}

Tensor standard_uniform(const Shape& shape, BatchRng& rng) {
  return row_noise(shape, rng, [](SeededRng& s) { return s.uniform_open(); });
}

std::vector<std::size_t> argmax_rows(const Tensor& x) {
  auto [rows, cols] = rows_cols(x.shape());
  std::vector<std::size_t> out(rows);
  auto d = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = d.data() + r * cols;
    out[r] = static_cast<std::size_t>(std::max_element(row, row + cols) - row);
  }
  return out;
}

Tensor one_hot(const std::vector<std::size_t>& index, std::size_t classes) {
  Tensor out(Shape{index.size(), classes});
  auto o = out.mutable_data();
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= classes)
      throw DomainError("one_hot: index " + std::to_string(index[r]) + " >= " + std::to_string(classes));
    o[r * classes + index[r]] = 1.0;
  }
  return out;
}

void require_one_hot(const Tensor& y, const char* where) {
  if (y.rank() != 2) throw DomainError(std::string(where) + ": labels must be one-hot rows, got " + shape_str(y.shape()));
  const std::size_t cols = y.dim(1);
  auto d = y.data();
  for (std::size_t r = 0; r < y.dim(0); ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = d[r * cols + c];
      if (v != 0.0 && v != 1.0) throw DomainError(std::string(where) + ": label row " + std::to_string(r) + " is not one-hot");
      total += v;
    }
    if (total != 1.0) throw DomainError(std::string(where) + ": label row " + std::to_string(r) + " is not one-hot");
  }
}

// ---- DiagGaussian

DiagGaussian::DiagGaussian(Tensor mu_, Tensor sigma_) : mu(std::move(mu_)), sigma(std::move(sigma_)) {
  require_same_shape("DiagGaussian", mu, sigma);
  auto s = sigma.data();
  for (std::size_t i = 0; i < s.size(); ++i)
    if (!(s[i] > 0.0)) throw DomainError(coord("DiagGaussian sigma", i, s[i]));
}

DiagGaussian DiagGaussian::standard(std::size_t dim) {
  return DiagGaussian(Tensor(Shape{dim}), Tensor(Shape{dim}, 1.0));
}

Tensor DiagGaussian::log_prob(const Tensor& x) const {
  Tensor z = (x - mu) / sigma;
  return sum_last(-0.5 * square(z) - log(sigma) - 0.5 * kLog2Pi);
}

Tensor DiagGaussian::rsample(BatchRng& rng) const {
  return mu + sigma * standard_normal(mu.shape(), rng);
}

Tensor DiagGaussian::entropy() const { return sum_last(log(sigma) + 0.5 * (1.0 + kLog2Pi)); }

Tensor kl_diag_gaussian(const DiagGaussian& q, const DiagGaussian& p) {
  if (q.mu.shape().back() != p.mu.shape().back())
    throw ShapeError("kl_diag_gaussian: dimension mismatch " + shape_str(q.mu.shape()) + " vs " +
                     shape_str(p.mu.shape()));
  Tensor ratio = q.sigma / p.sigma;
  Tensor term = (square(ratio) + square((q.mu - p.mu) / p.sigma) - 1.0) * 0.5 - log(ratio);
  return sum_last(term);
}

// ---- FullGaussianCholesky

FullGaussianCholesky::FullGaussianCholesky(Tensor mu_, Tensor chol_upper_)
    : mu(std::move(mu_)), chol_upper(std::move(chol_upper_)) {
  const std::size_t k = mu.shape().back();
  if (chol_upper.shape() != Shape{k, k})
    throw ShapeError("FullGaussianCholesky: factor " + shape_str(chol_upper.shape()) +
                     " does not match mean " + shape_str(mu.shape()));
  for (std::size_t j = 0; j < k; ++j)
    if (chol_upper.at(j, j) == 0.0)
      throw DomainError("FullGaussianCholesky: zero diagonal at " + std::to_string(j));
}

Tensor FullGaussianCholesky::upper() const { return chol_upper * triu_mask(chol_upper.dim(0)); }

Tensor FullGaussianCholesky::log_det_cov() const {
  Tensor diag = sum(chol_upper * eye(chol_upper.dim(0)), 0);
  return sum(log(square(diag)));
}

Tensor FullGaussianCholesky::covariance() const {
  Tensor u = upper();
  return matmul(transpose(u), u);
}

Tensor FullGaussianCholesky::log_prob(const Tensor& x) const {
  const std::size_t k = mu.shape().back();
  Tensor centred = x - mu;
  const bool vec = centred.rank() == 1;
  if (vec) centred = reshape(centred, {1, k});
  Tensor eps = solve_right_upper(centred, chol_upper);
  Tensor lp = sum(square(eps), 1) * -0.5 - 0.5 * log_det_cov() - 0.5 * static_cast<double>(k) * kLog2Pi;
  return vec ? reshape(lp, {}) : lp;
}

Tensor FullGaussianCholesky::rsample_given(const Tensor& eps) const {
  const std::size_t k = mu.shape().back();
  if (eps.rank() == 1) return mu + reshape(matmul(reshape(eps, {1, k}), upper()), {k});
  return mu + matmul(eps, upper());
}

Tensor FullGaussianCholesky::rsample(BatchRng& rng) const {
  return rsample_given(standard_normal(mu.shape(), rng));
}

Tensor kl_full_gaussian_vs_standard(const FullGaussianCholesky& q) {
  const double k = static_cast<double>(q.mu.shape().back());
  Tensor trace = sum(square(q.upper()));
  return 0.5 * (trace + sum_last(square(q.mu)) - k - q.log_det_cov());
}

// ---- ContinuousBernoulliVec

ContinuousBernoulliVec::ContinuousBernoulliVec(Tensor l) : lambdas(std::move(l)) {
  auto d = lambdas.data();
  for (std::size_t i = 0; i < d.size(); ++i)
    if (!(d[i] > 0.0 && d[i] < 1.0)) throw DomainError(coord("ContinuousBernoulli lambda", i, d[i]));
}

Tensor ContinuousBernoulliVec::log_prob(const Tensor& x) const {
  auto d = x.data();
  for (std::size_t i = 0; i < d.size(); ++i)
    if (!(d[i] >= 0.0 && d[i] <= 1.0)) throw DomainError(coord("ContinuousBernoulli log_prob x", i, d[i]));
  return sum_last(x * log(lambdas) + (1.0 - x) * log(1.0 - lambdas) + cb_log_normalizer(lambdas));
}

Tensor ContinuousBernoulliVec::sample(BatchRng& rng) const {
  Tensor u = standard_uniform(lambdas.shape(), rng);
  auto o = u.mutable_data();
  auto l = lambdas.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double r = std::log(l[i]) - std::log1p(-l[i]);
    if (std::abs(r) > 1e-10) o[i] = std::clamp(std::log1p(o[i] * std::expm1(r)) / r, 0.0, 1.0);
  }
  return u;
}

double cb_mean(double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0))
    throw DomainError("cb_mean: lambda=" + std::to_string(lambda) + " outside (0,1)");
  if (std::abs(lambda - 0.5) < 1e-4) return 0.5 + (lambda - 0.5) / 3.0;
  return lambda / (2.0 * lambda - 1.0) + 1.0 / (2.0 * std::atanh(1.0 - 2.0 * lambda));
}

Tensor ContinuousBernoulliVec::mean() const {
  Tensor out(lambdas.shape());
  auto o = out.mutable_data();
  auto l = lambdas.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = cb_mean(l[i]);
  return out;
}

// ---- BernoulliVec

BernoulliVec::BernoulliVec(Tensor p) : probs(std::move(p)) {
  auto d = probs.data();
  for (std::size_t i = 0; i < d.size(); ++i)
    if (!(d[i] >= 0.0 && d[i] <= 1.0)) throw DomainError(coord("Bernoulli probs", i, d[i]));
}

BernoulliVec BernoulliVec::from_logits(Tensor logits) {
  BernoulliVec b(sigmoid(logits));
  b.logits_ = std::move(logits);
  b.has_logits_ = true;
  return b;
}

Tensor BernoulliVec::log_prob(const Tensor& x) const {
  auto d = x.data();
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i] != 0.0 && d[i] != 1.0) throw DomainError(coord("Bernoulli log_prob x", i, d[i]));
  if (has_logits_) return sum_last(-(x * softplus(-logits_) + (1.0 - x) * softplus(logits_)));
  constexpr double tiny = std::numeric_limits<double>::min();
  return sum_last(x * log(clamp(probs, tiny, 1.0)) + (1.0 - x) * log(clamp(1.0 - probs, tiny, 1.0)));
}

Tensor BernoulliVec::sample(BatchRng& rng) const {
  Tensor u = standard_uniform(probs.shape(), rng);
  auto o = u.mutable_data();
  auto p = probs.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = o[i] < p[i] ? 1.0 : 0.0;
  return u;
}

// ---- OneHotCategorical

OneHotCategorical::OneHotCategorical(Tensor l) : logits(std::move(l)) {
  if (logits.rank() == 0) throw ShapeError("OneHotCategorical: logits must have a class axis");
}

OneHotCategorical OneHotCategorical::from_probs(const Tensor& probs) {
  Tensor l(probs.shape());
  auto o = l.mutable_data();
  auto p = probs.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    if (!(p[i] >= 0.0 && p[i] <= 1.0)) throw DomainError(coord("OneHotCategorical probs", i, p[i]));
    o[i] = p[i] > 0.0 ? std::log(p[i]) : -std::numeric_limits<double>::infinity();
  }
  return OneHotCategorical(std::move(l));
}

OneHotCategorical OneHotCategorical::uniform(std::size_t classes) {
  return OneHotCategorical(Tensor(Shape{classes}));
}

Tensor OneHotCategorical::probs() const { return softmax(logits); }
Tensor OneHotCategorical::log_probs() const { return log_softmax(logits); }

Tensor OneHotCategorical::log_prob(const Tensor& y) const {
  auto [rows, cols] = rows_cols(y.shape());
  if (cols != classes()) throw ShapeError("OneHotCategorical log_prob: " + shape_str(y.shape()));
  auto d = y.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = d[r * cols + c];
      if (v != 0.0 && v != 1.0) throw DomainError(coord("OneHotCategorical log_prob y", r * cols + c, v));
      total += v;
    }
    if (total != 1.0) throw DomainError("OneHotCategorical log_prob: row " + std::to_string(r) + " is not one-hot");
  }
  return sum_last(y * log_probs());
}

Tensor OneHotCategorical::sample_given(const Tensor& gumbel) const {
  Tensor scores = logits.detach() + gumbel;
  Tensor y = one_hot(argmax_rows(scores), classes());
  return logits.rank() == 1 ? y.with_shape({classes()}) : y;
}

Tensor OneHotCategorical::sample(BatchRng& rng) const {
  return sample_given(standard_gumbel(logits.shape(), rng));
}

Tensor OneHotCategorical::entropy() const { return entropy_categorical(*this); }

Tensor entropy_categorical(const OneHotCategorical& q) {
  return -sum_last(q.probs() * q.log_probs());
}

Tensor kl_categorical(const OneHotCategorical& q, const OneHotCategorical& p) {
  if (q.classes() != p.classes())
    throw ShapeError("kl_categorical: class mismatch " + shape_str(q.logits.shape()) + " vs " +
                     shape_str(p.logits.shape()));
  bool finite = true;
  for (double v : q.logits.data()) finite = finite && std::isfinite(v);
  for (double v : p.logits.data()) finite = finite && std::isfinite(v);
  if (finite) {
    Tensor lq = q.log_probs();
    return sum_last(softmax(q.logits) * (lq - p.log_probs()));
  }
  // Zero probabilities: evaluate directly with 0 log 0 = 0.
  Tensor lq = q.log_probs().detach(), lp = p.log_probs().detach();
  const std::size_t cols = q.classes();
  const std::size_t nq = lq.numel() / cols, np = lp.numel() / cols;
  const std::size_t rows = std::max(nq, np);
  Tensor out(lq.numel() >= lp.numel() ? without_last(lq.shape()) : without_last(lp.shape()));
  auto o = out.mutable_data();
  for (std::size_t r = 0; r < rows; ++r) {
    double kl = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double a = lq[(r % nq) * cols + c], b = lp[(r % np) * cols + c];
      if (std::isinf(a)) continue;
      if (std::isinf(b)) throw DomainError("kl_categorical: infinite divergence, p is zero at class " + std::to_string(c) + " where q is positive");
      kl += std::exp(a) * (a - b);
    }
    o[r] = kl;
  }
  return out;
}

// ---- RelaxedOneHotCategorical

RelaxedOneHotCategorical::RelaxedOneHotCategorical(Tensor l, double tau)
    : logits(std::move(l)), temperature(tau) {
  if (!(tau > 0.0)) throw DomainError("RelaxedOneHotCategorical: temperature " + std::to_string(tau));
}

Tensor RelaxedOneHotCategorical::rsample_log_given(const Tensor& gumbel) const {
  return log_softmax((logits + gumbel) / temperature);
}

Tensor RelaxedOneHotCategorical::rsample_log(BatchRng& rng) const {
  return rsample_log_given(standard_gumbel(logits.shape(), rng));
}

Tensor RelaxedOneHotCategorical::rsample(BatchRng& rng) const { return exp(rsample_log(rng)); }

Tensor RelaxedOneHotCategorical::log_prob_from_log(const Tensor& log_y) const {
  const double c = static_cast<double>(logits.shape().back());
  Tensor log_pi = log_softmax(logits);
  Tensor tail = sum_last(log_pi - (temperature + 1.0) * log_y);
  return std::lgamma(c) + (c - 1.0) * std::log(temperature) + tail -
         c * logsumexp(log_pi - temperature * log_y);
}

Tensor RelaxedOneHotCategorical::log_prob(const Tensor& y) const {
  auto [rows, cols] = rows_cols(y.shape());
  auto d = y.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = d[r * cols + c];
      if (!(v > 0.0)) throw DomainError(coord("RelaxedOneHotCategorical log_prob y", r * cols + c, v));
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw DomainError("RelaxedOneHotCategorical log_prob: row " + std::to_string(r) + " sums to " +
                        std::to_string(total));
  }
  return log_prob_from_log(log(y));
}

}  // namespace aevb
