#pragma once

#include <cstddef>
#include <vector>

#include "aevb/ops.hpp"
#include "aevb/rng.hpp"
#include "aevb/tensor.hpp"

namespace aevb {

// Distributions are batched over the leading axis: parameters are [B, D] (or a
// single [D] vector) and log densities reduce the last axis, giving [B].

/// Row-wise noise of the given shape; row r draws from rng.row(r).
Tensor standard_normal(const Shape& shape, BatchRng& rng);
Tensor standard_gumbel(const Shape& shape, BatchRng& rng);
Tensor standard_uniform(const Shape& shape, BatchRng& rng);

/// Index of the largest entry of each row.
std::vector<std::size_t> argmax_rows(const Tensor& x);
Tensor one_hot(const std::vector<std::size_t>& index, std::size_t classes);
/// Throws DomainError unless every row of y is one-hot.
void require_one_hot(const Tensor& y, const char* where);

struct DiagGaussian {
  Tensor mu;
  Tensor sigma;

  DiagGaussian(Tensor mu, Tensor sigma);
  static DiagGaussian standard(std::size_t dim);

  Tensor log_prob(const Tensor& x) const;
  Tensor rsample(BatchRng& rng) const;
  Tensor sample(BatchRng& rng) const { return rsample(rng).detach(); }
  Tensor entropy() const;
};

/// Gaussian with covariance U^T U, U the upper triangle of `chol_upper`.
/// The factor is shared by every row of `mu`.
struct FullGaussianCholesky {
  Tensor mu;
  Tensor chol_upper;

  FullGaussianCholesky(Tensor mu, Tensor chol_upper);

  Tensor upper() const;
  Tensor log_det_cov() const;
  Tensor covariance() const;
  Tensor log_prob(const Tensor& x) const;
  Tensor rsample(BatchRng& rng) const;
  /// mu + eps U for given standard normal noise.
  Tensor rsample_given(const Tensor& eps) const;
  Tensor sample(BatchRng& rng) const { return rsample(rng).detach(); }
};

struct ContinuousBernoulliVec {
  Tensor lambdas;

  explicit ContinuousBernoulliVec(Tensor lambdas);

  Tensor log_prob(const Tensor& x) const;
  /// Inverse-CDF draw.
  Tensor sample(BatchRng& rng) const;
  Tensor mean() const;
};

struct BernoulliVec {
  Tensor probs;

  explicit BernoulliVec(Tensor probs);
  /// Numerically stable form parameterized by logits.
  static BernoulliVec from_logits(Tensor logits);

  Tensor log_prob(const Tensor& x) const;
  Tensor sample(BatchRng& rng) const;

 private:
  Tensor logits_;
  bool has_logits_ = false;
};

struct OneHotCategorical {
  Tensor logits;

  explicit OneHotCategorical(Tensor logits);
  /// Probabilities may contain zeros; the result is not differentiable.
  static OneHotCategorical from_probs(const Tensor& probs);
  static OneHotCategorical uniform(std::size_t classes);

  std::size_t classes() const { return logits.shape().back(); }
  Tensor probs() const;
  Tensor log_probs() const;
  Tensor log_prob(const Tensor& y) const;
  /// Gumbel-max draw.
  Tensor sample(BatchRng& rng) const;
  Tensor sample_given(const Tensor& gumbel) const;
  Tensor entropy() const;
};

/// Gumbel-Softmax relaxation of a one-hot categorical.
struct RelaxedOneHotCategorical {
  Tensor logits;
  double temperature;

  RelaxedOneHotCategorical(Tensor logits, double temperature);

  Tensor rsample(BatchRng& rng) const;
  /// Log of a relaxed sample, computed stably as log_softmax((logits+g)/tau).
  Tensor rsample_log(BatchRng& rng) const;
  Tensor rsample_log_given(const Tensor& gumbel) const;
  Tensor log_prob(const Tensor& y) const;
  Tensor log_prob_from_log(const Tensor& log_y) const;
};

Tensor kl_diag_gaussian(const DiagGaussian& q, const DiagGaussian& p);
Tensor kl_full_gaussian_vs_standard(const FullGaussianCholesky& q);
Tensor kl_categorical(const OneHotCategorical& q, const OneHotCategorical& p);
Tensor entropy_categorical(const OneHotCategorical& q);

/// Mean of the continuous Bernoulli with parameter lambda.
double cb_mean(double lambda);

}  // namespace aevb
