#pragma once

#include "aevb/distributions.hpp"
#include "aevb/model.hpp"

namespace aevb {

/// x ~ N(W z, Phi), z ~ N(0, I), Phi = diag(softplus(pre_sigma)^2).
struct FaGenerative {
  Tensor w;          // [D, L]
  Tensor pre_sigma;  // [D]

  Tensor noise_std() const { return softplus(pre_sigma); }
};

/// q(z|x) = N(V x, U^T U), the covariance shared by all x.
struct FaAmortizedPosterior {
  Tensor v;           // [L, D]
  Tensor cov_decomp;  // [L, L], upper triangle used
};

/// Ancestral samples, [n, D].
Tensor fa_generate(const FaGenerative& theta, std::size_t n, SeededRng& rng);

FullGaussianCholesky fa_posterior(const FaAmortizedPosterior& phi, const Tensor& x);

/// log p(x | z^s) - KL(q(z|x) || N(0, I)) with z^s reparametrized; [B].
Tensor fa_elbo_estimator(const FaGenerative& theta, const FaAmortizedPosterior& phi, const Tensor& x,
                         BatchRng& rng);

/// Exact log N(x; 0, W W^T + Phi) per row.
std::vector<double> fa_log_evidence(const FaGenerative& theta, const Tensor& xs);
/// Mean of fa_log_evidence.
double fa_exact_evidence(const FaGenerative& theta, const Tensor& xs);

class FaModel : public LatentModel {
 public:
  FaGenerative theta;
  FaAmortizedPosterior phi;

  /// W, V, pre_sigma ~ N(0, 1); cov_decomp = I.
  FaModel(std::size_t data_dim, std::size_t latent_dim, SeededRng& init);

  std::string tag() const override { return "fa"; }
  std::vector<ParamRef> parameters() override;
  Tensor per_example_elbo(const Batch& batch, BatchRng& rng, bool training) const override;
  EvalExtras extras(const Dataset& split) const override;
};

}  // namespace aevb
