#pragma once

#include "aevb/assignment.hpp"
#include "aevb/distributions.hpp"
#include "aevb/model.hpp"

namespace aevb {

enum class GmvaeEstimator { Marginalized, GumbelLogprob, GumbelKl };

const char* estimator_name(GmvaeEstimator e);
GmvaeEstimator parse_estimator(const std::string& name);

struct GmvaeConfig {
  std::size_t data_dim = 784;
  std::size_t latent_dim = 20;
  std::size_t classes = 10;
  std::size_t hidden = 500;
  double tau = 0.5;
  GmvaeEstimator estimator = GmvaeEstimator::Marginalized;
};

/// y ~ Cat(1/C), z|y ~ N(y M_mu, softplus(y M_sigma)), x|z ~ Bernoulli(p(z)).
/// q(y|x) is a classifier; q(z|x,y) a Gaussian network on (x || y).
class GmvaeModel : public LatentModel {
 public:
  GmvaeConfig config;
  Mlp classifier;        // x -> logits
  GaussianNet encoder;   // (x || y) -> z
  Tensor prior_mu;       // [C, L]
  Tensor prior_sigma;    // [C, L], softplus pre-activation
  Mlp decoder;           // z -> Bernoulli logits

  GmvaeModel(const GmvaeConfig& config, SeededRng& init);

  std::string tag() const override { return "gmvae"; }
  std::vector<ParamRef> parameters() override;
  Tensor per_example_elbo(const Batch& batch, BatchRng& rng, bool training) const override;
  /// Conditional entropy and, when the split has labels, clustering accuracy.
  EvalExtras extras(const Dataset& split) const override;

  Tensor logits(const Tensor& x, BatchRng& rng) const;
  /// x W_x: the first encoder layer's x contribution, shared across classes.
  Tensor encoder_x_part(const Tensor& x) const;
  DiagGaussian encode(const Tensor& x_part, const Tensor& y, BatchRng& rng) const;
  DiagGaussian prior(const Tensor& y) const;
  Tensor decoder_logits(const Tensor& z, BatchRng& rng) const;
};

/// y summed out exactly, one z draw per class; [B].
Tensor gmvae_elbo_marginalized(const GmvaeModel& nets, const Tensor& x, BatchRng& rng);
/// Relaxed (y, z) drawn jointly; full single-sample log ratio.
Tensor gmvae_elbo_gumbel_logprob(const GmvaeModel& nets, const Tensor& x, double tau, BatchRng& rng);
/// Relaxed y for z's encoder, analytic Gaussian and categorical KLs.
Tensor gmvae_elbo_gumbel_kl(const GmvaeModel& nets, const Tensor& x, double tau, BatchRng& rng);
/// Exact y ~ q(y|x) by Gumbel-max, bracketed term at that y, minus the
/// categorical KL. Unbiased for the same ELBO as the marginalized estimator.
Tensor gmvae_elbo_sampled_y(const GmvaeModel& nets, const Tensor& x, BatchRng& rng);

/// log p(x|z^s_y) - KL(q(z|x,y) || p(z|y)) for a fixed one-hot y; [B].
Tensor gmvae_bracket(const GmvaeModel& nets, const Tensor& x, const Tensor& y, BatchRng& rng);

/// argmax of the classifier logits, ties toward the lowest index.
std::vector<std::size_t> gmvae_cluster(const GmvaeModel& nets, const Tensor& x);

/// z ~ p(z|y), x ~ Bernoulli(p(z)); one row of y per image.
struct GmvaeGeneration {
  Tensor probs;
  Tensor samples;
};
GmvaeGeneration gmvae_generate(const GmvaeModel& nets, const Tensor& y, BatchRng& rng);

}  // namespace aevb
