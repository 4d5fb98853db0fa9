#pragma once

#include "aevb/distributions.hpp"
#include "aevb/model.hpp"

namespace aevb {

/// Decoder outputs are clamped to [kLambdaEps, 1 - kLambdaEps].
inline constexpr double kLambdaEps = 1e-6;

struct VaeConfig {
  std::size_t data_dim = 784;
  std::size_t latent_dim = 20;
  std::size_t hidden = 500;
  double dropout = 0.1;
};

/// Continuous Bernoulli likelihood on normalized pixels with a standard
/// normal prior.
class VaeModel : public LatentModel {
 public:
  VaeConfig config;
  GaussianNet encoder;
  Mlp decoder;

  VaeModel(const VaeConfig& config, SeededRng& init);

  std::string tag() const override { return "vae"; }
  std::vector<ParamRef> parameters() override;
  Tensor per_example_elbo(const Batch& batch, BatchRng& rng, bool training) const override;

  DiagGaussian encode(const Tensor& x, BatchRng& rng, bool training) const;
  /// Clamped Continuous Bernoulli parameters.
  Tensor decode(const Tensor& z, BatchRng& rng, bool training) const;
};

Tensor vae_elbo_estimator(const VaeModel& nets, const Tensor& x, BatchRng& rng, bool training = true);

struct Generation {
  Tensor params;   // lambda or Bernoulli probabilities, [n, D]
  Tensor samples;  // one draw per row, [n, D]
};

/// z ~ N(0, I), lambda = decoder(z), one Continuous Bernoulli draw per image.
Generation vae_generate(const VaeModel& nets, std::size_t n, BatchRng& rng);

/// Encoder means with dropout off, [B, L].
Tensor latent_means(const VaeModel& nets, const Tensor& xs);

struct CvaeConfig {
  std::size_t data_dim = 784;
  std::size_t latent_dim = 20;
  std::size_t hidden = 500;
  std::size_t classes = 10;
  double dropout = 0.1;
};

/// Label-conditioned VAE: q(z|x,y), p(z|y) = N(mu(y), sigma(y)), p(x|z,y).
/// Labels enter every conditioned network by concatenation.
class CvaeModel : public LatentModel {
 public:
  CvaeConfig config;
  GaussianNet encoder;  // (x || y)
  Linear prior_mu;      // y -> mu
  Linear prior_sigma;   // y -> softplus pre-activation
  Mlp decoder;          // (z || y)

  CvaeModel(const CvaeConfig& config, SeededRng& init);

  std::string tag() const override { return "cvae"; }
  std::vector<ParamRef> parameters() override;
  Tensor per_example_elbo(const Batch& batch, BatchRng& rng, bool training) const override;

  DiagGaussian encode(const Tensor& x, const Tensor& y, BatchRng& rng, bool training) const;
  DiagGaussian prior(const Tensor& y) const;
  Tensor decode(const Tensor& z, const Tensor& y, BatchRng& rng, bool training) const;
};

Tensor cvae_elbo_estimator(const CvaeModel& nets, const Tensor& x, const Tensor& y, BatchRng& rng,
                           bool training = true);
/// One row of y per generated image.
Generation cvae_generate(const CvaeModel& nets, const Tensor& y, BatchRng& rng);
Tensor latent_means(const CvaeModel& nets, const Tensor& xs, const Tensor& ys);

}  // namespace aevb
