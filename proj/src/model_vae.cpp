#include "aevb/model_vae.hpp"

#include "aevb/errors.hpp"

namespace aevb {

namespace {

Tensor clamp_lambda(const Tensor& logits) { return clamp(sigmoid(logits), kLambdaEps, 1.0 - kLambdaEps); }

Tensor cb_sample(const Tensor& lambdas, BatchRng& rng) { return ContinuousBernoulliVec(lambdas).sample(rng); }

}  // namespace

// ---- VAE

VaeModel::VaeModel(const VaeConfig& c, SeededRng& init)
    : config(c),
      encoder({c.data_dim, c.hidden, c.hidden}, c.latent_dim, c.dropout, init),
      decoder({c.latent_dim, c.hidden, c.hidden, c.data_dim}, c.dropout, init) {}

std::vector<ParamRef> VaeModel::parameters() {
  std::vector<ParamRef> out;
  decoder.collect("decoder", Role::Theta, out);
  encoder.collect("encoder", Role::Phi, out);
  return out;
}

DiagGaussian VaeModel::encode(const Tensor& x, BatchRng& rng, bool training) const {
  return encoder(x, rng, training);
}

Tensor VaeModel::decode(const Tensor& z, BatchRng& rng, bool training) const {
  return clamp_lambda(decoder(z, rng, training));
}

Tensor VaeModel::per_example_elbo(const Batch& batch, BatchRng& rng, bool training) const {
  return vae_elbo_estimator(*this, batch.x, rng, training);
}

Tensor vae_elbo_estimator(const VaeModel& nets, const Tensor& x, BatchRng& rng, bool training) {
  DiagGaussian q = nets.encode(x, rng, training);
  Tensor z = q.rsample(rng);
  Tensor lambdas = nets.decode(z, rng, training);
  return ContinuousBernoulliVec(lambdas).log_prob(x) -
         kl_diag_gaussian(q, DiagGaussian::standard(nets.config.latent_dim));
}

Generation vae_generate(const VaeModel& nets, std::size_t n, BatchRng& rng) {
  Tensor z = standard_normal({n, nets.config.latent_dim}, rng);
  Generation g;
  g.params = nets.decode(z, rng, false);
  g.samples = cb_sample(g.params, rng);
  return g;
}

Tensor latent_means(const VaeModel& nets, const Tensor& xs) {
  BatchRng unused(0);
  return nets.encode(xs, unused, false).mu.detach();
}

// ---- CVAE

CvaeModel::CvaeModel(const CvaeConfig& c, SeededRng& init)
    : config(c),
      encoder({c.data_dim + c.classes, c.hidden, c.hidden}, c.latent_dim, c.dropout, init),
      prior_mu(c.classes, c.latent_dim, init),
      prior_sigma(c.classes, c.latent_dim, init),
      decoder({c.latent_dim + c.classes, c.hidden, c.hidden, c.data_dim}, c.dropout, init) {}

std::vector<ParamRef> CvaeModel::parameters() {
  std::vector<ParamRef> out;
  prior_mu.collect("prior_mu", Role::Theta, out);
  prior_sigma.collect("prior_sigma", Role::Theta, out);
  decoder.collect("decoder", Role::Theta, out);
  encoder.collect("encoder", Role::Phi, out);
  return out;
}

DiagGaussian CvaeModel::encode(const Tensor& x, const Tensor& y, BatchRng& rng, bool training) const {
  return encoder(concat({x, y}, 1), rng, training);
}

DiagGaussian CvaeModel::prior(const Tensor& y) const { return DiagGaussian(prior_mu(y), softplus(prior_sigma(y))); }

Tensor CvaeModel::decode(const Tensor& z, const Tensor& y, BatchRng& rng, bool training) const {
  return clamp_lambda(decoder(concat({z, y}, 1), rng, training));
}

Tensor CvaeModel::per_example_elbo(const Batch& batch, BatchRng& rng, bool training) const {
  if (!batch.has_labels()) throw DomainError("cvae: batch has no labels");
  return cvae_elbo_estimator(*this, batch.x, batch.y, rng, training);
}

Tensor cvae_elbo_estimator(const CvaeModel& nets, const Tensor& x, const Tensor& y, BatchRng& rng,
                           bool training) {
  require_one_hot(y, "cvae_elbo_estimator");
  if (y.dim(1) != nets.config.classes)
    throw ShapeError("cvae_elbo_estimator: labels " + shape_str(y.shape()) + " for " +
                     std::to_string(nets.config.classes) + " classes");
  DiagGaussian q = nets.encode(x, y, rng, training);
  Tensor z = q.rsample(rng);
  Tensor lambdas = nets.decode(z, y, rng, training);
  return ContinuousBernoulliVec(lambdas).log_prob(x) - kl_diag_gaussian(q, nets.prior(y));
}

Generation cvae_generate(const CvaeModel& nets, const Tensor& y, BatchRng& rng) {
  require_one_hot(y, "cvae_generate");
  Tensor z = nets.prior(y).sample(rng);
  Generation g;
  g.params = nets.decode(z, y, rng, false);
  g.samples = cb_sample(g.params, rng);
  return g;
}

Tensor latent_means(const CvaeModel& nets, const Tensor& xs, const Tensor& ys) {
  BatchRng unused(0);
  return nets.encode(xs, ys, unused, false).mu.detach();
}

}  // namespace aevb
