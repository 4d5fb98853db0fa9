#include "aevb/model_vrnn.hpp"

#include "aevb/errors.hpp"

namespace aevb {

VrnnModel::VrnnModel(const VrnnConfig& c, SeededRng& init)
    : config(c),
      cell(c.data_dim + c.latent_dim, c.state_dim, init),
      prior_mu(c.state_dim, c.latent_dim, init),
      prior_sigma(c.state_dim, c.latent_dim, init),
      posterior({c.data_dim + c.state_dim, c.hidden}, c.latent_dim, 0.0, init),
      emission({c.latent_dim + c.state_dim, c.hidden, c.data_dim}, 0.0, init) {}

std::vector<ParamRef> VrnnModel::parameters() {
  std::vector<ParamRef> out;
  cell.collect("lstm", Role::Theta, out);
  prior_mu.collect("prior_mu", Role::Theta, out);
  prior_sigma.collect("prior_sigma", Role::Theta, out);
  emission.collect("emission", Role::Theta, out);
  posterior.collect("posterior", Role::Phi, out);
  return out;
}

DiagGaussian VrnnModel::prior(const Tensor& h) const { return DiagGaussian(prior_mu(h), softplus(prior_sigma(h))); }

DiagGaussian VrnnModel::encode(const Tensor& x_t, const Tensor& h, BatchRng& rng) const {
  return posterior(concat({x_t, h}, 1), rng, false);
}

Tensor VrnnModel::emission_logits(const Tensor& z, const Tensor& h, BatchRng& rng) const {
  return emission(concat({z, h}, 1), rng, false);
}

Tensor VrnnModel::per_example_elbo(const Batch& batch, BatchRng& rng, bool) const {
  return vrnn_elbo_estimator(*this, batch.x, rng);
}

VrnnState vrnn_initial_state(const VrnnModel& nets, std::size_t batch) {
  const std::size_t h = nets.config.state_dim;
  return {Tensor(Shape{batch, h}), Tensor(Shape{batch, h}), 1};
}

VrnnState vrnn_step(const VrnnModel& nets, const VrnnState& state, const Tensor& x_prev, const Tensor& z_prev) {
  if (x_prev.rank() != 2 || z_prev.rank() != 2 || x_prev.dim(1) != nets.config.data_dim ||
      z_prev.dim(1) != nets.config.latent_dim || x_prev.dim(0) != z_prev.dim(0))
    throw ShapeError("vrnn_step: x " + shape_str(x_prev.shape()) + ", z " + shape_str(z_prev.shape()));
  auto [h, c] = nets.cell(concat({x_prev, z_prev}, 1), state.h, state.c);
  return {h, c, state.t + 1};
}

Tensor vrnn_elbo_estimator(const VrnnModel& nets, const Tensor& x_seq, BatchRng& rng) {
  const std::size_t d = nets.config.data_dim;
  if (x_seq.rank() != 2 || x_seq.dim(1) % d != 0)
    throw ShapeError("vrnn_elbo_estimator: sequence " + shape_str(x_seq.shape()) + " not a multiple of D=" +
                     std::to_string(d));
  const std::size_t steps = x_seq.dim(1) / d, b = x_seq.dim(0);
  VrnnState state = vrnn_initial_state(nets, b);
  Tensor total, x_prev, z_prev;
  for (std::size_t t = 0; t < steps; ++t) {
    if (t > 0) state = vrnn_step(nets, state, x_prev, z_prev);
    Tensor x_t = slice(x_seq, 1, t * d, (t + 1) * d);
    DiagGaussian q = nets.encode(x_t, state.h, rng);
    Tensor z = q.rsample(rng);
    Tensor term = BernoulliVec::from_logits(nets.emission_logits(z, state.h, rng)).log_prob(x_t) -
                  kl_diag_gaussian(q, nets.prior(state.h));
    total = t == 0 ? term : total + term;
    x_prev = x_t;
    z_prev = z;
  }
  return total;
}

VrnnGeneration vrnn_generate(const VrnnModel& nets, std::size_t steps, std::size_t n, BatchRng& rng) {
  if (steps == 0) throw DomainError("vrnn_generate: T must be at least 1");
  VrnnState state = vrnn_initial_state(nets, n);
  std::vector<Tensor> probs, samples;
  Tensor x_prev, z_prev;
  for (std::size_t t = 0; t < steps; ++t) {
    if (t > 0) state = vrnn_step(nets, state, x_prev, z_prev);
    Tensor z = nets.prior(state.h).sample(rng);
    Tensor p = sigmoid(nets.emission_logits(z, state.h, rng)).detach();
    Tensor x = BernoulliVec(p).sample(rng);
    probs.push_back(p);
    samples.push_back(x);
    x_prev = x;
    z_prev = z;
  }
  return {concat(probs, 1), concat(samples, 1)};
}

}  // namespace aevb
