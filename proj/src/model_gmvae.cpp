#include "aevb/model_gmvae.hpp"

#include <algorithm>

#include "aevb/errors.hpp"

namespace aevb {

const char* estimator_name(GmvaeEstimator e) {
  switch (e) {
    case GmvaeEstimator::Marginalized: return "marginalized";
    case GmvaeEstimator::GumbelLogprob: return "gumbel_logprob";
    case GmvaeEstimator::GumbelKl: return "gumbel_kl";
  }
  return "?";
}

GmvaeEstimator parse_estimator(const std::string& name) {
  for (auto e : {GmvaeEstimator::Marginalized, GmvaeEstimator::GumbelLogprob, GmvaeEstimator::GumbelKl})
    if (name == estimator_name(e)) return e;
  throw DomainError("unknown gmvae estimator '" + name + "'");
}

GmvaeModel::GmvaeModel(const GmvaeConfig& c, SeededRng& init)
    : config(c),
      classifier({c.data_dim, c.hidden, c.hidden, c.classes}, 0.0, init),
      encoder({c.data_dim + c.classes, c.hidden, c.hidden}, c.latent_dim, 0.0, init),
      prior_mu(glorot_normal(c.classes, c.latent_dim, init)),
      prior_sigma(glorot_normal(c.classes, c.latent_dim, init)),
      decoder({c.latent_dim, c.hidden, c.hidden, c.data_dim}, 0.0, init) {
  if (!(c.tau > 0.0)) throw DomainError("gmvae: tau must be positive");
}

std::vector<ParamRef> GmvaeModel::parameters() {
  std::vector<ParamRef> out;
  out.push_back({"prior_mu", Role::Theta, &prior_mu});
  out.push_back({"prior_sigma", Role::Theta, &prior_sigma});
  decoder.collect("decoder", Role::Theta, out);
  classifier.collect("classifier", Role::Phi, out);
  encoder.collect("encoder", Role::Phi, out);
  return out;
}

Tensor GmvaeModel::logits(const Tensor& x, BatchRng& rng) const { return classifier(x, rng, false); }

Tensor GmvaeModel::encoder_x_part(const Tensor& x) const {
  return matmul(x, slice(encoder.trunk.front().w, 0, 0, config.data_dim));
}

DiagGaussian GmvaeModel::encode(const Tensor& x_part, const Tensor& y, BatchRng& rng) const {
  const Linear& first = encoder.trunk.front();
  Tensor wy = slice(first.w, 0, config.data_dim, config.data_dim + config.classes);
  return encoder.from_first(x_part + matmul(y, wy) + first.b, rng, false);
}

DiagGaussian GmvaeModel::prior(const Tensor& y) const {
  return DiagGaussian(matmul(y, prior_mu), softplus(matmul(y, prior_sigma)));
}

Tensor GmvaeModel::decoder_logits(const Tensor& z, BatchRng& rng) const { return decoder(z, rng, false); }

Tensor GmvaeModel::per_example_elbo(const Batch& batch, BatchRng& rng, bool training) const {
  // Evaluation always uses the marginalized estimator.
  if (!training) return gmvae_elbo_marginalized(*this, batch.x, rng);
  switch (config.estimator) {
    case GmvaeEstimator::Marginalized: return gmvae_elbo_marginalized(*this, batch.x, rng);
    case GmvaeEstimator::GumbelLogprob: return gmvae_elbo_gumbel_logprob(*this, batch.x, config.tau, rng);
    case GmvaeEstimator::GumbelKl: return gmvae_elbo_gumbel_kl(*this, batch.x, config.tau, rng);
  }
  return {};
}

namespace {

Tensor repeat_rows(const Tensor& t, std::size_t times) { return times == 1 ? t : concat(std::vector<Tensor>(times, t), 0); }

Tensor class_major_one_hot(std::size_t classes, std::size_t batch) {
  std::vector<std::size_t> idx(classes * batch);
  for (std::size_t c = 0; c < classes; ++c) std::fill(idx.begin() + c * batch, idx.begin() + (c + 1) * batch, c);
  return one_hot(idx, classes);
}

Tensor reconstruction(const GmvaeModel& nets, const Tensor& z, const Tensor& x, BatchRng& rng) {
  return BernoulliVec::from_logits(nets.decoder_logits(z, rng)).log_prob(x);
}

Tensor gaussian_given(const DiagGaussian& q, const Tensor& eps) { return q.mu + q.sigma * eps; }

}  // namespace

Tensor gmvae_bracket(const GmvaeModel& nets, const Tensor& x, const Tensor& y, BatchRng& rng) {
  DiagGaussian q = nets.encode(nets.encoder_x_part(x), y, rng);
  Tensor z = q.rsample(rng);
  return reconstruction(nets, z, x, rng) - kl_diag_gaussian(q, nets.prior(y));
}

Tensor gmvae_elbo_marginalized(const GmvaeModel& nets, const Tensor& x, BatchRng& rng) {
  const std::size_t b = x.dim(0), c = nets.config.classes;
  Tensor logits = nets.logits(x, rng);
  // Replicate every example once per class, class-major: row k*B + i holds
  // example i with y = e_k.
  Tensor y = class_major_one_hot(c, b);
  DiagGaussian q = nets.encode(repeat_rows(nets.encoder_x_part(x), c), y, rng);
  Tensor z = q.rsample(rng);
  Tensor terms = reconstruction(nets, z, repeat_rows(x, c), rng) - kl_diag_gaussian(q, nets.prior(y));
  Tensor per_class = transpose(reshape(terms, {c, b}));
  OneHotCategorical qy(logits);
  return sum(softmax(logits) * per_class, 1) - kl_categorical(qy, OneHotCategorical::uniform(c));
}

Tensor gmvae_elbo_gumbel_logprob(const GmvaeModel& nets, const Tensor& x, double tau, BatchRng& rng) {
  const std::size_t b = x.dim(0), c = nets.config.classes, l = nets.config.latent_dim;
  Tensor eps = standard_normal({b, l}, rng);
  Tensor g = standard_gumbel({b, c}, rng);
  RelaxedOneHotCategorical qy(nets.logits(x, rng), tau);
  Tensor log_y = qy.rsample_log_given(g);
  Tensor y = exp(log_y);
  DiagGaussian qz = nets.encode(nets.encoder_x_part(x), y, rng);
  Tensor z = gaussian_given(qz, eps);
  RelaxedOneHotCategorical py(Tensor(Shape{c}), tau);
  return reconstruction(nets, z, x, rng) + nets.prior(y).log_prob(z) + py.log_prob_from_log(log_y) -
         qy.log_prob_from_log(log_y) - qz.log_prob(z);
}

Tensor gmvae_elbo_gumbel_kl(const GmvaeModel& nets, const Tensor& x, double tau, BatchRng& rng) {
  const std::size_t b = x.dim(0), c = nets.config.classes, l = nets.config.latent_dim;
  Tensor eps = standard_normal({b, l}, rng);
  Tensor g = standard_gumbel({b, c}, rng);
  Tensor logits = nets.logits(x, rng);
  Tensor y = exp(RelaxedOneHotCategorical(logits, tau).rsample_log_given(g));
  DiagGaussian qz = nets.encode(nets.encoder_x_part(x), y, rng);
  Tensor z = gaussian_given(qz, eps);
  return reconstruction(nets, z, x, rng) - kl_diag_gaussian(qz, nets.prior(y)) -
         kl_categorical(OneHotCategorical(logits), OneHotCategorical::uniform(c));
}

Tensor gmvae_elbo_sampled_y(const GmvaeModel& nets, const Tensor& x, BatchRng& rng) {
  const std::size_t c = nets.config.classes;
  Tensor logits = nets.logits(x, rng);
  OneHotCategorical qy(logits);
  Tensor y = qy.sample(rng);
  return gmvae_bracket(nets, x, y, rng) - kl_categorical(qy, OneHotCategorical::uniform(c));
}

std::vector<std::size_t> gmvae_cluster(const GmvaeModel& nets, const Tensor& x) {
  BatchRng unused(0);
  return argmax_rows(nets.logits(x, unused));
}

EvalExtras GmvaeModel::extras(const Dataset& split) const {
  EvalExtras e;
  BatchRng unused(0);
  const std::size_t n = split.size(), chunk = 1000;
  double entropy = 0.0;
  std::vector<std::size_t> clusters;
  clusters.reserve(n);
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    const std::size_t end = std::min(n, begin + chunk);
    Tensor logits = this->logits(split.subset(begin, end).x, unused);
    const Tensor h = entropy_categorical(OneHotCategorical(logits));
    for (double v : h.data()) entropy += v;
    for (std::size_t k : argmax_rows(logits)) clusters.push_back(k);
  }
  e.cond_entropy = entropy / static_cast<double>(n);
  if (!split.labels.empty())
    e.cluster_acc = clustering_accuracy(contingency_table(clusters, split.labels, config.classes,
                                                          std::max(config.classes, split.classes)));
  return e;
}

GmvaeGeneration gmvae_generate(const GmvaeModel& nets, const Tensor& y, BatchRng& rng) {
  require_one_hot(y, "gmvae_generate");
  if (y.dim(1) != nets.config.classes) throw ShapeError("gmvae_generate: y " + shape_str(y.shape()));
  Tensor z = nets.prior(y).sample(rng);
  GmvaeGeneration g;
  g.probs = sigmoid(nets.decoder_logits(z, rng));
  g.samples = BernoulliVec(g.probs).sample(rng);
  return g;
}

}  // namespace aevb
