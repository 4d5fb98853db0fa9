#include "aevb/model_fa.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "aevb/errors.hpp"

namespace aevb {

Tensor fa_generate(const FaGenerative& theta, std::size_t n, SeededRng& rng) {
  const std::size_t d = theta.w.dim(0), l = theta.w.dim(1);
  Tensor sd = theta.noise_std().detach();
  Tensor out(Shape{n, d});
  auto o = out.mutable_data();
  std::vector<double> z(l);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : z) v = rng.normal();
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0.0;
      for (std::size_t k = 0; k < l; ++k) mean += theta.w.at(j, k) * z[k];
      o[i * d + j] = mean + sd[j] * rng.normal();
    }
  }
  return out;
}

FullGaussianCholesky fa_posterior(const FaAmortizedPosterior& phi, const Tensor& x) {
  return FullGaussianCholesky(matmul(x, transpose(phi.v)), phi.cov_decomp);
}

Tensor fa_elbo_estimator(const FaGenerative& theta, const FaAmortizedPosterior& phi, const Tensor& x,
                         BatchRng& rng) {
  FullGaussianCholesky q = fa_posterior(phi, x);
  Tensor z = q.rsample(rng);
  DiagGaussian likelihood(matmul(z, transpose(theta.w)), theta.noise_std() * Tensor(x.shape(), 1.0));
  return likelihood.log_prob(x) - kl_full_gaussian_vs_standard(q);
}

std::vector<double> fa_log_evidence(const FaGenerative& theta, const Tensor& xs) {
  const std::size_t d = theta.w.dim(0), l = theta.w.dim(1);
  Eigen::MatrixXd w(d, l);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k < l; ++k) w(i, k) = theta.w.at(i, k);
  Tensor sd = theta.noise_std().detach();
  Eigen::MatrixXd cov = w * w.transpose();
  for (std::size_t i = 0; i < d; ++i) cov(i, i) += sd[i] * sd[i];
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw DomainError("fa_exact_evidence: W W^T + Phi is not positive definite");
  const Eigen::MatrixXd lower = llt.matrixL();
  const double log_det = 2.0 * lower.diagonal().array().log().sum();
  const double base = -0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) + log_det);
  std::vector<double> out(xs.dim(0));
  Eigen::VectorXd x(d);
  for (std::size_t r = 0; r < out.size(); ++r) {
    for (std::size_t i = 0; i < d; ++i) x(i) = xs.at(r, i);
    out[r] = base - 0.5 * llt.matrixL().solve(x).squaredNorm();
  }
  return out;
}

double fa_exact_evidence(const FaGenerative& theta, const Tensor& xs) {
  const auto per = fa_log_evidence(theta, xs);
  double total = 0.0;
  for (double v : per) total += v;
  return total / static_cast<double>(per.size());
}

FaModel::FaModel(std::size_t data_dim, std::size_t latent_dim, SeededRng& init) {
  theta.w = normal_tensor({data_dim, latent_dim}, init);
  theta.pre_sigma = normal_tensor({data_dim}, init);
  phi.v = normal_tensor({latent_dim, data_dim}, init);
  phi.cov_decomp = Tensor(Shape{latent_dim, latent_dim});
  for (std::size_t j = 0; j < latent_dim; ++j) phi.cov_decomp.mutable_data()[j * latent_dim + j] = 1.0;
}

std::vector<ParamRef> FaModel::parameters() {
  return {{"W", Role::Theta, &theta.w},
          {"pre_sigma", Role::Theta, &theta.pre_sigma},
          {"V", Role::Phi, &phi.v},
          {"cov_decomp", Role::Phi, &phi.cov_decomp}};
}

Tensor FaModel::per_example_elbo(const Batch& batch, BatchRng& rng, bool) const {
  return fa_elbo_estimator(theta, phi, batch.x, rng);
}

EvalExtras FaModel::extras(const Dataset& split) const {
  EvalExtras e;
  e.evidence = fa_exact_evidence(theta, split.x);
  return e;
}

}  // namespace aevb
