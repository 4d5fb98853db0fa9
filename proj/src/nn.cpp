#include "aevb/nn.hpp"

#include <cmath>

#include "aevb/errors.hpp"

namespace aevb {

const char* role_name(Role role) { return role == Role::Theta ? "theta" : "phi"; }

Tensor normal_tensor(Shape shape, SeededRng& rng, double scale) {
  Tensor t(std::move(shape));
  for (double& v : t.mutable_data()) v = scale * rng.normal();
  return t;
}

Tensor glorot_normal(std::size_t fan_in, std::size_t fan_out, SeededRng& rng) {
  return normal_tensor({fan_in, fan_out}, rng, std::sqrt(2.0 / static_cast<double>(fan_in + fan_out)));
}

Linear::Linear(std::size_t in, std::size_t out, SeededRng& rng)
    : w(glorot_normal(in, out, rng)), b(Shape{out}) {}

Tensor Linear::operator()(const Tensor& x) const { return matmul(x, w) + b; }

void Linear::collect(const std::string& prefix, Role role, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".w", role, &w});
  out.push_back({prefix + ".b", role, &b});
}

Mlp::Mlp(const std::vector<std::size_t>& widths, double rate, SeededRng& rng) : dropout(rate) {
  if (widths.size() < 2) throw ShapeError("Mlp: need at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) layers.emplace_back(widths[i], widths[i + 1], rng);
}

Tensor Mlp::trunk(const Tensor& x, BatchRng& rng, bool training) const {
  Tensor h = x;
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    h = relu(layers[i](h));
    if (training) h = aevb::dropout(h, dropout, rng);
  }
  return h;
}

Tensor Mlp::operator()(const Tensor& x, BatchRng& rng, bool training) const {
  return layers.back()(trunk(x, rng, training));
}

void Mlp::collect(const std::string& prefix, Role role, std::vector<ParamRef>& out) {
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(prefix + "." + std::to_string(i), role, out);
}

GaussianNet::GaussianNet(const std::vector<std::size_t>& widths, std::size_t latent, double rate,
                         SeededRng& rng)
    : dropout(rate) {
  if (widths.size() < 2) throw ShapeError("GaussianNet: need an input and at least one hidden width");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) trunk.emplace_back(widths[i], widths[i + 1], rng);
  mu = Linear(widths.back(), latent, rng);
  sigma = Linear(widths.back(), latent, rng);
}

DiagGaussian GaussianNet::from_first(const Tensor& pre, BatchRng& rng, bool training) const {
  Tensor h = relu(pre);
  if (training) h = aevb::dropout(h, dropout, rng);
  for (std::size_t i = 1; i < trunk.size(); ++i) {
    h = relu(trunk[i](h));
    if (training) h = aevb::dropout(h, dropout, rng);
  }
  return DiagGaussian(mu(h), softplus(sigma(h)));
}

DiagGaussian GaussianNet::operator()(const Tensor& x, BatchRng& rng, bool training) const {
  return from_first(trunk.front()(x), rng, training);
}

void GaussianNet::collect(const std::string& prefix, Role role, std::vector<ParamRef>& out) {
  for (std::size_t i = 0; i < trunk.size(); ++i) trunk[i].collect(prefix + ".trunk" + std::to_string(i), role, out);
  mu.collect(prefix + ".mu", role, out);
  sigma.collect(prefix + ".sigma", role, out);
}

LstmCell::LstmCell(std::size_t input, std::size_t hidden, SeededRng& rng)
    : wi(glorot_normal(input, 4 * hidden, rng)), wh(glorot_normal(hidden, 4 * hidden, rng)), b(Shape{4 * hidden}) {}

std::pair<Tensor, Tensor> LstmCell::operator()(const Tensor& u, const Tensor& h, const Tensor& c) const {
  const std::size_t n = hidden();
  if (u.rank() != 2 || u.dim(1) != wi.dim(0) || h.shape() != Shape{u.dim(0), n} || c.shape() != h.shape())
    throw ShapeError("lstm: input " + shape_str(u.shape()) + ", state " + shape_str(h.shape()) + " / " +
                     shape_str(c.shape()) + " do not match cell " + shape_str(wi.shape()));
  Tensor gates = matmul(u, wi) + matmul(h, wh) + b;
  Tensor i = sigmoid(slice(gates, 1, 0, n));
  Tensor f = sigmoid(slice(gates, 1, n, 2 * n));
  Tensor g = tanh(slice(gates, 1, 2 * n, 3 * n));
  Tensor o = sigmoid(slice(gates, 1, 3 * n, 4 * n));
  Tensor c_next = f * c + i * g;
  return {o * tanh(c_next), c_next};
}

void LstmCell::collect(const std::string& prefix, Role role, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".wi", role, &wi});
  out.push_back({prefix + ".wh", role, &wh});
  out.push_back({prefix + ".b", role, &b});
}

}  // namespace aevb
