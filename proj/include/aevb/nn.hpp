#pragma once

#include <string>
#include <vector>

#include "aevb/distributions.hpp"
#include "aevb/ops.hpp"
#include "aevb/rng.hpp"

namespace aevb {

enum class Role { Theta, Phi };

const char* role_name(Role role);

/// A named trainable tensor owned by a model.
struct ParamRef {
  std::string name;
  Role role;
  Tensor* tensor;
};

/// Glorot-normal weights: N(0, 2 / (fan_in + fan_out)).
Tensor glorot_normal(std::size_t fan_in, std::size_t fan_out, SeededRng& rng);
Tensor normal_tensor(Shape shape, SeededRng& rng, double scale = 1.0);

/// y = x W + b with W [in, out].
struct Linear {
  Tensor w;
  Tensor b;

  Linear() = default;
  Linear(std::size_t in, std::size_t out, SeededRng& rng);

  std::size_t in() const { return w.dim(0); }
  std::size_t out() const { return w.dim(1); }
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, Role role, std::vector<ParamRef>& out);
};

/// Rectifier MLP with optional dropout after every hidden layer. The last
/// layer is linear.
struct Mlp {
  std::vector<Linear> layers;
  double dropout = 0.0;

  Mlp() = default;
  Mlp(const std::vector<std::size_t>& widths, double dropout, SeededRng& rng);

  /// Hidden representation before the final layer.
  Tensor trunk(const Tensor& x, BatchRng& rng, bool training) const;
  Tensor operator()(const Tensor& x, BatchRng& rng, bool training) const;
  void collect(const std::string& prefix, Role role, std::vector<ParamRef>& out);
};

/// Rectifier trunk followed by a linear mean head and a softplus std-dev
/// head, giving a diagonal Gaussian.
struct GaussianNet {
  std::vector<Linear> trunk;
  Linear mu;
  Linear sigma;
  double dropout = 0.0;

  GaussianNet() = default;
  /// `widths` = {input, hidden...}; at least one hidden layer.
  GaussianNet(const std::vector<std::size_t>& widths, std::size_t latent, double dropout, SeededRng& rng);

  DiagGaussian operator()(const Tensor& x, BatchRng& rng, bool training) const;
  /// Same network given the first layer's pre-activation.
  DiagGaussian from_first(const Tensor& pre, BatchRng& rng, bool training) const;
  void collect(const std::string& prefix, Role role, std::vector<ParamRef>& out);
};

/// LSTM cell: gates = u Wi + h Wh + b, split as input, forget, cell, output.
struct LstmCell {
  Tensor wi;
  Tensor wh;
  Tensor b;

  LstmCell() = default;
  LstmCell(std::size_t input, std::size_t hidden, SeededRng& rng);

  std::size_t hidden() const { return wh.dim(0); }
  /// Returns (h, c).
  std::pair<Tensor, Tensor> operator()(const Tensor& u, const Tensor& h, const Tensor& c) const;
  void collect(const std::string& prefix, Role role, std::vector<ParamRef>& out);
};

}  // namespace aevb
