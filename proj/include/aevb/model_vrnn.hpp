#pragma once

#include "aevb/distributions.hpp"
#include "aevb/model.hpp"

namespace aevb {

struct VrnnConfig {
  std::size_t steps = 28;      // T
  std::size_t data_dim = 28;   // D per step
  std::size_t latent_dim = 2;  // L
  std::size_t state_dim = 64;  // H, LSTM width
  std::size_t hidden = 64;     // posterior and emission hidden width
};

struct VrnnState {
  Tensor h;  // [B, H]
  Tensor c;  // [B, H]
  std::size_t t = 1;
};

/// Sequences are stored flattened: step t occupies columns [t*D, (t+1)*D).
class VrnnModel : public LatentModel {
 public:
  VrnnConfig config;
  LstmCell cell;          // (x_{t-1} || z_{t-1}), state -> state
  Linear prior_mu;        // h -> mu
  Linear prior_sigma;     // h -> softplus pre-activation
  GaussianNet posterior;  // (x_t || h_t) -> z_t
  Mlp emission;           // (z_t || h_t) -> Bernoulli logits

  VrnnModel(const VrnnConfig& config, SeededRng& init);

  std::string tag() const override { return "vrnn"; }
  std::vector<ParamRef> parameters() override;
  Tensor per_example_elbo(const Batch& batch, BatchRng& rng, bool training) const override;

  DiagGaussian prior(const Tensor& h) const;
  DiagGaussian encode(const Tensor& x_t, const Tensor& h, BatchRng& rng) const;
  Tensor emission_logits(const Tensor& z, const Tensor& h, BatchRng& rng) const;
};

/// All-zero state for `batch` sequences at t = 1.
VrnnState vrnn_initial_state(const VrnnModel& nets, std::size_t batch);
VrnnState vrnn_step(const VrnnModel& nets, const VrnnState& state, const Tensor& x_prev, const Tensor& z_prev);

/// Sum over t of log p(x_t | z^s_t, h_t) - KL(q(z_t|x_t,h_t) || p(z_t|h_t)),
/// z^s_t reparametrized with fresh noise per step; [B].
Tensor vrnn_elbo_estimator(const VrnnModel& nets, const Tensor& x_seq, BatchRng& rng);

struct VrnnGeneration {
  Tensor probs;    // [n, T*D]
  Tensor samples;  // [n, T*D]
};
/// Ancestral sampling one step (row) at a time.
VrnnGeneration vrnn_generate(const VrnnModel& nets, std::size_t steps, std::size_t n, BatchRng& rng);

}  // namespace aevb
