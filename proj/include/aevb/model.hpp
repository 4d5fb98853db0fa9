#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aevb/data.hpp"
#include "aevb/nn.hpp"

namespace aevb {

/// Metrics beyond the estimated ELBO that some models can report.
struct EvalExtras {
  std::optional<double> evidence;
  std::optional<double> cond_entropy;
  std::optional<double> cluster_acc;
};

/// A latent variable model with generative parameters theta and inference
/// parameters phi, trained by maximizing a per-example ELBO estimator.
class LatentModel {
 public:
  virtual ~LatentModel() = default;

  virtual std::string tag() const = 0;
  virtual std::vector<ParamRef> parameters() = 0;
  /// One stochastic ELBO estimate per example, shape [B].
  virtual Tensor per_example_elbo(const Batch& batch, BatchRng& rng, bool training) const = 0;
  virtual EvalExtras extras(const Dataset&) const { return {}; }
};

}  // namespace aevb
