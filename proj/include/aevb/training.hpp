#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "aevb/model.hpp"

namespace aevb {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam descent step on `params` (moments allocated on
/// first use).
void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state);

enum class ScheduleMode { Joint, Alternating };
enum class Phase { E, M };

struct TrainSchedule {
  ScheduleMode mode = ScheduleMode::Joint;
  std::size_t phase_length = 1000;
  Phase start = Phase::E;
  std::size_t total_steps = 1000;
  std::size_t batch_size = 32;
  std::size_t eval_every = 100;
  std::uint64_t seed = 0;
  std::uint64_t eval_seed = 1;
  /// Noise draws averaged per example at evaluation.
  std::size_t eval_draws = 1;
  double lr = 1e-3;
  /// Stop after this many evaluations without a new best ELBO; 0 disables.
  std::size_t patience = 0;

  /// Phase of 1-based step `step` (alternating mode only).
  Phase phase_at(std::size_t step) const;
  bool updates(Role role, std::size_t step) const;
};

struct MetricsRow {
  std::size_t step = 0;
  std::string split;
  double elbo = 0.0;
  double elbo_se = 0.0;  // standard error of the per-example mean, not serialized
  EvalExtras extras;
};

struct MetricsLog {
  std::vector<MetricsRow> rows;

  static std::string csv_header();
  static std::string csv_line(const MetricsRow& row);
  std::string to_csv() const;
};

/// Mean per-example ELBO over `split`, each example's estimate averaged over
/// `draws` noise draws from streams keyed by (eval_seed, draw, example id);
/// dropout off.
MetricsRow evaluate(const LatentModel& model, const Dataset& split, std::uint64_t eval_seed,
                    std::size_t draws = 1, const std::string& split_name = "test");

/// Per-example ELBO values behind evaluate().
std::vector<double> evaluate_per_example(const LatentModel& model, const Dataset& split, std::uint64_t eval_seed,
                                         std::size_t draws = 1);

/// Loss = -mean ELBO over the batch; updates the enabled parameter sets.
/// Returns the loss.
double gradient_step(LatentModel& model, const Batch& batch, BatchRng& rng, bool update_theta, bool update_phi,
                     AdamState& theta, AdamState& phi);

/// Called after every optimizer step with the 1-based step index.
using StepCallback = std::function<void(std::size_t step, LatentModel& model)>;

struct TrainResult {
  MetricsLog log;
  std::size_t steps_done = 0;
  bool early_stopped = false;
  AdamState theta;
  AdamState phi;
};

/// Mini-batch stochastic ELBO ascent. Evaluates on `eval_split` at step 0,
/// every eval_every steps, and after the last step.
TrainResult train(LatentModel& model, const Dataset& train_split, const Dataset& eval_split,
                  const TrainSchedule& schedule, const StepCallback& on_step = {});

/// FNV-1a hash over the bytes of every parameter of one role.
std::uint64_t parameter_checksum(LatentModel& model, Role role);

}  // namespace aevb
