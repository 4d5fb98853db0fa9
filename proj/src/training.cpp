#include "aevb/training.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <numeric>

#include "aevb/errors.hpp"
#include "aevb/tape.hpp"

namespace aevb {

void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state) {
  if (params.size() != grads.size())
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " params vs " + std::to_string(grads.size()) +
                     " grads");
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: parameter count changed between steps");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i]->shape() != grads[i].shape() || state.m[i].shape() != grads[i].shape())
      throw ShapeError("adam_step: parameter " + std::to_string(i) + " " + shape_str(params[i]->shape()) +
                       " vs gradient " + shape_str(grads[i].shape()));

  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(c.beta1, t);
  const double correct2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->mutable_data();
    auto m = state.m[i].mutable_data();
    auto v = state.v[i].mutable_data();
    auto g = grads[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
      p[k] -= c.lr * (m[k] / correct1) / (std::sqrt(v[k] / correct2) + c.eps);
    }
  }
}

Phase TrainSchedule::phase_at(std::size_t step) const {
  const std::size_t index = (step - 1) / phase_length;
  const bool first = index % 2 == 0;
  return first ? start : (start == Phase::E ? Phase::M : Phase::E);
}

bool TrainSchedule::updates(Role role, std::size_t step) const {
  if (mode == ScheduleMode::Joint) return true;
  return (phase_at(step) == Phase::E) == (role == Role::Phi);
}

// ---- metrics

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

}  // namespace

std::string MetricsLog::csv_header() { return "step,split,elbo,evidence,cond_entropy,cluster_acc"; }

std::string MetricsLog::csv_line(const MetricsRow& r) {
  return std::to_string(r.step) + "," + r.split + "," + fmt(r.elbo) + "," + opt(r.extras.evidence) + "," +
         opt(r.extras.cond_entropy) + "," + opt(r.extras.cluster_acc);
}

std::string MetricsLog::to_csv() const {
  std::string out = csv_header() + "\n";
  for (const auto& r : rows) out += csv_line(r) + "\n";
  return out;
}

// ---- evaluation

std::vector<double> evaluate_per_example(const LatentModel& model, const Dataset& split, std::uint64_t eval_seed,
                                         std::size_t draws) {
  if (split.size() == 0) throw DomainError("evaluate: empty split");
  if (draws == 0) throw DomainError("evaluate: draws must be positive");
  const SeededRng root(eval_seed);
  const std::size_t n = split.size(), chunk = 500;
  std::vector<double> out(n, 0.0);
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    std::vector<std::uint64_t> ids(std::min(chunk, n - begin));
    std::iota(ids.begin(), ids.end(), begin);
    const Batch batch = split.batch(ids);
    for (std::size_t k = 0; k < draws; ++k) {
      BatchRng rng = BatchRng::per_example(k == 0 ? root : root.fork(k), ids);
      Tensor elbo = model.per_example_elbo(batch, rng, false);
      for (std::size_t i = 0; i < ids.size(); ++i) out[begin + i] += elbo[i] / static_cast<double>(draws);
    }
  }
  return out;
}

MetricsRow evaluate(const LatentModel& model, const Dataset& split, std::uint64_t eval_seed, std::size_t draws,
                    const std::string& split_name) {
  const auto values = evaluate_per_example(model, split, eval_seed, draws);
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  MetricsRow row;
  row.split = split_name;
  row.elbo = mean;
  row.elbo_se = values.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
  row.extras = model.extras(split);
  return row;
}

// ---- training

double gradient_step(LatentModel& model, const Batch& batch, BatchRng& rng, bool update_theta, bool update_phi,
                     AdamState& theta, AdamState& phi) {
  auto params = model.parameters();
  Tape tape;
  Tape::Scope scope(tape);
  for (auto& p : params) tape.watch(*p.tensor);
  Tensor loss = -mean(model.per_example_elbo(batch, rng, true));
  const double value = loss.item();
  if (!std::isfinite(value)) return value;
  Gradients grads = tape.backward(loss);
  for (Role role : {Role::Theta, Role::Phi}) {
    if (!(role == Role::Theta ? update_theta : update_phi)) continue;
    std::vector<Tensor*> ptrs;
    std::vector<Tensor> gs;
    for (auto& p : params) {
      if (p.role != role) continue;
      ptrs.push_back(p.tensor);
      gs.push_back(grads.of(*p.tensor));
    }
    adam_step(ptrs, gs, role == Role::Theta ? theta : phi);
  }
  return value;
}

std::uint64_t parameter_checksum(LatentModel& model, Role role) {
  std::uint64_t h = 1469598103934665603ull;
  for (auto& p : model.parameters()) {
    if (p.role != role) continue;
    for (double v : p.tensor->data()) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof v);
      for (unsigned char b : bytes) h = (h ^ b) * 1099511628211ull;
    }
  }
  return h;
}

TrainResult train(LatentModel& model, const Dataset& train_split, const Dataset& eval_split,
                  const TrainSchedule& schedule, const StepCallback& on_step) {
  if (train_split.size() == 0) throw DomainError("train: empty training set");
  if (schedule.batch_size == 0) throw DomainError("train: batch_size must be positive");
  if (schedule.phase_length == 0) throw DomainError("train: phase_length must be positive");
  if (schedule.eval_every == 0) throw DomainError("train: eval_every must be positive");

  TrainResult result;
  result.theta.config.lr = schedule.lr;
  result.phi.config.lr = schedule.lr;
  const SeededRng root(schedule.seed);
  SeededRng shuffle = root.fork(1);
  const SeededRng noise = root.fork(2);

  const std::size_t n = train_split.size();
  const std::size_t per_batch = std::min(schedule.batch_size, n);
  std::vector<std::uint64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = n;  // forces a shuffle before the first batch

  double best = -std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  auto log_eval = [&](std::size_t step) {
    MetricsRow row = evaluate(model, eval_split, schedule.eval_seed, schedule.eval_draws);
    row.step = step;
    result.log.rows.push_back(row);
    if (row.elbo > best) {
      best = row.elbo;
      stale = 0;
    } else {
      ++stale;
    }
  };

  log_eval(0);
  for (std::size_t step = 1; step <= schedule.total_steps; ++step) {
    if (cursor + per_batch > n) {
      for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[shuffle.below(i + 1)]);
      cursor = 0;
    }
    std::vector<std::uint64_t> ids(order.begin() + cursor, order.begin() + cursor + per_batch);
    cursor += per_batch;
    BatchRng rng = BatchRng::per_example(noise.fork(step), ids);
    const double loss = gradient_step(model, train_split.batch(ids), rng, schedule.updates(Role::Theta, step),
                                      schedule.updates(Role::Phi, step), result.theta, result.phi);
    if (!std::isfinite(loss))
      throw DivergenceError("train: non-finite loss at step " + std::to_string(step), step);
    result.steps_done = step;
    if (on_step) on_step(step, model);
    if (step % schedule.eval_every == 0 || step == schedule.total_steps) {
      log_eval(step);
      if (schedule.patience > 0 && stale >= schedule.patience) {
        result.early_stopped = true;
        break;
      }
    }
  }
  return result;
}

}  // namespace aevb
