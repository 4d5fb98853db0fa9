#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aevb/config.hpp"
#include "aevb/data.hpp"
#include "aevb/model.hpp"
#include "aevb/training.hpp"

namespace aevb {

// ---- checkpoints
//
// "AEVBCKPT" | u32 version | str tag | str config | u64 step | u32 count |
// count x (str name | u32 rank | rank x u64 dim | numel x f64)
// All integers and reals little-endian; str = u32 length + bytes.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string tag;
  std::string config_text;
  std::uint64_t step = 0;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint make_checkpoint(LatentModel& model, const RunConfig& config, std::uint64_t step);
/// Copies every named tensor into the model; names and shapes must match.
void restore_parameters(LatentModel& model, const Checkpoint& ckpt);

// ---- runs

struct RunData {
  Dataset train;
  Dataset test;
  std::optional<FaSynthetic> fa;
};

RunData load_run_data(const RunConfig& config);
/// Fresh parameters drawn from SeededRng(seed).fork(0).
std::unique_ptr<LatentModel> build_model(const RunConfig& config);

struct LoadedRun {
  RunConfig config;
  std::unique_ptr<LatentModel> model;
  std::uint64_t step = 0;
};
LoadedRun load_run(const std::string& checkpoint_path);

struct TrainRun {
  RunData data;
  std::unique_ptr<LatentModel> model;
  TrainResult result;
};

/// Trains and, when out_dir is non-empty, writes config.txt (resolved),
/// metrics.csv and checkpoint.bin there.
TrainRun run_train(const RunConfig& config, const std::string& out_dir, const StepCallback& on_step = {});

/// Evaluates a checkpoint on its test split. `data` (if given) replaces the
/// data fields of the stored config; its model/preprocessing must agree with
/// the checkpoint. Writes eval.csv when out_dir is non-empty.
MetricsRow run_eval(const std::string& checkpoint_path, const std::optional<RunConfig>& data,
                    const std::string& out_dir);

struct GenerateResult {
  std::string mode;
  std::size_t rows = 0;
  std::size_t cols = 0;
  Tensor params;   // [rows*cols, D]
  Tensor samples;  // [rows*cols, D]
  std::vector<int> groups;
};

/// Modes: unconditional (vae), per_label (cvae), per_cluster (gmvae),
/// sequential (vrnn). Writes generated.pgm and generated.csv.
GenerateResult run_generate(const std::string& checkpoint_path, const std::string& mode, std::size_t n,
                            std::uint64_t seed, const std::string& out_dir);
std::string default_generate_mode(const std::string& model);

/// Encoder means on the test split, one row per image: dim_0..dim_{L-1},label.
Tensor run_export_latents(const std::string& checkpoint_path, const std::optional<RunConfig>& data,
                          const std::string& out_path);

/// Binary PGM of a grid of rows x cols square-ish tiles.
std::string encode_pgm(const Tensor& images, std::size_t rows, std::size_t cols, std::size_t tile_h,
                       std::size_t tile_w);

}  // namespace aevb
