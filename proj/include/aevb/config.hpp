#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace aevb {

/// Everything a run needs. Serialized as flat `key = value` lines; every
/// key is always written so a resolved config reproduces the run.
struct RunConfig {
  // model
  std::string model = "fa";  // fa | vae | cvae | gmvae | vrnn
  std::string estimator = "marginalized";
  std::size_t latent_dim = 2;
  std::size_t classes = 10;
  std::size_t hidden = 500;
  std::size_t state_dim = 64;
  double dropout = 0.0;
  double tau = 0.5;

  // data
  std::string data = "synthetic";  // synthetic | mnist
  std::string data_dir;            // empty: bundled MNIST
  std::string preprocessing = "continuous";
  std::string binarization = "threshold";  // pixel > 127.5
  std::size_t train_size = 0;  // 0: all
  std::size_t test_size = 0;
  std::size_t data_dim = 3;  // synthetic only
  std::size_t synthetic_n = 1000;
  std::uint64_t data_seed = 1000;

  // training
  std::optional<std::uint64_t> seed;
  std::string schedule = "joint";  // joint | alternating
  std::size_t phase_length = 1000;
  std::string start_phase = "E";
  std::size_t steps = 5000;
  std::size_t batch_size = 32;
  double lr = 1e-2;
  std::size_t eval_every = 100;
  std::uint64_t eval_seed = 1;
  std::size_t eval_draws = 1;
  std::size_t patience = 0;

  /// Defaults for one model family.
  static RunConfig defaults(const std::string& model);

  /// Applies one `key = value` assignment. FormatError names the key.
  void set(const std::string& key, const std::string& value);
  /// Field-level checks; throws FormatError on the first problem.
  void validate() const;

  std::string to_text() const;
  static std::vector<std::string> keys();
};

/// Parses `key = value` lines ('#' starts a comment). Keys are applied on
/// top of `base`, or on top of the model's defaults when `base` is empty.
RunConfig parse_config(const std::string& text, const std::optional<RunConfig>& base = std::nullopt);
RunConfig load_config_file(const std::string& path, const std::optional<RunConfig>& base = std::nullopt);

struct Preset {
  std::string name;
  std::string description;
  RunConfig config;
};

const std::vector<Preset>& presets();
const Preset& find_preset(const std::string& name);

/// The preprocessing each model family trains on.
std::string expected_preprocessing(const std::string& model);

}  // namespace aevb
