#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aevb/rng.hpp"
#include "aevb/tensor.hpp"

namespace aevb {

enum class Preprocessing { Raw, Continuous, Normalized, Binarized, RowSequence };

const char* preprocessing_name(Preprocessing p);

/// One mini-batch: inputs, optional one-hot labels, and dataset row ids
/// (used to key per-example noise streams).
struct Batch {
  Tensor x;
  Tensor y;  // [B, C] one-hot, or rank-0 when the dataset has no labels
  std::vector<std::uint64_t> ids;

  std::size_t size() const { return ids.size(); }
  bool has_labels() const { return y.rank() == 2; }
};

/// Examples are the rows of `x`. Images are flattened row-major; row
/// sequences keep the same layout with T = image_rows and D = image_cols.
struct Dataset {
  Tensor x;
  std::vector<int> labels;
  std::size_t classes = 0;
  Preprocessing tag = Preprocessing::Continuous;
  std::size_t image_rows = 0;
  std::size_t image_cols = 0;

  std::size_t size() const { return x.rank() == 2 ? x.dim(0) : 0; }
  std::size_t dim() const { return x.rank() == 2 ? x.dim(1) : 0; }
  Batch batch(const std::vector<std::uint64_t>& ids) const;
  Dataset subset(std::size_t begin, std::size_t end) const;
};

// ---- synthetic factor analysis data

struct FaSyntheticSpec {
  std::size_t n = 1000;
  std::size_t latent_dim = 2;
  std::size_t data_dim = 3;
  std::uint64_t seed = 0;
  /// Fixed ground truth instead of the random draw.
  std::optional<Tensor> true_w;           // [D, L]
  std::optional<Tensor> true_noise_std;   // [D], positive
};

struct FaSynthetic {
  Dataset train;
  Dataset test;
  Tensor true_w;          // [D, L]
  Tensor true_noise_std;  // [D]
  Tensor train_mean;      // subtracted from both splits
  /// Mean exact log evidence of the generating model on the (de-meaned) test split.
  double true_test_evidence = 0.0;
};

/// Ground truth W ~ N(0, 1), noise std = softplus(N(0, 1)); train and test
/// drawn from separate streams, then both de-meaned with the train mean.
FaSynthetic generate_fa_synthetic(const FaSyntheticSpec& spec);

// ---- MNIST

/// Reads IDX image and label files (gzip-compressed or plain). Pixels are
/// returned as raw 0-255 reals.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// (pixel + u) / 256 with u ~ U[0, 1), drawn once from `rng`.
Dataset normalize(const Dataset& raw, SeededRng& rng);
/// pixel > 127.5 -> 1, else 0.
Dataset binarize(const Dataset& raw);
/// Reinterprets binarized 28x28 images as 28 steps of 28 pixels.
Dataset to_row_sequences(const Dataset& binarized);

}  // namespace aevb
