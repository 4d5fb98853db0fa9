#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace aevb {

/// Counter-based random source (Philox4x32-10). The stream is a pure function
/// of (seed, stream, counter), so identical seeds give identical samples on
/// every platform. Normal and Gumbel variates are derived in-house rather than
/// through <random> distributions, whose algorithms are implementation-defined.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed = 0, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on the open interval (0, 1).
  double uniform_open();
  /// Standard normal (Box-Muller, second variate cached).
  double normal();
  /// Standard Gumbel(0, 1).
  double gumbel();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Independent child stream keyed by `key`; does not advance this stream.
  SeededRng fork(std::uint64_t key) const;

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Per-row randomness for a batch. Row r of any tensor with a multiple of
/// `rows()` rows draws from stream `r % rows()`; in shared mode every row
/// draws from a single stream in row-major order.
///
/// Giving each example its own stream makes an example's noise independent of
/// batch composition: a batch holding the same example twice sees the same
/// noise twice, and evaluation noise is fixed per example.
class BatchRng {
 public:
  /// Single shared stream.
  explicit BatchRng(std::uint64_t seed);
  explicit BatchRng(SeededRng rng);
  /// One stream per example, derived from `base` and the example ids.
  static BatchRng per_example(const SeededRng& base, const std::vector<std::uint64_t>& ids);

  bool shared() const { return shared_; }
  std::size_t rows() const { return streams_.size(); }
  SeededRng& row(std::size_t r);

 private:
  BatchRng() = default;
  std::vector<SeededRng> streams_;
  bool shared_ = true;
};

}  // namespace aevb
