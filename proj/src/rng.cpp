#include "aevb/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace aevb {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

void SeededRng::refill() {
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
      static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                            static_cast<std::uint32_t>(seed_ >> 32)};
  buffer_ = philox4x32_10(ctr, key);
  buffered_ = 4;
  ++block_;
}

std::uint64_t SeededRng::next_u64() {
  if (buffered_ < 2) refill();
  const std::uint64_t lo = buffer_[4 - buffered_];
  const std::uint64_t hi = buffer_[5 - buffered_];
  buffered_ -= 2;
  return (hi << 32) | lo;
}

double SeededRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform_open() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double SeededRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform_open();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

double SeededRng::gumbel() { return -std::log(-std::log(uniform_open())); }

std::uint64_t SeededRng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("SeededRng::below: n must be positive");
  // Rejection keeps the draw exactly uniform.
  const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % n;
}

SeededRng SeededRng::fork(std::uint64_t key) const {
  const std::uint64_t child = splitmix64(seed_ ^ splitmix64(stream_ ^ splitmix64(key)));
  return SeededRng(child, splitmix64(key + 0x632BE59BD9B4E019ull));
}

BatchRng::BatchRng(std::uint64_t seed) : BatchRng(SeededRng(seed)) {}

BatchRng::BatchRng(SeededRng rng) { streams_.push_back(rng); }

BatchRng BatchRng::per_example(const SeededRng& base, const std::vector<std::uint64_t>& ids) {
  if (ids.empty()) throw std::invalid_argument("BatchRng::per_example: empty id list");
  BatchRng out;
  out.shared_ = false;
  out.streams_.reserve(ids.size());
  for (auto id : ids) out.streams_.push_back(base.fork(id));
  return out;
}

SeededRng& BatchRng::row(std::size_t r) {
  return shared_ ? streams_.front() : streams_[r % streams_.size()];
}

}  // namespace aevb
