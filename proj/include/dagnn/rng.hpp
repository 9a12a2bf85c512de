#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace dagnn::num {

// Counter-based generator (SplitMix64 on a Weyl sequence). A given
// (seed, stream) pair produces the same sequence on every platform; all
// derived distributions below are hand-rolled so they stay pinned too.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : state_(mix(seed + 0x43f6a8885a308d31ULL) ^
               mix(stream + 0x9e3779b97f4a7c15ULL)) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  // uniform in [0, 1), 53 bits of mantissa
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller; two raw draws per sample, no caching
  double normal() {
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0,1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  // unbiased integer in [0, n) by rejection
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be > 0");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // inclusive range
  int uniform_int(int lo, int hi) {
    if (hi < lo) throw std::invalid_argument("Rng::uniform_int: empty range");
    return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  bool coin(double p) { return uniform() < p; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

// Stream ids for the fixed consumers of a run seed. Pinned so that adding a
// consumer never shifts the draws of another.
namespace stream {
inline constexpr std::uint64_t kParamInit = 1;
inline constexpr std::uint64_t kShuffle = 2;
inline constexpr std::uint64_t kRff = 3;
inline constexpr std::uint64_t kSpectralNorm = 4;
}  // namespace stream

}  // namespace dagnn::num
