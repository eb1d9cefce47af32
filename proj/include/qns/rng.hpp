#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace qns {

// SplitMix64 finalizer: a well-mixed 64-bit bijection (public-domain
// construction). Used both as the output function of CounterRng and to fold
// stream identifiers into derived keys.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// Counter-based random stream: draw i is mix64(key + i*phi64). Streams with
// distinct keys are statistically independent, and a stream's draws depend
// only on (key, draw index) -- never on scheduling -- which is what makes
// simulation results reproducible under any parallel decomposition.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  // Folds stream identifiers (sequence index, trajectory index, ...) into a
  // seed one at a time; any two distinct id lists give unrelated keys.
  static std::uint64_t derive_key(std::uint64_t seed,
                                  std::initializer_list<std::uint64_t> ids) {
    std::uint64_t key = mix64(seed + kPhi64);
    for (std::uint64_t id : ids) key = mix64(key ^ mix64(id + kPhi64));
    return key;
  }

  std::uint64_t next_u64() noexcept { return mix64(key_ + ++counter_ * kPhi64); }

  // Uniform on (0, 1): top 53 bits plus a half-ulp offset, so 0 and 1 are
  // both unreachable (log() below stays finite).
  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() noexcept {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double theta = 2.0 * 3.14159265358979323846 * uniform();
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Binomial(n, p) as an explicit sum of Bernoulli draws: exact, and the
  // stream advances by exactly n draws regardless of outcome.
  std::uint64_t binomial(std::uint64_t n, double p) noexcept {
    std::uint64_t successes = 0;
    for (std::uint64_t i = 0; i < n; ++i) successes += (uniform() < p) ? 1 : 0;
    return successes;
  }

 private:
  static constexpr std::uint64_t kPhi64 = 0x9e3779b97f4a7c15ULL;

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace qns
