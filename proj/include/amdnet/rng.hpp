#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace amdnet {

// Deterministic RNG wrapper. Distribution code is hand-rolled so that the
// stream does not depend on the standard library implementation.
class Rng {
 public:
  explicit Rng(uint64_t seed)
      : seed_(seed), eng_(seed ^ 0x9e3779b97f4a7c15ull) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  uint64_t uniform_int(uint64_t n) {
    if (n == 0) return 0;
    return next_u64() % n;
  }

  double normal(double mean = 0.0, double stddev = 1.0) {
    if (have_spare_) {
      have_spare_ = false;
      return mean + stddev * spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double k = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * k;
    have_spare_ = true;
    return mean + stddev * u * k;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Independent child stream derived from the constructor seed; calling this
  // does not advance or depend on the parent's sequence position.
  Rng stream(uint64_t id) const {
    uint64_t h = seed_ ^ (id * 0xbf58476d1ce4e5b9ull + 0x94d049bb133111ebull);
    h *= 0xff51afd7ed558ccdull;
    h ^= h >> 33;
    h *= 0xc4ceb9fe1a85ec53ull;
    h ^= h >> 33;
    return Rng(h);
  }

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace amdnet
