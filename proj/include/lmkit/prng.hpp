#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace lmkit {

// Counter-based generator: output i of a given seed is a pure function of
// (seed, i), so the full state serializes as two integers.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0, uint64_t counter = 0) : seed_(seed), counter_(counter) {}

  uint64_t seed() const { return seed_; }
  uint64_t counter() const { return counter_; }
  void restore(uint64_t seed, uint64_t counter) {
    seed_ = seed;
    counter_ = counter;
  }

  uint64_t next_u64() {
    uint64_t z = seed_ + 0x9E3779B97F4A7C15ULL * ++counter_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller, one draw per call (the pair's second half is discarded so the
  // counter advances deterministically).
  double normal() {
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  uint64_t below(uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below(0)");
    return next_u64() % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // index sampled from an (unnormalized is fine) discrete distribution via its
  // cumulative sums
  long sample_cdf(const std::vector<double>& cdf) {
    double u = uniform() * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    long i = static_cast<long>(it - cdf.begin());
    if (i >= static_cast<long>(cdf.size())) i = static_cast<long>(cdf.size()) - 1;
    return i;
  }

 private:
  uint64_t seed_;
  uint64_t counter_;
};

}  // namespace lmkit
