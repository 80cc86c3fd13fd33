#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>

namespace occest {

// splitmix64 step, used to derive independent seeds from a base seed plus
// stream identifiers. Parallel loops derive one seed per work item so results
// do not depend on thread count or scheduling.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b) { return splitmix64(a ^ splitmix64(b)); }
inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c) { return mix_seed(mix_seed(a, b), c); }
inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c, uint64_t d) {
  return mix_seed(mix_seed(a, b, c), d);
}

// Deterministic random source. All variate transforms are implemented by hand
// on top of mt19937_64 so streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // integer in {0, ..., n-1}
  int uniform_int(int n) {
    // rejection-free modulo is fine here; n is tiny compared to 2^64
    return static_cast<int>(eng_() % static_cast<uint64_t>(n));
  }

  double exponential() { return -std::log1p(-uniform()); }

  double normal() {
    // Box-Muller, no caching so the stream layout stays obvious
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  // Draw from a finite distribution given as a (not necessarily normalized)
  // nonnegative vector of masses.
  template <typename Derived>
  int categorical(const Eigen::MatrixBase<Derived>& masses) {
    const double total = masses.sum();
    double u = uniform() * total;
    int last_positive = 0;
    for (int i = 0; i < masses.size(); ++i) {
      const double m = masses(i);
      if (m > 0) last_positive = i;
      u -= m;
      if (u < 0 && m > 0) return i;
    }
    return last_positive;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace occest
