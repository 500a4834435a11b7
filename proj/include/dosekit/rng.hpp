#pragma once

// Counter-based random number streams. A stream is fully determined by the
// 64-bit keys passed at construction, so independent streams can be created
// per (seed, replicate) or (seed, draw) pair and consumed in parallel while
// keeping results identical to a serial run.

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "dosekit/stats.hpp"

namespace dosekit {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a;
  const std::uint64_t ha = detail::splitmix64(s);
  s = ha ^ (b + 0x9E3779B97F4A7C15ULL);
  return detail::splitmix64(s);
}

inline std::uint64_t hash_string(const char* s) {
  // FNV-1a, used to fold scenario names into stream keys.
  std::uint64_t h = 1469598103934665603ULL;
  for (; *s; ++s) h = (h ^ static_cast<unsigned char>(*s)) * 1099511628211ULL;
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t key) : state_(key) {
    // Burn-in decorrelates trivially related keys.
    detail::splitmix64(state_);
    detail::splitmix64(state_);
  }
  Rng(std::uint64_t key1, std::uint64_t key2) : Rng(hash_combine(key1, key2)) {}
  Rng(std::uint64_t key1, std::uint64_t key2, std::uint64_t key3)
      : Rng(hash_combine(hash_combine(key1, key2), key3)) {}

  std::uint64_t next_u64() { return detail::splitmix64(state_); }

  // Uniform on (0, 1), endpoints excluded.
  double uniform() {
    const std::uint64_t u = next_u64() >> 11;  // 53 bits
    return (static_cast<double>(u) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inverse-CDF normal draw: deterministic, one uniform per variate.
  double normal() { return norm_quantile(uniform()); }
  double normal(double mu, double sigma) { return mu + sigma * normal(); }

  double exponential(double mean) { return -mean * std::log(uniform()); }

  bool bernoulli(double p) { return uniform() < p; }

  // Marsaglia-Tsang for shape >= 1, boosted for shape < 1.
  double gamma(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0))
      throw std::invalid_argument("gamma: shape and scale must be positive");
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
    }
  }

  long poisson(double lambda) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("poisson: lambda must be >= 0");
    if (lambda < 30.0) {
      // Knuth multiplication.
      const double limit = std::exp(-lambda);
      long k = 0;
      double prod = uniform();
      while (prod > limit) {
        ++k;
        prod *= uniform();
      }
      return k;
    }
    // Split recursively; each half stays in the multiplication regime.
    const double half = std::floor(lambda / 2.0);
    return poisson(half) + poisson(lambda - half);
  }

  // Negative binomial with mean mu and overdispersion k:
  // Var(Y) = mu + mu^2 / k, drawn as a Gamma(k, mu/k) Poisson mixture.
  long negative_binomial(double mu, double k) {
    if (!(mu >= 0.0) || !(k > 0.0))
      throw std::invalid_argument("negative_binomial: need mu >= 0 and k > 0");
    if (mu == 0.0) return 0;
    return poisson(gamma(k, mu / k));
  }

  long binomial(long n, double p) {
    long s = 0;
    for (long i = 0; i < n; ++i) s += bernoulli(p) ? 1 : 0;
    return s;
  }

 private:
  std::uint64_t state_;
};

}  // namespace dosekit
