#ifndef TRUSTERM_RNG_HPP
#define TRUSTERM_RNG_HPP

#include <cmath>
#include <cstdint>
#include <vector>

namespace trusterm {

// SplitMix64 generator. Hand-rolled so that seeded draws are reproducible
// across standard libraries and platforms (std::*_distribution sequences are
// implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Laplace(0, scale) via inverse CDF.
  double laplace(double scale) {
    const double u = uniform01() - 0.5;
    const double sign = u < 0.0 ? -1.0 : 1.0;
    return -scale * sign * std::log1p(-2.0 * std::fabs(u));
  }

  // Gamma(shape, 1) for shape >= 1, Marsaglia-Tsang squeeze method.
  double gamma(double shape) {
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = uniform01();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Van der Corput radical inverse, the building block of Halton sequences.
inline double radical_inverse(std::uint64_t index, std::uint64_t base) {
  double inv_base = 1.0 / static_cast<double>(base);
  double factor = inv_base;
  double value = 0.0;
  while (index > 0) {
    value += static_cast<double>(index % base) * factor;
    index /= base;
    factor *= inv_base;
  }
  return value;
}

// Acklam's rational approximation to the standard normal inverse CDF
// (relative error below 1.2e-9, refined by one Halley step).
double inverse_normal_cdf(double p);

}  // namespace trusterm

#endif  // TRUSTERM_RNG_HPP
