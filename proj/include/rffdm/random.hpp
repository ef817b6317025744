#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <vector>

namespace rffdm {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; derives independent stream seeds from (base, index).
constexpr std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index) noexcept {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Circularly symmetric complex Gaussian, unit variance per complex sample.
inline std::vector<std::complex<double>> complex_gaussian(std::size_t n, Rng& rng) {
  std::normal_distribution<double> half(0.0, std::sqrt(0.5));
  std::vector<std::complex<double>> out(n);
  for (auto& v : out) {
    const double re = half(rng);
    const double im = half(rng);
    v = {re, im};
  }
  return out;
}

}  // namespace rffdm
