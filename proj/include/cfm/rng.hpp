#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace cfm {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Named substream of a root seed: seeds for different purposes never collide
// even when indices coincide.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view stream,
                                    std::uint64_t index = 0) {
  return splitmix64(splitmix64(root ^ fnv1a(stream)) + splitmix64(index + 0x5851F42D4C957F2DULL));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(splitmix64(seed)); }

inline double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

inline double gamma_shape_scale(Rng& rng, double shape, double scale) {
  return std::gamma_distribution<double>(shape, scale)(rng);
}

// Gamma parameterised by its mean and standard deviation.
inline double gamma_mean_std(Rng& rng, double mean, double std) {
  constexpr double kMinStd = 1e-6;
  std = std::max(std, kMinStd * mean);
  const double shape = (mean * mean) / (std * std);
  const double scale = (std * std) / mean;
  return gamma_shape_scale(rng, shape, scale);
}

inline double beta(Rng& rng, double a, double b) {
  const double x = gamma_shape_scale(rng, a, 1.0);
  const double y = gamma_shape_scale(rng, b, 1.0);
  return x / (x + y);
}

inline double lognormal(Rng& rng, double mu, double sigma) {
  return std::lognormal_distribution<double>(mu, sigma)(rng);
}

inline std::size_t categorical(Rng& rng, const std::vector<double>& weights) {
  std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
  return dist(rng);
}

inline bool bernoulli(Rng& rng, double p) { return uniform(rng) < p; }

}  // namespace cfm
