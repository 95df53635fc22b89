#pragma once

#include <cstdint>
#include <string>

#include "cfm/rng.hpp"

namespace cfm {

enum class NoiseFamily : std::uint8_t { normal, gamma, laplace, student_t, gumbel, mixture };
enum class NoiseKind : std::uint8_t { exogenous, endogenous };

std::string to_string(NoiseFamily family);

// Zero-mean noise with a fixed standard deviation. `mixture` draws one of the other five
// families with equal probability; each component is itself shifted to mean 0 and scaled to `std`.
struct NoiseSpec {
  NoiseFamily family = NoiseFamily::mixture;
  NoiseKind kind = NoiseKind::exogenous;
  double std = 1.0;
  // Hyperparameters of the Gamma the std was drawn from, kept for provenance.
  double std_mean = 1.0;
  double std_spread = 0.0;

  double draw(Rng& rng) const;
};

// std ~ Gamma(mean mu, std sigma); exogenous: mu ~ LogNormal(1, 1), sigma ~ U(0.1, 0.4);
// endogenous: mu ~ LogNormal(-3, 6), sigma ~ U(0, 0.5).
NoiseSpec sample_noise_spec(NoiseKind kind, std::uint64_t seed, NoiseFamily family = NoiseFamily::mixture);

// Shape/df of the non-Gaussian components.
inline constexpr double kGammaNoiseShape = 2.0;
inline constexpr double kStudentTDof = 5.0;

}  // namespace cfm
