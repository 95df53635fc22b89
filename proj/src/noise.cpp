#include "cfm/noise.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "cfm/common.hpp"

namespace cfm {

std::string to_string(NoiseFamily family) {
  switch (family) {
    case NoiseFamily::normal: return "normal";
    case NoiseFamily::gamma: return "gamma";
    case NoiseFamily::laplace: return "laplace";
    case NoiseFamily::student_t: return "student_t";
    case NoiseFamily::gumbel: return "gumbel";
    case NoiseFamily::mixture: return "mixture";
  }
  return "mixture";
}

namespace {

double draw_component(NoiseFamily family, double s, Rng& rng) {
  switch (family) {
    case NoiseFamily::normal: return s * standard_normal(rng);
    case NoiseFamily::gamma: {
      const double theta = s / std::sqrt(kGammaNoiseShape);
      return gamma_shape_scale(rng, kGammaNoiseShape, theta) - kGammaNoiseShape * theta;
    }
    case NoiseFamily::laplace: {
      const double b = s / std::numbers::sqrt2;
      const double u = uniform(rng, -0.5, 0.5);
      return -b * std::copysign(1.0, u) * std::log1p(-2.0 * std::abs(u));
    }
    case NoiseFamily::student_t: {
      const double scale = s / std::sqrt(kStudentTDof / (kStudentTDof - 2.0));
      return scale * std::student_t_distribution<double>(kStudentTDof)(rng);
    }
    case NoiseFamily::gumbel: {
      const double beta = s * std::sqrt(6.0) / std::numbers::pi;
      return std::extreme_value_distribution<double>(0.0, beta)(rng) - std::numbers::egamma * beta;
    }
    case NoiseFamily::mixture: break;
  }
  throw ValidationError("mixture is not a component family");
}

}  // namespace

double NoiseSpec::draw(Rng& rng) const {
  if (family != NoiseFamily::mixture) return draw_component(family, std, rng);
  const auto pick = static_cast<NoiseFamily>(uniform_int(rng, 0, 4));
  return draw_component(pick, std, rng);
}

NoiseSpec sample_noise_spec(NoiseKind kind, std::uint64_t seed, NoiseFamily family) {
  auto rng = make_rng(seed);
  NoiseSpec spec;
  spec.family = family;
  spec.kind = kind;
  if (kind == NoiseKind::exogenous) {
    spec.std_mean = lognormal(rng, 1.0, 1.0);
    spec.std_spread = uniform(rng, 0.1, 0.4);
  } else {
    spec.std_mean = lognormal(rng, -3.0, 6.0);
    spec.std_spread = uniform(rng, 0.0, 0.5);
  }
  spec.std = gamma_mean_std(rng, spec.std_mean, spec.std_spread);
  // The Gamma can underflow for extreme hyper-draws; std must stay strictly positive.
  if (!(spec.std > 0.0)) spec.std = std::numeric_limits<double>::min();
  return spec;
}

}  // namespace cfm
