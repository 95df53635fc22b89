#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cfm/rng.hpp"
#include "cfm/trees.hpp"

namespace cfm {

enum class Nonlinearity : std::uint8_t {
  identity,  // linear-Gaussian prior only; not part of the random draw
  relu,
  relu6,
  selu,
  silu,
  softplus,
  hardtanh,
  sign,
  sine,
  rbf,
  exp,
  abs,
  indicator,
  square,
  gaussian_process,
};

std::string to_string(Nonlinearity nl);

// Random-feature approximation of a GP sample path: f(x) = phi(x)^T z,
// phi(x) = w * sin(a x + b) / ||w||_2.
class GpFeatureMap {
 public:
  static constexpr int kFeatures = 256;
  static GpFeatureMap sample(Rng& rng);

  std::vector<double> phi(double x) const;
  double operator()(double x) const;

  const std::vector<double>& a() const { return a_; }
  const std::vector<double>& b() const { return b_; }
  const std::vector<double>& w() const { return w_; }
  const std::vector<double>& z() const { return z_; }

 private:
  std::vector<double> a_, b_, w_, z_;
  std::vector<double> coeff_;  // w_i z_i / ||w||
};

double apply_nonlinearity(Nonlinearity nl, double x, const GpFeatureMap* gp);

enum class MechanismKind : std::uint8_t { mlp, boosted_trees, constant };
enum class NoisePlacement : std::uint8_t { post_additive, pre_additive, input_concat };

std::string to_string(MechanismKind kind);
std::string to_string(NoisePlacement placement);

struct DenseLayer {
  int inputs = 0;
  int outputs = 0;
  std::vector<double> weight;  // outputs x inputs, row-major
  std::vector<double> bias;

  // Uniform(-1/sqrt(in), 1/sqrt(in)) for weights and bias.
  static DenseLayer sample(int inputs, int outputs, Rng& rng);
  void apply(std::span<const double> in, std::span<double> out) const;
};

// One structural assignment z_k = f_k(pa(z_k), eps_k). Immutable after sampling; the frozen
// standardisation constants are part of the sampled parameters.
struct Mechanism {
  MechanismKind kind = MechanismKind::mlp;
  Nonlinearity nonlinearity = Nonlinearity::identity;
  std::shared_ptr<const GpFeatureMap> gp;
  NoisePlacement placement = NoisePlacement::post_additive;
  std::vector<int> parents;
  bool root = false;  // input is the exogenous draw rather than parent values

  std::vector<DenseLayer> layers;  // mlp: hidden layers then a width-1 output layer
  BoostedTrees trees;
  bool tree_output_noise = false;  // adds a standard-normal draw before the nonlinearity

  bool standardize = false;
  double shift = 0.0;
  double scale = 1.0;

  double constant_value = 0.0;

  int input_width() const;
  // `noise` is the exogenous draw for roots and the endogenous draw otherwise; `extra` is the
  // standard-normal draw used by tree_output_noise.
  double evaluate(std::span<const double> parent_values, double noise, double extra) const;
  // Output before the frozen standardisation.
  double evaluate_raw(std::span<const double> parent_values, double noise, double extra) const;

  static Mechanism constant(double value);
};

struct MechanismComplexity {
  // Dataset-wide probability of a tree mechanism is drawn from these.
  std::vector<double> tree_probability_support{0.0, 0.1, 0.2, 0.3};
  std::vector<double> tree_probability_weights{0.8902, 0.0989, 0.00989, 0.000989};
  std::vector<int> depth_support{0, 1, 2, 3};
  std::vector<double> depth_weights{0.875, 0.1, 0.025, 0.01};
  std::vector<int> width_support{1, 2, 4, 6, 8, 10, 12, 14, 16, 32};
  std::vector<double> width_weights{0.7, 0.2, 0.1, 0.05, 0.04, 0.03, 0.02, 0.01, 0.01, 0.01};
  int tree_fit_min_samples = 10;
  int tree_fit_max_samples = 500;
  BoostingParams boosting{};
  double standardize_probability = 0.5;
  double tree_output_noise_probability = 0.5;
};

// Nonlinearities drawn for the complex prior.
const std::vector<Nonlinearity>& random_nonlinearities();

Mechanism sample_mechanism(std::vector<int> parents, bool root, const MechanismComplexity& complexity,
                           double tree_probability, Rng& rng);

}  // namespace cfm
