#include "cfm/mechanism.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cfm/common.hpp"

namespace cfm {

std::string to_string(Nonlinearity nl) {
  switch (nl) {
    case Nonlinearity::identity: return "identity";
    case Nonlinearity::relu: return "relu";
    case Nonlinearity::relu6: return "relu6";
    case Nonlinearity::selu: return "selu";
    case Nonlinearity::silu: return "silu";
    case Nonlinearity::softplus: return "softplus";
    case Nonlinearity::hardtanh: return "hardtanh";
    case Nonlinearity::sign: return "sign";
    case Nonlinearity::sine: return "sin";
    case Nonlinearity::rbf: return "rbf";
    case Nonlinearity::exp: return "exp";
    case Nonlinearity::abs: return "abs";
    case Nonlinearity::indicator: return "indicator";
    case Nonlinearity::square: return "square";
    case Nonlinearity::gaussian_process: return "gp";
  }
  return "identity";
}

std::string to_string(MechanismKind kind) {
  switch (kind) {
    case MechanismKind::mlp: return "mlp";
    case MechanismKind::boosted_trees: return "boosted_trees";
    case MechanismKind::constant: return "constant";
  }
  return "mlp";
}

std::string to_string(NoisePlacement placement) {
  switch (placement) {
    case NoisePlacement::post_additive: return "post_additive";
    case NoisePlacement::pre_additive: return "pre_additive";
    case NoisePlacement::input_concat: return "input_concat";
  }
  return "post_additive";
}

GpFeatureMap GpFeatureMap::sample(Rng& rng) {
  GpFeatureMap gp;
  constexpr int n = kFeatures;
  gp.a_.resize(n);
  gp.b_.resize(n);
  gp.w_.resize(n);
  gp.z_.resize(n);
  for (int i = 0; i < n; ++i) {
    gp.b_[i] = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    gp.a_[i] = uniform(rng, 0.0, static_cast<double>(n));
    const double u = uniform(rng);
    gp.w_[i] = std::pow(gp.a_[i], -std::exp(u));
  }
  for (int i = 0; i < n; ++i) gp.z_[i] = standard_normal(rng);
  double norm = 0.0;
  for (double w : gp.w_) norm += w * w;
  norm = std::sqrt(norm);
  gp.coeff_.resize(n);
  for (int i = 0; i < n; ++i) gp.coeff_[i] = gp.w_[i] * gp.z_[i] / norm;
  return gp;
}

std::vector<double> GpFeatureMap::phi(double x) const {
  double norm = 0.0;
  for (double w : w_) norm += w * w;
  norm = std::sqrt(norm);
  std::vector<double> out(a_.size());
  for (std::size_t i = 0; i < a_.size(); ++i) out[i] = w_[i] * std::sin(a_[i] * x + b_[i]) / norm;
  return out;
}

double GpFeatureMap::operator()(double x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < a_.size(); ++i) s += coeff_[i] * std::sin(a_[i] * x + b_[i]);
  return s;
}

double apply_nonlinearity(Nonlinearity nl, double x, const GpFeatureMap* gp) {
  constexpr double kSeluAlpha = 1.6732632423543772;
  constexpr double kSeluScale = 1.0507009873554805;
  switch (nl) {
    case Nonlinearity::identity: return x;
    case Nonlinearity::relu: return std::max(0.0, x);
    case Nonlinearity::relu6: return std::clamp(x, 0.0, 6.0);
    case Nonlinearity::selu: return kSeluScale * (x > 0.0 ? x : kSeluAlpha * std::expm1(x));
    case Nonlinearity::silu: return x / (1.0 + std::exp(-x));
    case Nonlinearity::softplus: return x > 30.0 ? x : std::log1p(std::exp(x));
    case Nonlinearity::hardtanh: return std::clamp(x, -1.0, 1.0);
    case Nonlinearity::sign: return static_cast<double>((x > 0.0) - (x < 0.0));
    case Nonlinearity::sine: return std::sin(x);
    case Nonlinearity::rbf: return std::exp(-x * x);
    case Nonlinearity::exp: return std::exp(x);
    case Nonlinearity::abs: return std::abs(x);
    case Nonlinearity::indicator: return std::abs(x) <= 1.0 ? 1.0 : 0.0;
    case Nonlinearity::square: return x * x;
    case Nonlinearity::gaussian_process:
      require(gp != nullptr, "gp nonlinearity without a feature map");
      return (*gp)(x);
  }
  return x;
}

DenseLayer DenseLayer::sample(int inputs, int outputs, Rng& rng) {
  DenseLayer layer;
  layer.inputs = inputs;
  layer.outputs = outputs;
  const double bound = 1.0 / std::sqrt(static_cast<double>(inputs));
  layer.weight.resize(static_cast<std::size_t>(inputs) * outputs);
  layer.bias.resize(outputs);
  for (auto& w : layer.weight) w = uniform(rng, -bound, bound);
  for (auto& b : layer.bias) b = uniform(rng, -bound, bound);
  return layer;
}

void DenseLayer::apply(std::span<const double> in, std::span<double> out) const {
  for (int o = 0; o < outputs; ++o) {
    double s = bias[o];
    const double* w = weight.data() + static_cast<std::size_t>(o) * inputs;
    for (int i = 0; i < inputs; ++i) s += w[i] * in[i];
    out[o] = s;
  }
}

int Mechanism::input_width() const {
  if (root) return 1;
  return static_cast<int>(parents.size()) + (placement == NoisePlacement::input_concat ? 1 : 0);
}

Mechanism Mechanism::constant(double value) {
  Mechanism m;
  m.kind = MechanismKind::constant;
  m.constant_value = value;
  return m;
}

double Mechanism::evaluate_raw(std::span<const double> parent_values, double noise, double extra) const {
  if (kind == MechanismKind::constant) return constant_value;

  std::vector<double> input;
  if (root) {
    input.push_back(noise);
  } else {
    input.assign(parent_values.begin(), parent_values.end());
    if (placement == NoisePlacement::input_concat) input.push_back(noise);
  }
  // A non-root MLP with no parents and no noise input still needs one (zero) input.
  if (input.empty()) input.push_back(0.0);

  const GpFeatureMap* map = gp.get();
  double pre = 0.0;
  if (kind == MechanismKind::mlp) {
    std::vector<double> h = std::move(input);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      std::vector<double> next(layers[l].outputs);
      layers[l].apply(h, next);
      if (l + 1 < layers.size())
        for (auto& v : next) v = apply_nonlinearity(nonlinearity, v, map);
      h = std::move(next);
    }
    pre = h[0];
  } else {
    pre = trees.predict(input);
    if (tree_output_noise) pre += extra;
  }
  if (!root && placement == NoisePlacement::pre_additive) pre += noise;
  double out = apply_nonlinearity(nonlinearity, pre, map);
  if (!root && placement == NoisePlacement::post_additive) out += noise;
  return out;
}

double Mechanism::evaluate(std::span<const double> parent_values, double noise, double extra) const {
  const double raw = evaluate_raw(parent_values, noise, extra);
  if (kind == MechanismKind::constant || !standardize) return raw;
  return (raw - shift) / scale;
}

const std::vector<Nonlinearity>& random_nonlinearities() {
  static const std::vector<Nonlinearity> list{
      Nonlinearity::relu,  Nonlinearity::relu6, Nonlinearity::selu,      Nonlinearity::silu,
      Nonlinearity::softplus, Nonlinearity::hardtanh, Nonlinearity::sign, Nonlinearity::sine,
      Nonlinearity::rbf,   Nonlinearity::exp,   Nonlinearity::abs,       Nonlinearity::indicator,
      Nonlinearity::square, Nonlinearity::gaussian_process,
  };
  return list;
}

Mechanism sample_mechanism(std::vector<int> parents, bool root, const MechanismComplexity& complexity,
                           double tree_probability, Rng& rng) {
  Mechanism m;
  m.parents = std::move(parents);
  m.root = root;
  const auto& nls = random_nonlinearities();
  m.nonlinearity = nls[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(nls.size()) - 1))];
  if (m.nonlinearity == Nonlinearity::gaussian_process)
    m.gp = std::make_shared<const GpFeatureMap>(GpFeatureMap::sample(rng));
  m.placement = static_cast<NoisePlacement>(uniform_int(rng, 0, 2));
  m.standardize = bernoulli(rng, complexity.standardize_probability);

  const int width_in = std::max(1, m.input_width());
  if (bernoulli(rng, tree_probability)) {
    m.kind = MechanismKind::boosted_trees;
    const int n = uniform_int(rng, complexity.tree_fit_min_samples, complexity.tree_fit_max_samples);
    std::vector<double> x(static_cast<std::size_t>(n) * width_in), y(n);
    for (auto& v : x) v = standard_normal(rng);
    for (auto& v : y) v = standard_normal(rng);
    m.trees = BoostedTrees::fit(x, y, width_in, complexity.boosting);
    m.tree_output_noise = bernoulli(rng, complexity.tree_output_noise_probability);
  } else {
    m.kind = MechanismKind::mlp;
    const int depth = complexity.depth_support[categorical(rng, complexity.depth_weights)];
    const int width = complexity.width_support[categorical(rng, complexity.width_weights)];
    int in = width_in;
    for (int l = 0; l < depth; ++l) {
      m.layers.push_back(DenseLayer::sample(in, width, rng));
      in = width;
    }
    m.layers.push_back(DenseLayer::sample(in, 1, rng));
  }
  return m;
}

}  // namespace cfm
