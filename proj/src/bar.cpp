#include "cfm/bar.hpp"

#include <algorithm>
#include <cmath>

#include "cfm/common.hpp"
#include "cfm/rng.hpp"

namespace cfm {

BinEdges::BinEdges(std::vector<double> edges) : edges_(std::move(edges)) {
  require(edges_.size() >= 3, "a bar distribution needs at least two bins");
  for (std::size_t i = 1; i < edges_.size(); ++i)
    require(edges_[i] > edges_[i - 1], "bin edges must be strictly increasing");
}

BinEdges BinEdges::uniform(int bins, double lo, double hi) {
  require(bins >= 2 && hi > lo, "uniform bins need bins >= 2 and hi > lo");
  std::vector<double> e(static_cast<std::size_t>(bins) + 1);
  for (int k = 0; k <= bins; ++k) e[k] = lo + (hi - lo) * static_cast<double>(k) / bins;
  e.back() = hi;
  return BinEdges(std::move(e));
}

int BinEdges::bin_of(double y) const {
  if (!(y > edges_.front())) return 0;
  if (y >= edges_.back()) return bins() - 1;
  const auto it = std::upper_bound(edges_.begin(), edges_.end(), y);
  return static_cast<int>(it - edges_.begin()) - 1;
}

BarDistribution::BarDistribution(const BinEdges& edges, const std::vector<double>& logits) : edges_(&edges) {
  require(static_cast<int>(logits.size()) == edges.bins(), "logit count must equal the bin count");
  const double m = *std::max_element(logits.begin(), logits.end());
  probs_.resize(logits.size());
  double z = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) z += (probs_[k] = std::exp(logits[k] - m));
  for (auto& p : probs_) p /= z;
}

double BarDistribution::density(double y) const {
  if (!edges_->contains(y)) return 0.0;
  const int k = edges_->bin_of(y);
  return probs_[k] / edges_->width(k);
}

double BarDistribution::nll(double y, ClampStats* stats) const {
  if (stats) {
    ++stats->evaluated;
    if (!edges_->contains(y)) ++stats->clamped;
  }
  const int k = edges_->bin_of(y);
  return -std::log(probs_[k]) + std::log(edges_->width(k));
}

double BarDistribution::mean() const {
  double s = 0.0;
  for (int k = 0; k < edges_->bins(); ++k) s += probs_[k] * edges_->midpoint(k);
  return s;
}

double BarDistribution::variance() const {
  // Exact variance of the piecewise-uniform density.
  const double mu = mean();
  double s = 0.0;
  for (int k = 0; k < edges_->bins(); ++k) {
    const double c = edges_->midpoint(k) - mu;
    const double w = edges_->width(k);
    s += probs_[k] * (c * c + w * w / 12.0);
  }
  return s;
}

double BarDistribution::stddev() const { return std::sqrt(variance()); }

double BarDistribution::quantile(double q) const {
  require(q > 0.0 && q < 1.0, "quantile level must lie in (0, 1)");
  return sample_uniform(q);
}

double BarDistribution::sample_uniform(double u) const {
  double cum = 0.0;
  const int bins = edges_->bins();
  for (int k = 0; k < bins; ++k) {
    const double p = probs_[k];
    if (cum + p >= u && p > 0.0) {
      const double frac = std::clamp((u - cum) / p, 0.0, 1.0);
      return edges_->edges()[k] + frac * edges_->width(k);
    }
    cum += p;
  }
  for (int k = bins - 1; k >= 0; --k)
    if (probs_[k] > 0.0) return edges_->edges()[k + 1];
  return edges_->hi();
}

double BarDistribution::sample(std::uint64_t seed) const {
  auto rng = make_rng(seed);
  return sample_uniform(uniform(rng));
}

}  // namespace cfm
