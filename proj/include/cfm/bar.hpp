#pragma once

#include <cstdint>
#include <vector>

namespace cfm {

// Bin edges a_0 < ... < a_K of a piecewise-constant density.
class BinEdges {
 public:
  BinEdges() = default;
  explicit BinEdges(std::vector<double> edges);
  static BinEdges uniform(int bins, double lo, double hi);

  int bins() const { return static_cast<int>(edges_.size()) - 1; }
  double lo() const { return edges_.front(); }
  double hi() const { return edges_.back(); }
  double width(int k) const { return edges_[k + 1] - edges_[k]; }
  double midpoint(int k) const { return 0.5 * (edges_[k] + edges_[k + 1]); }
  const std::vector<double>& edges() const { return edges_; }
  // Bin containing y; values outside [a_0, a_K] map to the boundary bins.
  int bin_of(double y) const;
  bool contains(double y) const { return y >= lo() && y <= hi(); }

 private:
  std::vector<double> edges_;
};

// Tally of targets that fell outside the bin range and were clamped.
struct ClampStats {
  std::uint64_t evaluated = 0;
  std::uint64_t clamped = 0;
};

class BarDistribution {
 public:
  BarDistribution(const BinEdges& edges, const std::vector<double>& logits);

  const std::vector<double>& probs() const { return probs_; }
  const BinEdges& edges() const { return *edges_; }
  double density(double y) const;
  // -log(density) at y, clamping to the boundary bin outside the range.
  double nll(double y, ClampStats* stats = nullptr) const;
  double mean() const;
  double variance() const;
  double stddev() const;
  // Cumulative-mass inversion with linear interpolation inside the bin; q in (0, 1).
  double quantile(double q) const;
  double sample(std::uint64_t seed) const;
  double sample_uniform(double u) const;

 private:
  const BinEdges* edges_;
  std::vector<double> probs_;
};

}  // namespace cfm
