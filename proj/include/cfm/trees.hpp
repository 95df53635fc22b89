#pragma once

#include <span>
#include <vector>

namespace cfm {

// Minimal gradient-boosted regression trees with squared loss. Only what the prior needs:
// fit on a small dense table, then evaluate single rows.
struct RegressionTreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

class RegressionTree {
 public:
  double predict(std::span<const double> row) const;
  const std::vector<RegressionTreeNode>& nodes() const { return nodes_; }
  std::vector<RegressionTreeNode>& nodes() { return nodes_; }

 private:
  std::vector<RegressionTreeNode> nodes_;
};

struct BoostingParams {
  int num_trees = 50;
  int max_depth = 4;
  double shrinkage = 0.1;
  int min_samples_leaf = 1;
};

class BoostedTrees {
 public:
  BoostedTrees() = default;

  // x is row-major n x p.
  static BoostedTrees fit(std::span<const double> x, std::span<const double> y, int num_features,
                          const BoostingParams& params);

  double predict(std::span<const double> row) const;
  int num_features() const { return num_features_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }
  double base_score() const { return base_score_; }

 private:
  int num_features_ = 0;
  double base_score_ = 0.0;
  double shrinkage_ = 0.1;
  std::vector<RegressionTree> trees_;
};

}  // namespace cfm
