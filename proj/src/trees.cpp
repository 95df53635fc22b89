#include "cfm/trees.hpp"

#include <algorithm>
#include <numeric>

#include "cfm/common.hpp"

namespace cfm {

double RegressionTree::predict(std::span<const double> row) const {
  int n = 0;
  while (nodes_[n].feature >= 0) n = row[nodes_[n].feature] <= nodes_[n].threshold ? nodes_[n].left : nodes_[n].right;
  return nodes_[n].value;
}

namespace {

struct GrowContext {
  std::span<const double> x;
  int p;
  const std::vector<double>* residual;
  const BoostingParams* params;
  RegressionTree* tree;
};

double mean_of(const std::vector<int>& rows, const std::vector<double>& r) {
  double s = 0.0;
  for (int i : rows) s += r[i];
  return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

int grow(GrowContext& ctx, std::vector<int> rows, int depth) {
  auto& nodes = ctx.tree->nodes();
  const int id = static_cast<int>(nodes.size());
  nodes.push_back({});
  nodes[id].value = mean_of(rows, *ctx.residual);
  const int n = static_cast<int>(rows.size());
  if (depth >= ctx.params->max_depth || n < 2 * ctx.params->min_samples_leaf) return id;

  const auto& r = *ctx.residual;
  double total = 0.0;
  for (int i : rows) total += r[i];

  // Exact greedy search maximising the reduction in squared error.
  double best_gain = 1e-12;
  int best_feature = -1;
  double best_threshold = 0.0;
  std::vector<int> sorted = rows;
  for (int f = 0; f < ctx.p; ++f) {
    auto value = [&](int i) { return ctx.x[static_cast<std::size_t>(i) * ctx.p + f]; };
    std::sort(sorted.begin(), sorted.end(), [&](int a, int b) { return value(a) < value(b); });
    double left_sum = 0.0;
    for (int k = 0; k + 1 < n; ++k) {
      left_sum += r[sorted[k]];
      const int nl = k + 1;
      const int nr = n - nl;
      if (nl < ctx.params->min_samples_leaf || nr < ctx.params->min_samples_leaf) continue;
      if (value(sorted[k]) == value(sorted[k + 1])) continue;
      const double right_sum = total - left_sum;
      const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr - total * total / n;
      if (gain > best_gain) {
        best_gain = gain;
        best_feature = f;
        best_threshold = 0.5 * (value(sorted[k]) + value(sorted[k + 1]));
      }
    }
  }
  if (best_feature < 0) return id;

  std::vector<int> left, right;
  for (int i : rows) {
    (ctx.x[static_cast<std::size_t>(i) * ctx.p + best_feature] <= best_threshold ? left : right).push_back(i);
  }
  const int l = grow(ctx, std::move(left), depth + 1);
  const int rr = grow(ctx, std::move(right), depth + 1);
  nodes[id].feature = best_feature;
  nodes[id].threshold = best_threshold;
  nodes[id].left = l;
  nodes[id].right = rr;
  return id;
}

}  // namespace

BoostedTrees BoostedTrees::fit(std::span<const double> x, std::span<const double> y, int num_features,
                               const BoostingParams& params) {
  require(num_features >= 1, "boosted trees need at least one input feature");
  const std::size_t n = y.size();
  require(n >= 1 && x.size() == n * static_cast<std::size_t>(num_features), "boosted trees: table shape mismatch");
  BoostedTrees model;
  model.num_features_ = num_features;
  model.shrinkage_ = params.shrinkage;
  model.base_score_ = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);

  std::vector<double> prediction(n, model.base_score_);
  std::vector<double> residual(n);
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  for (int t = 0; t < params.num_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - prediction[i];
    RegressionTree tree;
    GrowContext ctx{x, num_features, &residual, &params, &tree};
    grow(ctx, all, 0);
    for (std::size_t i = 0; i < n; ++i)
      prediction[i] += params.shrinkage * tree.predict(x.subspan(i * num_features, num_features));
    model.trees_.push_back(std::move(tree));
  }
  return model;
}

double BoostedTrees::predict(std::span<const double> row) const {
  double out = base_score_;
  for (const auto& t : trees_) out += shrinkage_ * t.predict(row);
  return out;
}

}  // namespace cfm
