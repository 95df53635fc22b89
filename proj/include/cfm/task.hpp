#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cfm/graph.hpp"
#include "cfm/scm.hpp"

namespace cfm {

struct NormalizationMeta {
  // Per node column; the outcome column keeps mean 0 / std 1.
  std::vector<double> feature_mean;
  std::vector<double> feature_std;
  bool treatment_binary = false;
  double target_clip_low = -1.0;
  double target_clip_high = 1.0;
  // raw = normalized * target_scale + target_offset
  double target_scale = 1.0;
  double target_offset = 0.0;

  double normalize_target(double raw) const;
  double denormalize_target(double normalized) const;
};

// One training/evaluation unit. Tables hold every node column in node order: query rows carry
// the intervened treatment value in the treatment column, the covariates x in the remaining
// non-outcome columns, and the true interventional outcome in the outcome column.
struct CausalTask {
  Table observational;
  Table interventional;
  int treatment = 0;
  int outcome = 1;
  AdjacencyMatrix adjacency;
  AncestorMatrix ancestors;
  NormalizationMeta meta;
  std::uint64_t seed = 0;
  std::string prior;
  bool normalized = false;

  int num_nodes() const { return static_cast<int>(observational.cols()); }
  int num_context() const { return static_cast<int>(observational.rows()); }
  int num_queries() const { return static_cast<int>(interventional.rows()); }
  // Non-treatment, non-outcome node indices in increasing order.
  std::vector<int> feature_columns() const;
  std::vector<NodeRole> roles() const;
};

enum class RejectionRule : std::uint8_t { target_variance, target_uniqueness, constant_treatment, non_finite, relation };
std::string to_string(RejectionRule rule);

struct Rejection {
  RejectionRule rule;
  std::string message;
};

inline constexpr double kMinTargetVariance = 0.01;
inline constexpr double kMinUniqueTargetRatio = 0.2;
inline constexpr double kClipLowQuantile = 0.005;
inline constexpr double kClipHighQuantile = 0.995;

struct PreprocessOptions {
  // Binary {0,1} treatment columns are left unstandardised when set.
  bool keep_binary_treatment = true;
  // Target statistics (clip quantiles, min/max) from observational rows only. Folding the
  // interventional outcomes in makes the target scale depend on whether t causes y.
  bool target_stats_from_context = true;
};

// Features standardised with statistics over all rows (constant columns become zeros), target
// clipped to the observational [q_0.5%, q_99.5%] and mapped affinely onto [-1, 1], then the rejection rules.
std::variant<CausalTask, Rejection> preprocess_task(const CausalTask& raw, const PreprocessOptions& options = {});
// The two halves of preprocess_task.
CausalTask normalize_task(const CausalTask& raw, const PreprocessOptions& options = {});
std::optional<Rejection> check_rejection(const CausalTask& normalized);

// Linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

enum class PathRelation : std::uint8_t { treatment_to_outcome, outcome_to_treatment, no_path };
std::string to_string(PathRelation relation);
PathRelation path_relation_from_string(const std::string& s);
PathRelation relation_of(const AncestorMatrix& ancestors, int treatment, int outcome);

struct LinearGaussianTaskOptions {
  int num_context = 500;
  int num_queries = 500;
};

CausalTask sample_linear_gaussian_task(int node_count, PathRelation relation, std::uint64_t seed,
                                       const LinearGaussianTaskOptions& options = {});

enum class PriorKind : std::uint8_t { linear_gaussian, complex };
std::string to_string(PriorKind kind);
PriorKind prior_kind_from_string(const std::string& s);

struct PriorConfig {
  PriorKind kind = PriorKind::linear_gaussian;
  // linear_gaussian
  std::vector<int> node_counts{2, 5, 20, 35, 50};
  LinearGaussianTaskOptions linear{};
  // complex
  ComplexPriorConfig complex{};
  int total_rows = 1000;

  std::string identifier() const;
};

// Task `index` of the stream rooted at `root_seed`; rejected draws are replaced by fresh SCMs
// with derived seeds, so the result is a pure function of (config, root_seed, index).
CausalTask generate_task(const PriorConfig& config, std::uint64_t root_seed, std::uint64_t index);

// Directory format: meta.json, obs.csv, query.csv, adjacency.txt, ancestor.txt.
void save_task(const CausalTask& task, const std::filesystem::path& dir);
CausalTask load_task(const std::filesystem::path& dir);

}  // namespace cfm
