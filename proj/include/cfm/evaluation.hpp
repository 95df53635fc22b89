#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfm/csv.hpp"
#include "cfm/model.hpp"
#include "cfm/task.hpp"

namespace cfm {

// ---------------------------------------------------------------------------
// Metrics

double mean_squared_error(const std::vector<double>& prediction, const std::vector<double>& truth);
// 1 - SSE / SST with SST around the mean of `truth`; throws when `truth` is constant.
double r_squared(const std::vector<double>& prediction, const std::vector<double>& truth);
double pehe(const std::vector<double>& tau_hat, const std::vector<double>& tau);
double ate_error(const std::vector<double>& tau_hat, const std::vector<double>& tau);
double mean(const std::vector<double>& v);
double median(std::vector<double> v);

struct ConfidenceInterval {
  double level = 0.95;
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

enum class Statistic : std::uint8_t { mean, median };

// Percentile bootstrap over the entries of `values`.
ConfidenceInterval bootstrap_ci(const std::vector<double>& values, Statistic statistic, std::uint64_t seed,
                                int resamples = 1000, double level = 0.95);

// ---------------------------------------------------------------------------
// Model predictions

struct TaskPrediction {
  std::vector<double> mean;  // normalised outcome scale
  std::vector<double> stddev;
  std::vector<double> nll;   // per query row; empty when targets are unknown
};

// Forward without gradients on the queries of `task`, conditioned on `node_pam` (node order) or
// unconditioned when null.
TaskPrediction predict_task(const Model<float>& model, const CausalTask& task, const PartialAncestorMatrix* node_pam,
                            bool with_targets = true, ClampStats* clamp = nullptr);

struct TaskMetrics {
  double nll = 0.0;
  double mse = 0.0;
  std::optional<double> r2;  // absent when the true outcomes are constant
};

TaskMetrics task_metrics(const TaskPrediction& prediction, const CausalTask& task);

// ---------------------------------------------------------------------------
// Predictive evaluation

struct StratumReport {
  double hide_fraction = 0.0;
  std::vector<TaskMetrics> tasks;
  ConfidenceInterval nll_mean, nll_median, mse_median;
  std::optional<ConfidenceInterval> r2_median;  // absent when no task has a defined R^2
};

struct MetricReport {
  std::string checkpoint;
  std::vector<StratumReport> strata;
  ClampStats clamp;
};

MetricReport eval_predictive(const Model<float>& model, const std::vector<CausalTask>& tasks,
                             const std::vector<double>& hide_fractions, std::uint64_t seed);

// Paired per-task differences (candidate - baseline) with a bootstrap CI.
ConfidenceInterval paired_delta(const std::vector<double>& candidate, const std::vector<double>& baseline,
                                Statistic statistic, std::uint64_t seed, int resamples = 1000);

nlohmann::ordered_json report_to_json(const MetricReport& report);
void write_report(const MetricReport& report, const std::filesystem::path& csv_path,
                  const std::filesystem::path& json_path);

// ---------------------------------------------------------------------------
// Semi-synthetic CATE

struct SemiSyntheticTask {
  std::string id;
  std::vector<std::string> covariate_names;
  Eigen::MatrixXd covariates;  // n x p
  std::vector<double> t;
  std::vector<double> y;
  std::vector<double> y0;
  std::vector<double> y1;

  int rows() const { return static_cast<int>(t.size()); }
  std::vector<double> true_effects() const;
  double true_ate() const;
};

// CSV with columns t, y, y0, y1 and any number of covariate columns (every other column).
SemiSyntheticTask load_semisynthetic(const std::filesystem::path& path, const std::string& id = {});
SemiSyntheticTask semisynthetic_from_csv(const CsvTable& csv, const std::string& id);
SemiSyntheticTask rebalance(const SemiSyntheticTask& task, int n_control, std::uint64_t seed);

// Effects in raw outcome units from the two arm predictions (normalised scale).
std::vector<double> cate_from_arms(const std::vector<double>& mean_do1, const std::vector<double>& mean_do0,
                                   const NormalizationMeta& meta);
// tau_hat(x_i) for every row, context = all factual rows, PAM from unconfoundedness.
std::vector<double> estimate_cate(const Model<float>& model, const SemiSyntheticTask& task);

struct CateReport {
  std::string id;
  int rows = 0;
  double pehe = 0.0;
  double ate_error = 0.0;
  double true_ate = 0.0;
  double estimated_ate = 0.0;
};

// ---------------------------------------------------------------------------
// Bivariate demo

enum class PamMode : std::uint8_t { none, correct, wrong };
std::string to_string(PamMode mode);
PamMode pam_mode_from_string(const std::string& s);

struct DemoPoint {
  double t = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
  double q05 = 0.0, q25 = 0.0, q50 = 0.0, q75 = 0.0, q95 = 0.0;
  std::vector<double> samples;
};

struct DemoResult {
  PamMode mode = PamMode::none;
  std::string asserted_direction;  // "unknown", "T->Y", "Y->T"
  std::vector<DemoPoint> points;   // raw outcome units
  Eigen::MatrixXd observational;   // n x 2, raw (T, Y)
};

struct BivariateData {
  // Normalised like a prior task: queries t ~ U(-4a, 4a) with their interventional outcomes.
  CausalTask task;
  // Same context and normalisation, queries at the grid values (outcomes sampled from the truth).
  CausalTask grid_task;
  std::vector<double> t_grid;  // raw units
  Eigen::MatrixXd raw;         // observational (T, Y)
};

// Y = slope * T + eps, T ~ N(0, 1), eps ~ N(0, noise_std^2); do(t) sets T and keeps the mechanism.
BivariateData make_bivariate_data(double slope, double noise_std, int n_context, int n_queries,
                                  const std::vector<double>& t_grid, std::uint64_t seed);
// PAM over the (T, Y) node order for a demo mode.
PartialAncestorMatrix bivariate_pam(PamMode mode);
DemoResult bivariate_demo(const Model<float>& model, const BivariateData& data, PamMode mode, int samples_per_point,
                          std::uint64_t seed);
nlohmann::ordered_json demo_to_json(const std::vector<DemoResult>& results, double slope, double noise_std);

// The unconfoundedness PAM adapted to a task's node order (features, t, y at arbitrary indices).
PartialAncestorMatrix unconfoundedness_pam_for(const CausalTask& task);

}  // namespace cfm
