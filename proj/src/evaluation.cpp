#include "cfm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "cfm/parallel.hpp"
#include "cfm/rng.hpp"

namespace cfm {

double mean(const std::vector<double>& v) {
  require(!v.empty(), "mean of an empty vector");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median(std::vector<double> v) {
  require(!v.empty(), "median of an empty vector");
  return quantile(std::move(v), 0.5);
}

double mean_squared_error(const std::vector<double>& prediction, const std::vector<double>& truth) {
  require(prediction.size() == truth.size() && !truth.empty(), "MSE needs equal, non-zero lengths");
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) s += (prediction[i] - truth[i]) * (prediction[i] - truth[i]);
  return s / static_cast<double>(truth.size());
}

double r_squared(const std::vector<double>& prediction, const std::vector<double>& truth) {
  require(prediction.size() == truth.size() && !truth.empty(), "R^2 needs equal, non-zero lengths");
  const double mu = mean(truth);
  double sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    sse += (prediction[i] - truth[i]) * (prediction[i] - truth[i]);
    sst += (truth[i] - mu) * (truth[i] - mu);
  }
  require(sst > 0.0, "R^2 is undefined for constant outcomes");
  return 1.0 - sse / sst;
}

double pehe(const std::vector<double>& tau_hat, const std::vector<double>& tau) {
  require(tau_hat.size() == tau.size(),
          "PEHE length mismatch: " + std::to_string(tau_hat.size()) + " vs " + std::to_string(tau.size()));
  require(!tau.empty(), "PEHE of empty vectors");
  return std::sqrt(mean_squared_error(tau_hat, tau));
}

double ate_error(const std::vector<double>& tau_hat, const std::vector<double>& tau) {
  require(tau_hat.size() == tau.size() && !tau.empty(), "ATE error needs equal, non-zero lengths");
  const double ate = mean(tau);
  require(ate != 0.0, "relative ATE error is undefined when the true ATE is 0");
  return std::abs(mean(tau_hat) - ate) / std::abs(ate);
}

namespace {

double statistic_of(const std::vector<double>& v, Statistic s) { return s == Statistic::mean ? mean(v) : median(v); }

}  // namespace

ConfidenceInterval bootstrap_ci(const std::vector<double>& values, Statistic statistic, std::uint64_t seed,
                                int resamples, double level) {
  require(!values.empty(), "bootstrap of an empty sample");
  require(resamples >= 1 && level > 0.0 && level < 1.0, "bootstrap needs resamples >= 1 and level in (0, 1)");
  ConfidenceInterval ci;
  ci.level = level;
  ci.estimate = statistic_of(values, statistic);
  auto rng = make_rng(seed);
  const int n = static_cast<int>(values.size());
  std::vector<double> stats(resamples), draw(values.size());
  for (int b = 0; b < resamples; ++b) {
    for (auto& v : draw) v = values[static_cast<std::size_t>(uniform_int(rng, 0, n - 1))];
    stats[b] = statistic_of(draw, statistic);
  }
  const double alpha = 0.5 * (1.0 - level);
  // The percentile interval can miss the point estimate for tiny, skewed samples; widen to cover it.
  ci.lower = std::min(quantile(stats, alpha), ci.estimate);
  ci.upper = std::max(quantile(stats, 1.0 - alpha), ci.estimate);
  return ci;
}

ConfidenceInterval paired_delta(const std::vector<double>& candidate, const std::vector<double>& baseline,
                                Statistic statistic, std::uint64_t seed, int resamples) {
  require(candidate.size() == baseline.size(), "paired delta needs equal lengths");
  std::vector<double> d(candidate.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = candidate[i] - baseline[i];
  return bootstrap_ci(d, statistic, seed, resamples);
}

// ---------------------------------------------------------------------------

namespace {

constexpr int kQueryChunk = 512;

std::vector<double> query_targets(const CausalTask& task) {
  std::vector<double> y(task.num_queries());
  for (int r = 0; r < task.num_queries(); ++r) y[r] = task.interventional(r, task.outcome);
  return y;
}

}  // namespace

TaskPrediction predict_task(const Model<float>& model, const CausalTask& task, const PartialAncestorMatrix* node_pam,
                            bool with_targets, ClampStats* clamp) {
  if (model.config().mode == ConditioningMode::none) node_pam = nullptr;
  const auto full = make_model_input(task, node_pam, model.config().max_features);
  TaskPrediction out;
  const auto targets = query_targets(task);
  const int nq = task.num_queries();
  // Query rows never serve as keys, so chunking the queries leaves every prediction unchanged.
  for (int begin = 0; begin < nq; begin += kQueryChunk) {
    const int count = std::min(kQueryChunk, nq - begin);
    ModelInput in;
    in.num_features = full.num_features;
    in.context = full.context;
    in.queries = full.queries.middleRows(begin, count);
    in.pam = full.pam;
    Tape<float> tape(false);
    const auto res = model.forward(tape, in);
    const auto dists = model.distributions(tape, res.logits);
    for (int i = 0; i < count; ++i) {
      out.mean.push_back(dists[i].mean());
      out.stddev.push_back(dists[i].stddev());
      if (with_targets) out.nll.push_back(dists[i].nll(targets[begin + i], clamp));
    }
  }
  return out;
}

TaskMetrics task_metrics(const TaskPrediction& prediction, const CausalTask& task) {
  const auto y = query_targets(task);
  require(prediction.nll.size() == y.size(), "task metrics need per-row NLL values");
  TaskMetrics m;
  m.nll = mean(prediction.nll);
  m.mse = mean_squared_error(prediction.mean, y);
  const double mu = mean(y);
  double sst = 0.0;
  for (double v : y) sst += (v - mu) * (v - mu);
  if (sst > 0.0) m.r2 = r_squared(prediction.mean, y);
  return m;
}

MetricReport eval_predictive(const Model<float>& model, const std::vector<CausalTask>& tasks,
                             const std::vector<double>& hide_fractions, std::uint64_t seed) {
  require(!tasks.empty(), "evaluation needs at least one task");
  require(!hide_fractions.empty(), "evaluation needs at least one hide fraction");
  for (const auto& t : tasks) (void)token_positions(t, model.config().max_features);
  MetricReport report;
  for (std::size_t f = 0; f < hide_fractions.size(); ++f) {
    const double fraction = hide_fractions[f];
    require(fraction >= 0.0 && fraction <= 1.0, "hide fractions must lie in [0, 1]");
    StratumReport stratum;
    stratum.hide_fraction = fraction;
    stratum.tasks.resize(tasks.size());
    std::vector<ClampStats> clamps(tasks.size());
    parallel_for(static_cast<int>(tasks.size()), default_threads(), [&](int i) {
      const auto& task = tasks[static_cast<std::size_t>(i)];
      // One shuffle per task: the hidden sets are nested across fractions.
      const auto pam = hide_entries(task.ancestors, fraction, derive_seed(seed, "eval.hide", i), task.roles());
      stratum.tasks[static_cast<std::size_t>(i)] =
          task_metrics(predict_task(model, task, &pam, true, &clamps[static_cast<std::size_t>(i)]), task);
    });
    for (const auto& c : clamps) {
      report.clamp.evaluated += c.evaluated;
      report.clamp.clamped += c.clamped;
    }
    std::vector<double> nll, mse, r2;
    for (const auto& m : stratum.tasks) {
      nll.push_back(m.nll);
      mse.push_back(m.mse);
      if (m.r2) r2.push_back(*m.r2);
    }
    const auto s = derive_seed(seed, "eval.bootstrap", f);
    stratum.nll_mean = bootstrap_ci(nll, Statistic::mean, derive_seed(s, "nll.mean"));
    stratum.nll_median = bootstrap_ci(nll, Statistic::median, derive_seed(s, "nll.median"));
    stratum.mse_median = bootstrap_ci(mse, Statistic::median, derive_seed(s, "mse.median"));
    if (!r2.empty()) stratum.r2_median = bootstrap_ci(r2, Statistic::median, derive_seed(s, "r2.median"));
    report.strata.push_back(std::move(stratum));
  }
  return report;
}

namespace {

nlohmann::ordered_json ci_json(const ConfidenceInterval& ci) {
  return {{"estimate", ci.estimate}, {"lower", ci.lower}, {"upper", ci.upper}, {"level", ci.level}};
}

}  // namespace

nlohmann::ordered_json report_to_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  j["checkpoint"] = report.checkpoint;
  j["strata"] = nlohmann::ordered_json::array();
  for (const auto& s : report.strata) {
    nlohmann::ordered_json st;
    st["hide_fraction"] = s.hide_fraction;
    st["num_tasks"] = s.tasks.size();
    st["nll_mean"] = ci_json(s.nll_mean);
    st["nll_median"] = ci_json(s.nll_median);
    st["mse_median"] = ci_json(s.mse_median);
    st["r2_median"] = s.r2_median ? ci_json(*s.r2_median) : nlohmann::ordered_json(nullptr);
    j["strata"].push_back(st);
  }
  j["clamp"] = {{"evaluated", report.clamp.evaluated}, {"clamped", report.clamp.clamped}};
  return j;
}

void write_report(const MetricReport& report, const std::filesystem::path& csv_path,
                  const std::filesystem::path& json_path) {
  for (const auto& p : {csv_path, json_path})
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream csv(csv_path);
  if (!csv) throw RuntimeFailure("cannot write " + csv_path.string());
  csv << "hide_fraction,task,nll,mse,r2\n" << std::setprecision(17);
  for (const auto& s : report.strata)
    for (std::size_t i = 0; i < s.tasks.size(); ++i) {
      const auto& m = s.tasks[i];
      csv << s.hide_fraction << ',' << i << ',' << m.nll << ',' << m.mse << ',';
      if (m.r2) csv << *m.r2;
      csv << '\n';
    }
  std::ofstream js(json_path);
  if (!js) throw RuntimeFailure("cannot write " + json_path.string());
  js << std::setw(2) << report_to_json(report) << '\n';
}

// ---------------------------------------------------------------------------

std::vector<double> SemiSyntheticTask::true_effects() const {
  std::vector<double> tau(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) tau[i] = y1[i] - y0[i];
  return tau;
}

double SemiSyntheticTask::true_ate() const { return mean(true_effects()); }

SemiSyntheticTask semisynthetic_from_csv(const CsvTable& csv, const std::string& id) {
  std::vector<std::string> missing;
  for (const char* c : {"t", "y", "y0", "y1"})
    if (csv.column(c) < 0) missing.emplace_back(c);
  if (!missing.empty()) {
    std::string msg = "semi-synthetic CSV schema: missing column(s)";
    for (const auto& m : missing) msg += " " + m;
    throw ValidationError(msg + " (required: t, y, y0, y1; every other column is a covariate)");
  }
  require(!csv.rows.empty(), "semi-synthetic CSV has no rows");
  SemiSyntheticTask task;
  task.id = id;
  const int ct = csv.column("t"), cy = csv.column("y"), c0 = csv.column("y0"), c1 = csv.column("y1");
  std::vector<int> cov;
  for (int c = 0; c < static_cast<int>(csv.header.size()); ++c)
    if (c != ct && c != cy && c != c0 && c != c1) {
      cov.push_back(c);
      task.covariate_names.push_back(csv.header[c]);
    }
  const auto n = csv.rows.size();
  task.covariates.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cov.size()));
  std::vector<std::size_t> bad;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < cov.size(); ++j)
      task.covariates(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = csv.number(r, cov[j]);
    const double t = csv.number(r, ct);
    if (t != 0.0 && t != 1.0)
      throw ValidationError("row " + std::to_string(r + 2) + ": treatment must be binary (0 or 1), got " +
                            std::to_string(t));
    task.t.push_back(t);
    task.y.push_back(csv.number(r, cy));
    task.y0.push_back(csv.number(r, c0));
    task.y1.push_back(csv.number(r, c1));
    const double factual = t == 1.0 ? task.y1.back() : task.y0.back();
    if (std::abs(factual - task.y.back()) > 1e-9 * std::max(1.0, std::abs(factual))) bad.push_back(r + 2);
  }
  if (!bad.empty()) {
    std::ostringstream msg;
    msg << "factual outcome differs from the potential outcome of the received treatment on " << bad.size()
        << " row(s):";
    for (std::size_t i = 0; i < std::min<std::size_t>(bad.size(), 20); ++i) msg << ' ' << bad[i];
    if (bad.size() > 20) msg << " ...";
    throw ValidationError(msg.str());
  }
  return task;
}

SemiSyntheticTask load_semisynthetic(const std::filesystem::path& path, const std::string& id) {
  try {
    return semisynthetic_from_csv(read_csv_file(path), id.empty() ? path.stem().string() : id);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

SemiSyntheticTask rebalance(const SemiSyntheticTask& task, int n_control, std::uint64_t seed) {
  std::vector<int> controls;
  for (int i = 0; i < task.rows(); ++i)
    if (task.t[i] == 0.0) controls.push_back(i);
  require(n_control >= 0 && n_control <= static_cast<int>(controls.size()),
          "n_control " + std::to_string(n_control) + " exceeds the " + std::to_string(controls.size()) +
              " untreated rows");
  auto rng = make_rng(seed);
  std::shuffle(controls.begin(), controls.end(), rng);
  std::vector<bool> keep(task.rows(), false);
  for (int i = 0; i < task.rows(); ++i)
    if (task.t[i] == 1.0) keep[i] = true;
  for (int k = 0; k < n_control; ++k) keep[controls[k]] = true;
  SemiSyntheticTask out;
  out.id = task.id;
  out.covariate_names = task.covariate_names;
  std::vector<int> rows;
  for (int i = 0; i < task.rows(); ++i)
    if (keep[i]) rows.push_back(i);
  out.covariates.resize(static_cast<Eigen::Index>(rows.size()), task.covariates.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const int i = rows[r];
    out.covariates.row(static_cast<Eigen::Index>(r)) = task.covariates.row(i);
    out.t.push_back(task.t[i]);
    out.y.push_back(task.y[i]);
    out.y0.push_back(task.y0[i]);
    out.y1.push_back(task.y1[i]);
  }
  return out;
}

std::vector<double> cate_from_arms(const std::vector<double>& mean_do1, const std::vector<double>& mean_do0,
                                   const NormalizationMeta& meta) {
  require(mean_do1.size() == mean_do0.size(), "arm predictions must have equal lengths");
  std::vector<double> tau(mean_do1.size());
  for (std::size_t i = 0; i < tau.size(); ++i)
    tau[i] = meta.denormalize_target(mean_do1[i]) - meta.denormalize_target(mean_do0[i]);
  return tau;
}

PartialAncestorMatrix unconfoundedness_pam_for(const CausalTask& task) {
  const auto features = task.feature_columns();
  const int p = static_cast<int>(features.size());
  const auto canonical = pam_from_unconfoundedness(p);
  std::vector<int> node_of(p + 2);
  for (int i = 0; i < p; ++i) node_of[i] = features[i];
  node_of[p] = task.treatment;
  node_of[p + 1] = task.outcome;
  PartialAncestorMatrix out(task.num_nodes(), task.roles());
  for (int i = 0; i < p + 2; ++i)
    for (int j = 0; j < p + 2; ++j)
      if (i != j) out.set(node_of[i], node_of[j], canonical(i, j));
  return out;
}

std::vector<double> estimate_cate(const Model<float>& model, const SemiSyntheticTask& data) {
  for (double t : data.t)
    require(t == 0.0 || t == 1.0, "CATE estimation requires a binary treatment");
  const int n = data.rows();
  const int p = static_cast<int>(data.covariates.cols());
  CausalTask raw;
  raw.treatment = p;
  raw.outcome = p + 1;
  raw.observational.resize(n, p + 2);
  raw.interventional.resize(2 * n, p + 2);
  for (int i = 0; i < n; ++i) {
    raw.observational.row(i).head(p) = data.covariates.row(i);
    raw.observational(i, p) = data.t[i];
    raw.observational(i, p + 1) = data.y[i];
    for (int arm = 0; arm < 2; ++arm) {
      const int r = arm * n + i;
      raw.interventional.row(r).head(p) = data.covariates.row(i);
      raw.interventional(r, p) = arm == 0 ? 1.0 : 0.0;
      raw.interventional(r, p + 1) = data.y[i];  // placeholder, excluded from the target statistics
    }
  }
  raw.adjacency = AdjacencyMatrix(p + 2);
  raw.ancestors = transitive_closure(raw.adjacency);
  PreprocessOptions options;
  options.keep_binary_treatment = true;
  options.target_stats_from_context = true;
  const auto task = normalize_task(raw, options);
  require(task.meta.treatment_binary, "CATE estimation requires a binary treatment");
  const auto pam = unconfoundedness_pam_for(task);
  const auto pred = predict_task(model, task, &pam, false);
  std::vector<double> m1(pred.mean.begin(), pred.mean.begin() + n), m0(pred.mean.begin() + n, pred.mean.end());
  return cate_from_arms(m1, m0, task.meta);
}

// ---------------------------------------------------------------------------

std::string to_string(PamMode mode) {
  switch (mode) {
    case PamMode::none: return "none";
    case PamMode::correct: return "correct";
    case PamMode::wrong: return "wrong";
  }
  return "none";
}

PamMode pam_mode_from_string(const std::string& s) {
  if (s == "none") return PamMode::none;
  if (s == "correct") return PamMode::correct;
  if (s == "wrong") return PamMode::wrong;
  throw ValidationError("unknown PAM mode '" + s + "' (expected none, correct, wrong)");
}

PartialAncestorMatrix bivariate_pam(PamMode mode) {
  PartialAncestorMatrix pam(2, {NodeRole::treatment, NodeRole::outcome});
  if (mode == PamMode::correct) {
    pam.set(0, 1, 1);
    pam.set(1, 0, -1);
  } else if (mode == PamMode::wrong) {
    pam.set(1, 0, 1);
    pam.set(0, 1, -1);
  }
  return pam;
}

namespace {

double normalize_feature(const NormalizationMeta& meta, int column, double v) {
  if (meta.feature_std[column] == 0.0) return 0.0;
  return (v - meta.feature_mean[column]) / meta.feature_std[column];
}

}  // namespace

BivariateData make_bivariate_data(double slope, double noise_std, int n_context, int n_queries,
                                  const std::vector<double>& t_grid, std::uint64_t seed) {
  require(n_context >= 2 && n_queries >= 1, "bivariate data needs at least two context rows and one query");
  require(noise_std >= 0.0, "noise_std must be non-negative");
  auto rng = make_rng(seed);
  CausalTask raw;
  raw.treatment = 0;
  raw.outcome = 1;
  raw.observational.resize(n_context, 2);
  for (int i = 0; i < n_context; ++i) {
    const double t = standard_normal(rng);
    raw.observational(i, 0) = t;
    raw.observational(i, 1) = slope * t + noise_std * standard_normal(rng);
  }
  const auto col = raw.observational.col(0);
  const double a = std::sqrt((col.array() - col.mean()).square().mean());
  raw.interventional.resize(n_queries, 2);
  for (int i = 0; i < n_queries; ++i) {
    const double t = uniform(rng, -4.0 * a, 4.0 * a);
    raw.interventional(i, 0) = t;
    raw.interventional(i, 1) = slope * t + noise_std * standard_normal(rng);
  }
  raw.adjacency = AdjacencyMatrix(2);
  raw.adjacency.set_edge(0, 1);
  raw.ancestors = transitive_closure(raw.adjacency);
  raw.seed = seed;
  raw.prior = "bivariate_linear";

  BivariateData data;
  data.raw = raw.observational;
  data.t_grid = t_grid;
  data.task = normalize_task(raw);
  data.grid_task = data.task;
  const auto& meta = data.task.meta;
  data.grid_task.interventional.resize(static_cast<Eigen::Index>(t_grid.size()), 2);
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    data.grid_task.interventional(r, 0) = meta.treatment_binary ? t_grid[i] : normalize_feature(meta, 0, t_grid[i]);
    data.grid_task.interventional(r, 1) =
        meta.normalize_target(slope * t_grid[i] + noise_std * standard_normal(rng));
  }
  return data;
}

DemoResult bivariate_demo(const Model<float>& model, const BivariateData& data, PamMode mode, int samples_per_point,
                          std::uint64_t seed) {
  DemoResult result;
  result.mode = mode;
  result.asserted_direction = mode == PamMode::none ? "unknown" : (mode == PamMode::correct ? "T->Y" : "Y->T");
  result.observational = data.raw;
  const auto pam = bivariate_pam(mode);
  const auto& meta = data.grid_task.meta;
  const auto in = make_model_input(data.grid_task, model.config().mode == ConditioningMode::none ? nullptr : &pam,
                                   model.config().max_features);
  Tape<float> tape(false);
  const auto res = model.forward(tape, in);
  const auto dists = model.distributions(tape, res.logits);
  for (std::size_t i = 0; i < data.t_grid.size(); ++i) {
    const auto& d = dists[i];
    DemoPoint pt;
    pt.t = data.t_grid[i];
    pt.mean = meta.denormalize_target(d.mean());
    pt.stddev = d.stddev() * meta.target_scale;
    pt.q05 = meta.denormalize_target(d.quantile(0.05));
    pt.q25 = meta.denormalize_target(d.quantile(0.25));
    pt.q50 = meta.denormalize_target(d.quantile(0.5));
    pt.q75 = meta.denormalize_target(d.quantile(0.75));
    pt.q95 = meta.denormalize_target(d.quantile(0.95));
    auto rng = make_rng(derive_seed(seed, "demo.samples", i));
    for (int s = 0; s < samples_per_point; ++s) pt.samples.push_back(meta.denormalize_target(d.sample_uniform(uniform(rng))));
    result.points.push_back(std::move(pt));
  }
  return result;
}

nlohmann::ordered_json demo_to_json(const std::vector<DemoResult>& results, double slope, double noise_std) {
  nlohmann::ordered_json j;
  j["slope"] = slope;
  j["noise_std"] = noise_std;
  j["modes"] = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    nlohmann::ordered_json m;
    m["mode"] = to_string(r.mode);
    m["asserted_direction"] = r.asserted_direction;
    m["points"] = nlohmann::ordered_json::array();
    for (const auto& p : r.points)
      m["points"].push_back({{"t", p.t},
                             {"mean", p.mean},
                             {"std", p.stddev},
                             {"q05", p.q05},
                             {"q25", p.q25},
                             {"q50", p.q50},
                             {"q75", p.q75},
                             {"q95", p.q95}});
    m["observational"] = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < r.observational.rows(); ++i)
      m["observational"].push_back({r.observational(i, 0), r.observational(i, 1)});
    j["modes"].push_back(m);
  }
  return j;
}

}  // namespace cfm
