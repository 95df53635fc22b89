#include "cfm/task.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <set>
#include <sstream>

#include "cfm/csv.hpp"
#include "cfm/rng.hpp"

namespace cfm {

double NormalizationMeta::normalize_target(double raw) const {
  return (std::clamp(raw, target_clip_low, target_clip_high) - target_offset) / target_scale;
}

double NormalizationMeta::denormalize_target(double normalized) const {
  return normalized * target_scale + target_offset;
}

std::vector<int> CausalTask::feature_columns() const {
  std::vector<int> out;
  for (int c = 0; c < num_nodes(); ++c)
    if (c != treatment && c != outcome) out.push_back(c);
  return out;
}

std::vector<NodeRole> CausalTask::roles() const {
  std::vector<NodeRole> roles(num_nodes(), NodeRole::feature);
  roles[treatment] = NodeRole::treatment;
  roles[outcome] = NodeRole::outcome;
  return roles;
}

std::string to_string(RejectionRule rule) {
  switch (rule) {
    case RejectionRule::target_variance: return "target_variance";
    case RejectionRule::target_uniqueness: return "target_uniqueness";
    case RejectionRule::constant_treatment: return "constant_treatment";
    case RejectionRule::non_finite: return "non_finite";
    case RejectionRule::relation: return "relation";
  }
  return "unknown";
}

double quantile(std::vector<double> values, double q) {
  require(!values.empty(), "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

CausalTask normalize_task(const CausalTask& raw, const PreprocessOptions& options) {
  CausalTask task = raw;
  const int k = raw.num_nodes();
  const Eigen::Index n_obs = raw.observational.rows();
  const Eigen::Index n_q = raw.interventional.rows();
  const double n_all = static_cast<double>(n_obs + n_q);
  auto& meta = task.meta;
  meta = NormalizationMeta{};
  meta.feature_mean.assign(k, 0.0);
  meta.feature_std.assign(k, 1.0);

  for (int c = 0; c < k; ++c) {
    if (c == raw.outcome) continue;
    const auto obs = raw.observational.col(c);
    const auto qry = raw.interventional.col(c);
    if (c == raw.treatment && options.keep_binary_treatment) {
      auto is_binary = [](double v) { return v == 0.0 || v == 1.0; };
      const bool binary = std::all_of(obs.begin(), obs.end(), is_binary) && std::all_of(qry.begin(), qry.end(), is_binary);
      if (binary) {
        meta.treatment_binary = true;
        continue;
      }
    }
    const double mean = (obs.sum() + qry.sum()) / n_all;
    const double var = ((obs.array() - mean).square().sum() + (qry.array() - mean).square().sum()) / n_all;
    const double sd = std::sqrt(var);
    meta.feature_mean[c] = mean;
    if (sd > 1e-12) {
      meta.feature_std[c] = sd;
      task.observational.col(c) = (obs.array() - mean) / sd;
      task.interventional.col(c) = (qry.array() - mean) / sd;
    } else {
      meta.feature_std[c] = 0.0;
      task.observational.col(c).setZero();
      task.interventional.col(c).setZero();
    }
  }

  std::vector<double> stats;
  for (Eigen::Index r = 0; r < n_obs; ++r) stats.push_back(raw.observational(r, raw.outcome));
  if (!options.target_stats_from_context)
    for (Eigen::Index r = 0; r < n_q; ++r) stats.push_back(raw.interventional(r, raw.outcome));
  if (stats.empty()) stats.push_back(0.0);
  meta.target_clip_low = quantile(stats, kClipLowQuantile);
  meta.target_clip_high = quantile(stats, kClipHighQuantile);
  const double lo = meta.target_clip_low;
  const double hi = meta.target_clip_high;
  meta.target_offset = 0.5 * (hi + lo);
  meta.target_scale = hi > lo ? 0.5 * (hi - lo) : 1.0;
  for (Eigen::Index r = 0; r < n_obs; ++r)
    task.observational(r, raw.outcome) = meta.normalize_target(raw.observational(r, raw.outcome));
  for (Eigen::Index r = 0; r < n_q; ++r)
    task.interventional(r, raw.outcome) = meta.normalize_target(raw.interventional(r, raw.outcome));
  task.normalized = true;
  return task;
}

std::optional<Rejection> check_rejection(const CausalTask& task) {
  if (!task.observational.allFinite() || !task.interventional.allFinite())
    return Rejection{RejectionRule::non_finite, "table contains non-finite values"};
  const Eigen::Index n_obs = task.observational.rows();
  const double n_all = static_cast<double>(n_obs + task.interventional.rows());
  const auto y_obs = task.observational.col(task.outcome);
  const auto y_q = task.interventional.col(task.outcome);
  const double y_mean = (y_obs.sum() + y_q.sum()) / n_all;
  const double y_var = ((y_obs.array() - y_mean).square().sum() + (y_q.array() - y_mean).square().sum()) / n_all;
  if (y_var < kMinTargetVariance) {
    std::ostringstream msg;
    msg << "normalised target variance " << y_var << " < " << kMinTargetVariance;
    return Rejection{RejectionRule::target_variance, msg.str()};
  }
  const std::set<double> unique(y_obs.begin(), y_obs.end());
  const double ratio = n_obs > 0 ? static_cast<double>(unique.size()) / static_cast<double>(n_obs) : 0.0;
  if (ratio < kMinUniqueTargetRatio) {
    std::ostringstream msg;
    msg << "unique target ratio " << ratio << " < " << kMinUniqueTargetRatio;
    return Rejection{RejectionRule::target_uniqueness, msg.str()};
  }
  return std::nullopt;
}

std::variant<CausalTask, Rejection> preprocess_task(const CausalTask& raw, const PreprocessOptions& options) {
  auto task = normalize_task(raw, options);
  if (auto rejection = check_rejection(task)) return *rejection;
  return task;
}

std::string to_string(PathRelation relation) {
  switch (relation) {
    case PathRelation::treatment_to_outcome: return "t_to_y";
    case PathRelation::outcome_to_treatment: return "y_to_t";
    case PathRelation::no_path: return "no_path";
  }
  return "no_path";
}

PathRelation path_relation_from_string(const std::string& s) {
  if (s == "t_to_y") return PathRelation::treatment_to_outcome;
  if (s == "y_to_t") return PathRelation::outcome_to_treatment;
  if (s == "no_path") return PathRelation::no_path;
  throw ValidationError("unknown path relation '" + s + "' (expected t_to_y, y_to_t, no_path)");
}

PathRelation relation_of(const AncestorMatrix& ancestors, int treatment, int outcome) {
  if (ancestors.is_ancestor(treatment, outcome)) return PathRelation::treatment_to_outcome;
  if (ancestors.is_ancestor(outcome, treatment)) return PathRelation::outcome_to_treatment;
  return PathRelation::no_path;
}

namespace {

CausalTask assemble_raw(const Scm& scm, int treatment, int outcome, int n_context, int n_queries, std::uint64_t seed,
                        std::string prior) {
  CausalTask raw;
  raw.observational = ancestral_sample(scm, n_context, derive_seed(seed, "observational"));
  raw.interventional =
      sample_interventional(scm, treatment, outcome, n_queries, raw.observational, derive_seed(seed, "interventional"));
  raw.treatment = treatment;
  raw.outcome = outcome;
  raw.adjacency = scm.graph;
  raw.ancestors = transitive_closure(scm.graph);
  raw.seed = seed;
  raw.prior = std::move(prior);
  return raw;
}

}  // namespace

CausalTask sample_linear_gaussian_task(int node_count, PathRelation relation, std::uint64_t seed,
                                       const LinearGaussianTaskOptions& options) {
  require(node_count >= 2, "linear-Gaussian tasks need at least two nodes");
  int relation_failures = 0;
  for (int attempt = 0; attempt < kRetryCap; ++attempt) {
    const auto s = derive_seed(seed, "attempt", static_cast<std::uint64_t>(attempt));
    const auto graph = sample_dag(node_count, node_count, derive_seed(s, "dag"));
    const auto closure = transitive_closure(graph);
    std::vector<std::pair<int, int>> pairs;
    for (int t = 0; t < node_count; ++t)
      for (int y = 0; y < node_count; ++y)
        if (t != y && relation_of(closure, t, y) == relation) pairs.emplace_back(t, y);
    if (pairs.empty()) {
      ++relation_failures;
      continue;
    }
    auto rng = make_rng(derive_seed(s, "roles"));
    const auto [t, y] = pairs[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(pairs.size()) - 1))];
    try {
      const auto scm = make_linear_gaussian_scm(graph, derive_seed(s, "scm"));
      auto result = preprocess_task(
          assemble_raw(scm, t, y, options.num_context, options.num_queries, s, "linear_gaussian"));
      if (auto* task = std::get_if<CausalTask>(&result)) return std::move(*task);
    } catch (const ScmRejected&) {
    }
  }
  if (relation_failures == kRetryCap)
    throw ValidationError("relation " + to_string(relation) + " unachievable for " + std::to_string(node_count) +
                          " nodes within the retry cap");
  throw RuntimeFailure("linear-Gaussian task rejected " + std::to_string(kRetryCap) + " times");
}

std::string to_string(PriorKind kind) { return kind == PriorKind::linear_gaussian ? "linear_gaussian" : "complex"; }

PriorKind prior_kind_from_string(const std::string& s) {
  if (s == "linear_gaussian") return PriorKind::linear_gaussian;
  if (s == "complex") return PriorKind::complex;
  throw ValidationError("unknown prior '" + s + "' (expected linear_gaussian or complex)");
}

std::string PriorConfig::identifier() const {
  std::ostringstream id;
  id << to_string(kind);
  if (kind == PriorKind::linear_gaussian) {
    id << "/nodes=";
    for (std::size_t i = 0; i < node_counts.size(); ++i) id << (i ? "," : "") << node_counts[i];
    id << "/ctx=" << linear.num_context << "/qry=" << linear.num_queries;
  } else {
    id << "/nodes=" << complex.min_nodes << ".." << complex.max_nodes << "/rows=" << total_rows;
  }
  return id.str();
}

CausalTask generate_task(const PriorConfig& config, std::uint64_t root_seed, std::uint64_t index) {
  const auto base = derive_seed(root_seed, "generation", index);
  if (config.kind == PriorKind::linear_gaussian) {
    require(!config.node_counts.empty(), "linear-Gaussian prior needs at least one node count");
    auto rng = make_rng(derive_seed(base, "node_count"));
    const int nodes = config.node_counts[static_cast<std::size_t>(
        uniform_int(rng, 0, static_cast<int>(config.node_counts.size()) - 1))];
    const auto relation = static_cast<PathRelation>(index % 3);
    for (int outer = 0; outer < 10; ++outer) {
      try {
        auto task = sample_linear_gaussian_task(nodes, relation, derive_seed(base, "outer", outer), config.linear);
        task.prior = config.identifier();
        return task;
      } catch (const ValidationError&) {
      } catch (const RuntimeFailure&) {
      }
    }
    throw RuntimeFailure("prior could not produce task " + std::to_string(index));
  }

  require(config.total_rows >= 3, "complex prior needs at least three rows per task");
  for (int attempt = 0; attempt < 10 * kRetryCap; ++attempt) {
    const auto s = derive_seed(base, "attempt", static_cast<std::uint64_t>(attempt));
    try {
      const auto scm = sample_scm(config.complex, derive_seed(s, "scm"));
      auto rng = make_rng(derive_seed(s, "roles"));
      const int k = scm.num_nodes();
      const int t = uniform_int(rng, 0, k - 1);
      int y = uniform_int(rng, 0, k - 2);
      if (y >= t) ++y;
      const int n_context = uniform_int(rng, 1, config.total_rows - 1);
      auto result = preprocess_task(assemble_raw(scm, t, y, n_context, config.total_rows - n_context, s,
                                                 config.identifier()));
      if (auto* task = std::get_if<CausalTask>(&result)) return std::move(*task);
    } catch (const ScmRejected&) {
    }
  }
  throw RuntimeFailure("prior could not produce task " + std::to_string(index));
}

// ---------------------------------------------------------------------------
// Directory IO

namespace {

void write_table(const std::filesystem::path& path, const Table& table, const std::vector<std::string>& header) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  write_csv_row(out, header);
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.cols(); ++c) {
      if (c) out << ',';
      out << table(r, c);
    }
    out << '\n';
  }
}

Table read_table(const std::filesystem::path& path, int expected_cols) {
  const auto csv = read_csv_file(path);
  require(static_cast<int>(csv.header.size()) == expected_cols,
          path.string() + ": expected " + std::to_string(expected_cols) + " columns");
  Table t(static_cast<Eigen::Index>(csv.rows.size()), expected_cols);
  for (std::size_t r = 0; r < csv.rows.size(); ++r)
    for (int c = 0; c < expected_cols; ++c) t(static_cast<Eigen::Index>(r), c) = csv.number(r, c);
  return t;
}

std::vector<std::string> column_names(const CausalTask& task) {
  std::vector<std::string> names;
  int f = 0;
  for (int c = 0; c < task.num_nodes(); ++c) {
    if (c == task.treatment) names.emplace_back("t");
    else if (c == task.outcome) names.emplace_back("y");
    else names.push_back("x" + std::to_string(f++));
  }
  return names;
}

}  // namespace

void save_task(const CausalTask& task, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw RuntimeFailure("cannot create " + dir.string() + ": " + ec.message());
  nlohmann::ordered_json meta;
  meta["num_nodes"] = task.num_nodes();
  meta["treatment"] = task.treatment;
  meta["outcome"] = task.outcome;
  nlohmann::ordered_json roles = nlohmann::ordered_json::array();
  for (auto r : task.roles()) roles.push_back(to_string(r));
  meta["roles"] = roles;
  meta["seed"] = task.seed;
  meta["prior"] = task.prior;
  meta["normalized"] = task.normalized;
  meta["normalization"] = {
      {"feature_mean", task.meta.feature_mean},
      {"feature_std", task.meta.feature_std},
      {"treatment_binary", task.meta.treatment_binary},
      {"target_clip_low", task.meta.target_clip_low},
      {"target_clip_high", task.meta.target_clip_high},
      {"target_scale", task.meta.target_scale},
      {"target_offset", task.meta.target_offset},
  };
  {
    std::ofstream out(dir / "meta.json");
    if (!out) throw RuntimeFailure("cannot write " + (dir / "meta.json").string());
    out << std::setw(2) << meta << '\n';
  }
  const auto names = column_names(task);
  write_table(dir / "obs.csv", task.observational, names);
  write_table(dir / "query.csv", task.interventional, names);
  std::ofstream adj(dir / "adjacency.txt");
  write_binary_matrix(adj, task.adjacency.grid());
  std::ofstream anc(dir / "ancestor.txt");
  write_binary_matrix(anc, task.ancestors.grid());
  if (!adj || !anc) throw RuntimeFailure("cannot write graph files in " + dir.string());
}

CausalTask load_task(const std::filesystem::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw RuntimeFailure("cannot read " + (dir / "meta.json").string());
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError((dir / "meta.json").string() + ": " + e.what());
  }
  CausalTask task;
  const int k = meta.at("num_nodes").get<int>();
  task.treatment = meta.at("treatment").get<int>();
  task.outcome = meta.at("outcome").get<int>();
  task.seed = meta.at("seed").get<std::uint64_t>();
  task.prior = meta.at("prior").get<std::string>();
  task.normalized = meta.at("normalized").get<bool>();
  const auto& nm = meta.at("normalization");
  task.meta.feature_mean = nm.at("feature_mean").get<std::vector<double>>();
  task.meta.feature_std = nm.at("feature_std").get<std::vector<double>>();
  task.meta.treatment_binary = nm.at("treatment_binary").get<bool>();
  task.meta.target_clip_low = nm.at("target_clip_low").get<double>();
  task.meta.target_clip_high = nm.at("target_clip_high").get<double>();
  task.meta.target_scale = nm.at("target_scale").get<double>();
  task.meta.target_offset = nm.at("target_offset").get<double>();
  task.observational = read_table(dir / "obs.csv", k);
  task.interventional = read_table(dir / "query.csv", k);
  std::ifstream adj(dir / "adjacency.txt");
  std::ifstream anc(dir / "ancestor.txt");
  if (!adj || !anc) throw RuntimeFailure("cannot read graph files in " + dir.string());
  task.adjacency = AdjacencyMatrix(read_binary_matrix(adj));
  task.ancestors = AncestorMatrix(read_binary_matrix(anc));
  require(task.adjacency.size() == k && task.ancestors.size() == k, dir.string() + ": graph size mismatch");
  return task;
}

}  // namespace cfm
