#include "cfm/scm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cfm/rng.hpp"

namespace cfm {

void Scm::check_invariants() const {
  require(static_cast<int>(mechanisms.size()) == num_nodes(), "SCM needs one mechanism per node");
  require(graph.is_acyclic(), "SCM graph must be acyclic");
  for (int k = 0; k < num_nodes(); ++k) {
    const auto& m = *mechanisms[k];
    if (m.kind == MechanismKind::constant) {
      require(graph.in_degree(k) == 0, "intervened node must have no incoming edges");
      continue;
    }
    require(m.parents == graph.parents(k), "mechanism parents must match graph column " + std::to_string(k));
    require(m.root == m.parents.empty(), "root flag must match an empty parent set");
  }
  require(static_cast<int>(order.size()) == num_nodes(), "SCM order must cover every node");
}

AdjacencyMatrix sample_dag(int min_nodes, int max_nodes, std::uint64_t seed, std::optional<double> forced_p) {
  require(min_nodes >= 2 && min_nodes <= max_nodes, "sample_dag requires 2 <= min_nodes <= max_nodes");
  auto rng = make_rng(seed);
  const int k = uniform_int(rng, min_nodes, max_nodes);
  const double p = forced_p ? *forced_p : beta(rng, 2.0, 3.0);
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  AdjacencyMatrix graph(k);
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b)
      if (uniform(rng) < p) graph.set_edge(perm[a], perm[b]);
  return graph;
}

std::vector<std::shared_ptr<const Mechanism>> sample_mechanisms(const AdjacencyMatrix& graph,
                                                                const MechanismComplexity& complexity,
                                                                std::uint64_t seed) {
  auto rng = make_rng(seed);
  const double tree_probability =
      complexity.tree_probability_support[categorical(rng, complexity.tree_probability_weights)];
  std::vector<std::shared_ptr<const Mechanism>> out;
  out.reserve(graph.size());
  for (int k = 0; k < graph.size(); ++k) {
    auto parents = graph.parents(k);
    const bool root = parents.empty();
    out.push_back(std::make_shared<const Mechanism>(
        sample_mechanism(std::move(parents), root, complexity, tree_probability, rng)));
  }
  return out;
}

namespace {

// Fills `row` (length K) by ancestral sampling along `order`. `override_node` >= 0 replaces
// that node's assignment by `override_value`. Returns false on a non-finite value.
bool sample_row(const Scm& scm, Rng& rng, double* row, int override_node, double override_value,
                std::vector<double>& scratch) {
  for (int node : scm.order) {
    const auto& m = *scm.mechanisms[node];
    const double noise = (m.root ? scm.exogenous : scm.endogenous).draw(rng);
    const double extra = standard_normal(rng);
    if (node == override_node) {
      row[node] = override_value;
      continue;
    }
    scratch.clear();
    for (int p : m.parents) scratch.push_back(row[p]);
    const double v = m.evaluate(scratch, noise, extra);
    row[node] = v;
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Table sample_rows(const Scm& scm, int n, Rng& rng, int override_node, const std::vector<double>* override_values) {
  require(n >= 1, "sample count must be at least 1");
  const int k = scm.num_nodes();
  // Row-major scratch, copied into the column-major table at the end.
  std::vector<double> buffer(static_cast<std::size_t>(n) * k);
  std::vector<double> scratch;
  for (int r = 0; r < n; ++r) {
    const double value = override_values ? (*override_values)[r] : 0.0;
    bool ok = false;
    for (int attempt = 0; attempt < kRetryCap && !ok; ++attempt)
      ok = sample_row(scm, rng, buffer.data() + static_cast<std::size_t>(r) * k, override_node, value, scratch);
    if (!ok) throw ScmRejected("non-finite values persisted after " + std::to_string(kRetryCap) + " row retries");
  }
  Table out(n, k);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < k; ++c) out(r, c) = buffer[static_cast<std::size_t>(r) * k + c];
  return out;
}

}  // namespace

void calibrate_standardization(Scm& scm, int rows, std::uint64_t seed) {
  auto rng = make_rng(seed);
  const int k = scm.num_nodes();
  // Nodes are calibrated in topological order so children see standardised parents.
  std::vector<std::shared_ptr<Mechanism>> editable(k);
  for (int i = 0; i < k; ++i) {
    editable[i] = std::make_shared<Mechanism>(*scm.mechanisms[i]);
    editable[i]->shift = 0.0;
    editable[i]->scale = 1.0;
    scm.mechanisms[i] = editable[i];
  }
  std::vector<double> table(static_cast<std::size_t>(rows) * k);
  std::vector<double> scratch;
  std::vector<std::vector<double>> noise(rows, std::vector<double>(2 * k));
  for (auto& row_noise : noise)
    for (int node : scm.order) {
      row_noise[2 * node] = (scm.mechanisms[node]->root ? scm.exogenous : scm.endogenous).draw(rng);
      row_noise[2 * node + 1] = standard_normal(rng);
    }
  for (int node : scm.order) {
    auto& m = *editable[node];
    double sum = 0.0, sum_sq = 0.0;
    for (int r = 0; r < rows; ++r) {
      double* row = table.data() + static_cast<std::size_t>(r) * k;
      scratch.clear();
      for (int p : m.parents) scratch.push_back(row[p]);
      const double v = m.evaluate_raw(scratch, noise[r][2 * node], noise[r][2 * node + 1]);
      if (!std::isfinite(v)) throw ScmRejected("non-finite value during standardisation calibration");
      row[node] = v;
      sum += v;
      sum_sq += v * v;
    }
    if (m.standardize && m.kind != MechanismKind::constant) {
      const double mean = sum / rows;
      const double var = std::max(0.0, sum_sq / rows - mean * mean);
      const double sd = std::sqrt(var);
      m.shift = mean;
      m.scale = (sd > 1e-12 && std::isfinite(sd)) ? sd : 1.0;
      for (int r = 0; r < rows; ++r) {
        double& v = table[static_cast<std::size_t>(r) * k + node];
        v = (v - m.shift) / m.scale;
      }
    }
  }
}

Scm sample_scm(const ComplexPriorConfig& config, std::uint64_t seed) {
  Scm scm;
  scm.graph = sample_dag(config.min_nodes, config.max_nodes, derive_seed(seed, "dag"));
  scm.exogenous = sample_noise_spec(NoiseKind::exogenous, derive_seed(seed, "noise.exogenous"));
  scm.endogenous = sample_noise_spec(NoiseKind::endogenous, derive_seed(seed, "noise.endogenous"));
  scm.mechanisms = sample_mechanisms(scm.graph, config.complexity, derive_seed(seed, "mechanisms"));
  scm.order = scm.graph.topological_order();
  calibrate_standardization(scm, config.calibration_rows, derive_seed(seed, "calibration"));
  return scm;
}

Scm make_linear_gaussian_scm(const AdjacencyMatrix& graph, std::uint64_t seed, int calibration_rows) {
  Scm scm;
  scm.graph = graph;
  scm.exogenous = sample_noise_spec(NoiseKind::exogenous, derive_seed(seed, "noise.exogenous"), NoiseFamily::normal);
  scm.endogenous =
      sample_noise_spec(NoiseKind::endogenous, derive_seed(seed, "noise.endogenous"), NoiseFamily::normal);
  auto rng = make_rng(derive_seed(seed, "mechanisms"));
  for (int k = 0; k < graph.size(); ++k) {
    Mechanism m;
    m.parents = graph.parents(k);
    m.root = m.parents.empty();
    m.kind = MechanismKind::mlp;
    m.nonlinearity = Nonlinearity::identity;
    m.placement = NoisePlacement::post_additive;
    m.standardize = true;
    m.layers.push_back(DenseLayer::sample(m.input_width(), 1, rng));
    scm.mechanisms.push_back(std::make_shared<const Mechanism>(std::move(m)));
  }
  scm.order = graph.topological_order();
  calibrate_standardization(scm, calibration_rows, derive_seed(seed, "calibration"));
  return scm;
}

Table ancestral_sample(const Scm& scm, int n, std::uint64_t seed) {
  auto rng = make_rng(seed);
  return sample_rows(scm, n, rng, -1, nullptr);
}

Scm intervene(const Scm& scm, int node, double value) {
  require(node >= 0 && node < scm.num_nodes(), "intervention node index out of range");
  Scm out = scm;
  for (int p = 0; p < out.num_nodes(); ++p)
    if (out.graph.edge(p, node)) out.graph.set_edge(p, node, false);
  auto constant = Mechanism::constant(value);
  constant.root = scm.mechanisms[node]->root;
  out.mechanisms[node] = std::make_shared<const Mechanism>(std::move(constant));
  out.order = out.graph.topological_order();
  return out;
}

Table sample_interventional(const Scm& scm, int treatment, int outcome, int n, const Table& observational,
                            std::uint64_t seed) {
  require(observational.rows() >= 1, "observational table must be non-empty");
  require(treatment != outcome, "treatment and outcome must differ");
  const auto col = observational.col(treatment);
  const double mean = col.mean();
  const double a = std::sqrt((col.array() - mean).square().mean());
  if (!(a > 0.0)) throw ScmRejected("constant treatment column: interventional support is empty");
  auto rng = make_rng(seed);
  std::vector<double> values(n);
  for (auto& v : values) v = uniform(rng, -4.0 * a, 4.0 * a);
  // Ancestral order of the unintervened graph stays valid after removing incoming edges of t.
  return sample_rows(scm, n, rng, treatment, &values);
}

}  // namespace cfm
