#include "cfm/graph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "cfm/rng.hpp"

namespace cfm {

std::string to_string(NodeRole role) {
  switch (role) {
    case NodeRole::feature: return "feature";
    case NodeRole::treatment: return "treatment";
    case NodeRole::outcome: return "outcome";
  }
  return "feature";
}

NodeRole node_role_from_string(const std::string& s) {
  if (s == "feature") return NodeRole::feature;
  if (s == "treatment") return NodeRole::treatment;
  if (s == "outcome") return NodeRole::outcome;
  throw ValidationError("unknown node role '" + s + "'");
}

// ---------------------------------------------------------------------------
// AdjacencyMatrix

AdjacencyMatrix::AdjacencyMatrix(SquareMatrix<std::uint8_t> grid) : grid_(std::move(grid)) {
  for (int i = 0; i < size(); ++i) {
    require(grid_(i, i) == 0, "adjacency matrix must have a zero diagonal");
    for (int j = 0; j < size(); ++j) require(grid_(i, j) <= 1, "adjacency entries must be 0 or 1");
  }
}

void AdjacencyMatrix::set_edge(int from, int to, bool present) {
  require(from != to, "self-loops are not allowed");
  grid_(from, to) = present ? 1 : 0;
}

int AdjacencyMatrix::edge_count() const {
  return static_cast<int>(std::count(grid_.data().begin(), grid_.data().end(), std::uint8_t{1}));
}

std::vector<int> AdjacencyMatrix::parents(int node) const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (edge(i, node)) out.push_back(i);
  return out;
}

int AdjacencyMatrix::in_degree(int node) const { return static_cast<int>(parents(node).size()); }

std::vector<int> AdjacencyMatrix::find_cycle() const {
  const int k = size();
  enum : std::uint8_t { white, grey, black };
  std::vector<std::uint8_t> colour(k, white);
  std::vector<int> parent(k, -1);
  // Iterative DFS; on a back edge u -> v the cycle is v ... u.
  for (int root = 0; root < k; ++root) {
    if (colour[root] != white) continue;
    std::vector<std::pair<int, int>> stack{{root, 0}};
    colour[root] = grey;
    while (!stack.empty()) {
      auto& [u, next] = stack.back();
      if (next == k) {
        colour[u] = black;
        stack.pop_back();
        continue;
      }
      const int v = next++;
      if (!edge(u, v)) continue;
      if (colour[v] == grey) {
        std::vector<int> cycle;
        for (int w = u; w != v; w = parent[w]) cycle.push_back(w);
        cycle.push_back(v);
        std::reverse(cycle.begin(), cycle.end());
        return cycle;
      }
      if (colour[v] == white) {
        colour[v] = grey;
        parent[v] = u;
        stack.emplace_back(v, 0);
      }
    }
  }
  return {};
}

std::vector<int> AdjacencyMatrix::topological_order() const {
  const int k = size();
  std::vector<int> indegree(k, 0);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) indegree[j] += edge(i, j) ? 1 : 0;
  std::vector<int> order;
  order.reserve(k);
  std::vector<int> ready;
  for (int i = k - 1; i >= 0; --i)
    if (indegree[i] == 0) ready.push_back(i);
  while (!ready.empty()) {
    const int u = ready.back();
    ready.pop_back();
    order.push_back(u);
    for (int v = k - 1; v >= 0; --v)
      if (edge(u, v) && --indegree[v] == 0) ready.push_back(v);
  }
  if (static_cast<int>(order.size()) != k) throw CycleError(find_cycle());
  return order;
}

CycleError::CycleError(std::vector<int> cycle)
    : ValidationError([&] {
        std::ostringstream msg;
        msg << "graph contains a directed cycle:";
        for (int v : cycle) msg << ' ' << v;
        if (!cycle.empty()) msg << ' ' << cycle.front();
        return msg.str();
      }()),
      cycle_(std::move(cycle)) {}

// ---------------------------------------------------------------------------
// AncestorMatrix

AncestorMatrix::AncestorMatrix(SquareMatrix<std::uint8_t> grid) : grid_(std::move(grid)) {
  const int k = size();
  for (int i = 0; i < k; ++i) {
    require(grid_(i, i) == 0, "ancestor matrix must have a zero diagonal");
    for (int j = 0; j < k; ++j) {
      require(grid_(i, j) <= 1, "ancestor entries must be 0 or 1");
      if (i != j && grid_(i, j) && grid_(j, i)) throw ValidationError("ancestor matrix is not antisymmetric");
      if (!grid_(i, j)) continue;
      for (int l = 0; l < k; ++l)
        if (grid_(j, l) && !grid_(i, l) && i != l) throw ValidationError("ancestor matrix is not transitive");
    }
  }
}

AncestorMatrix transitive_closure(const AdjacencyMatrix& adjacency) {
  const auto order = adjacency.topological_order();
  const int k = adjacency.size();
  SquareMatrix<std::uint8_t> reach(k, 0);
  // Reverse topological order: every child's descendant set is final before its parents use it.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int u = *it;
    for (int v = 0; v < k; ++v) {
      if (!adjacency.edge(u, v)) continue;
      reach(u, v) = 1;
      for (int w = 0; w < k; ++w) reach(u, w) |= reach(v, w);
    }
  }
  return AncestorMatrix(std::move(reach), AncestorMatrix::Unchecked{});
}

// ---------------------------------------------------------------------------
// PartialAncestorMatrix

PartialAncestorMatrix::PartialAncestorMatrix(int size, std::vector<NodeRole> roles)
    : PartialAncestorMatrix(SquareMatrix<std::int8_t>(size, 0), std::move(roles)) {}

PartialAncestorMatrix::PartialAncestorMatrix(SquareMatrix<std::int8_t> entries, std::vector<NodeRole> roles)
    : entries_(std::move(entries)), roles_(std::move(roles)) {
  if (roles_.empty()) roles_.assign(entries_.size(), NodeRole::feature);
  require(static_cast<int>(roles_.size()) == entries_.size(), "PAM role count must equal matrix size");
}

int PartialAncestorMatrix::count_off_diagonal(int value) const {
  int n = 0;
  for (int i = 0; i < size(); ++i)
    for (int j = 0; j < size(); ++j)
      if (i != j && entries_(i, j) == value) ++n;
  return n;
}

int hidden_entry_count(int size, double hide_fraction) {
  const double off_diagonal = static_cast<double>(size) * static_cast<double>(size - 1);
  // nearbyint under the default rounding mode rounds half to even.
  return static_cast<int>(std::nearbyint(hide_fraction * off_diagonal));
}

PartialAncestorMatrix hide_entries(const AncestorMatrix& ancestors, double hide_fraction, std::uint64_t seed,
                                   std::vector<NodeRole> roles) {
  require(hide_fraction >= 0.0 && hide_fraction <= 1.0, "hide_fraction must lie in [0, 1]");
  const int k = ancestors.size();
  PartialAncestorMatrix pam(k, std::move(roles));
  std::vector<std::pair<int, int>> cells;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      if (i == j) continue;
      pam.set(i, j, ancestors.is_ancestor(i, j) ? 1 : -1);
      cells.emplace_back(i, j);
    }
  auto rng = make_rng(seed);
  std::shuffle(cells.begin(), cells.end(), rng);
  const int hidden = hidden_entry_count(k, hide_fraction);
  for (int n = 0; n < hidden; ++n) pam.set(cells[n].first, cells[n].second, 0);
  return pam;
}

PartialAncestorMatrix pam_from_unconfoundedness(int num_covariates) {
  require(num_covariates >= 1, "num_covariates must be at least 1");
  const int k = num_covariates + 2;
  const int t = num_covariates;
  const int y = num_covariates + 1;
  std::vector<NodeRole> roles(k, NodeRole::feature);
  roles[t] = NodeRole::treatment;
  roles[y] = NodeRole::outcome;
  PartialAncestorMatrix pam(k, roles);
  pam.set(t, y, 1);
  pam.set(y, t, -1);
  for (int i = 0; i < num_covariates; ++i) {
    pam.set(i, t, 1);
    pam.set(i, y, 1);
    pam.set(t, i, -1);
    pam.set(y, i, -1);
  }
  return pam;
}

PamIndicators pam_indicators(const PartialAncestorMatrix& pam) {
  const int k = pam.size();
  PamIndicators out{SquareMatrix<std::uint8_t>(k, 0), SquareMatrix<std::uint8_t>(k, 0)};
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      const int v = (i == j) ? 1 : pam(i, j);
      out.ancestor(i, j) = v == 1;
      out.non_ancestor(i, j) = v == -1;
    }
  return out;
}

BiasMatrix pam_to_attention_bias(const PartialAncestorMatrix& pam, double beta_ancestor, double beta_non_ancestor,
                                 BiasMode mode) {
  require(beta_ancestor >= 0.0 && beta_non_ancestor >= 0.0, "structural bias magnitudes must be non-negative");
  const auto report = validate_pam(pam);
  if (!report.ok()) throw ValidationError("invalid PAM: " + report.violations.front().message);
  const auto ind = pam_indicators(pam);
  const int k = pam.size();
  BiasMatrix bias(k, mode);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      if (mode == BiasMode::soft) {
        if (ind.ancestor(i, j)) bias.set_value(i, j, beta_ancestor);
        if (ind.non_ancestor(i, j)) bias.set_value(i, j, -beta_non_ancestor);
      } else if (ind.non_ancestor(i, j)) {
        bias.set_masked(i, j);
      }
    }
  return bias;
}

std::size_t PamValidationReport::count(PamViolationKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(violations.begin(), violations.end(), [&](const auto& v) { return v.kind == kind; }));
}

PamValidationReport validate_pam(const PartialAncestorMatrix& pam) {
  PamValidationReport report;
  const int k = pam.size();
  bool in_range = true;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      if (pam(i, j) < -1 || pam(i, j) > 1) {
        in_range = false;
        report.violations.push_back({PamViolationKind::out_of_range, {i, j},
                                     "entry (" + std::to_string(i) + "," + std::to_string(j) + ") = " +
                                         std::to_string(pam(i, j)) + " is outside {-1,0,1}"});
      }
  if (!in_range) return report;

  std::vector<std::uint8_t> in_mutual(k, 0);
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j)
      if (pam(i, j) == 1 && pam(j, i) == 1) {
        in_mutual[i] = in_mutual[j] = 1;
        report.violations.push_back({PamViolationKind::mutual_ancestry, {i, j},
                                     "nodes " + std::to_string(i) + " and " + std::to_string(j) +
                                         " are both marked as ancestors of each other"});
      }

  // Closure of the known-ancestor relation.
  SquareMatrix<std::uint8_t> reach(k, 0);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) reach(i, j) = (i != j && pam(i, j) == 1);
  for (int m = 0; m < k; ++m)
    for (int i = 0; i < k; ++i)
      if (reach(i, m))
        for (int j = 0; j < k; ++j) reach(i, j) |= reach(m, j);

  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      if (i != j && reach(i, j) && pam(i, j) == -1)
        report.violations.push_back({PamViolationKind::transitivity_conflict, {i, j},
                                     "known ancestry entails " + std::to_string(i) + " ~> " + std::to_string(j) +
                                         " but the entry is -1"});

  // Longer cycles, one report per strongly connected group not already covered by a mutual pair.
  std::vector<std::uint8_t> reported(k, 0);
  for (int i = 0; i < k; ++i) {
    if (!reach(i, i) || reported[i]) continue;
    std::vector<int> group;
    for (int j = 0; j < k; ++j)
      if (j == i || (reach(i, j) && reach(j, i))) group.push_back(j);
    bool covered = false;
    for (int j : group) {
      reported[j] = 1;
      covered = covered || in_mutual[j];
    }
    if (covered) continue;
    std::ostringstream msg;
    msg << "known ancestry implies a directed cycle through nodes";
    for (int j : group) msg << ' ' << j;
    report.violations.push_back({PamViolationKind::implied_cycle, group, msg.str()});
  }
  return report;
}

// ---------------------------------------------------------------------------
// Text IO

namespace {

template <class T>
void write_grid(std::ostream& out, const SquareMatrix<T>& grid) {
  out << grid.size() << '\n';
  for (int i = 0; i < grid.size(); ++i) {
    for (int j = 0; j < grid.size(); ++j) {
      if (j) out << ' ';
      out << static_cast<int>(grid(i, j));
    }
    out << '\n';
  }
}

template <class T>
SquareMatrix<T> read_grid(std::istream& in, int lo, int hi) {
  int k = -1;
  if (!(in >> k) || k < 0) throw ValidationError("matrix file: expected a non-negative size on the first line");
  SquareMatrix<T> grid(k, 0);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      int v = 0;
      if (!(in >> v)) throw ValidationError("matrix file: truncated at row " + std::to_string(i));
      if (v < lo || v > hi) throw ValidationError("matrix file: entry out of range at row " + std::to_string(i));
      grid(i, j) = static_cast<T>(v);
    }
  return grid;
}

}  // namespace

void write_pam(std::ostream& out, const PartialAncestorMatrix& pam) {
  write_grid(out, pam.entries());
  out << "roles:";
  for (auto r : pam.roles()) out << ' ' << to_string(r);
  out << '\n';
}

PartialAncestorMatrix read_pam(std::istream& in) {
  auto grid = read_grid<std::int8_t>(in, -1, 1);
  std::string tag;
  std::vector<NodeRole> roles;
  if (in >> tag) {
    require(tag == "roles:", "PAM file: expected 'roles:' line after the matrix");
    for (int i = 0; i < grid.size(); ++i) {
      std::string r;
      require(static_cast<bool>(in >> r), "PAM file: role line is shorter than the matrix size");
      roles.push_back(node_role_from_string(r));
    }
  }
  return PartialAncestorMatrix(std::move(grid), std::move(roles));
}

void write_binary_matrix(std::ostream& out, const SquareMatrix<std::uint8_t>& grid) { write_grid(out, grid); }

SquareMatrix<std::uint8_t> read_binary_matrix(std::istream& in) { return read_grid<std::uint8_t>(in, 0, 1); }

}  // namespace cfm
