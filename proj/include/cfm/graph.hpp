#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cfm/common.hpp"

namespace cfm {

enum class NodeRole : std::uint8_t { feature, treatment, outcome };

std::string to_string(NodeRole role);
NodeRole node_role_from_string(const std::string& s);

// Dense row-major K x K grid.
template <class T>
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(int size, T fill = T{})
      : size_(size), data_(static_cast<std::size_t>(size) * static_cast<std::size_t>(size), fill) {
    require(size >= 0, "matrix size must be non-negative");
  }

  int size() const { return size_; }
  T operator()(int i, int j) const { return data_[index(i, j)]; }
  T& operator()(int i, int j) { return data_[index(i, j)]; }
  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const SquareMatrix& a, const SquareMatrix& b) {
    return a.size_ == b.size_ && a.data_ == b.data_;
  }

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(size_) + static_cast<std::size_t>(j);
  }
  int size_ = 0;
  std::vector<T> data_;
};

// A(i, j) = 1 means a directed edge z_i -> z_j. Zero diagonal and 0/1 entries are
// enforced on construction; acyclicity is checked by the consumers that need it.
class AdjacencyMatrix {
 public:
  AdjacencyMatrix() = default;
  explicit AdjacencyMatrix(int size) : grid_(size, 0) {}
  explicit AdjacencyMatrix(SquareMatrix<std::uint8_t> grid);

  int size() const { return grid_.size(); }
  bool edge(int from, int to) const { return grid_(from, to) != 0; }
  void set_edge(int from, int to, bool present = true);
  int edge_count() const;
  std::vector<int> parents(int node) const;
  int in_degree(int node) const;

  // Empty when the graph is acyclic, otherwise the node sequence of one directed cycle.
  std::vector<int> find_cycle() const;
  bool is_acyclic() const { return find_cycle().empty(); }
  // Kahn order; throws if cyclic.
  std::vector<int> topological_order() const;

  const SquareMatrix<std::uint8_t>& grid() const { return grid_; }
  friend bool operator==(const AdjacencyMatrix& a, const AdjacencyMatrix& b) { return a.grid_ == b.grid_; }

 private:
  SquareMatrix<std::uint8_t> grid_;
};

class CycleError : public ValidationError {
 public:
  explicit CycleError(std::vector<int> cycle);
  const std::vector<int>& cycle() const { return cycle_; }

 private:
  std::vector<int> cycle_;
};

// T(i, j) = 1 iff z_i is an ancestor of z_j.
class AncestorMatrix {
 public:
  AncestorMatrix() = default;
  // Validates transitivity and off-diagonal antisymmetry.
  explicit AncestorMatrix(SquareMatrix<std::uint8_t> grid);

  int size() const { return grid_.size(); }
  bool is_ancestor(int i, int j) const { return grid_(i, j) != 0; }
  const SquareMatrix<std::uint8_t>& grid() const { return grid_; }
  friend bool operator==(const AncestorMatrix& a, const AncestorMatrix& b) { return a.grid_ == b.grid_; }

 private:
  friend AncestorMatrix transitive_closure(const AdjacencyMatrix& adjacency);
  struct Unchecked {};
  AncestorMatrix(SquareMatrix<std::uint8_t> grid, Unchecked) : grid_(std::move(grid)) {}
  SquareMatrix<std::uint8_t> grid_;
};

// Entries: +1 known ancestor, -1 known non-ancestor, 0 unknown. Entries are stored as
// given so that validate_pam can report out-of-range values; consumers validate first.
class PartialAncestorMatrix {
 public:
  PartialAncestorMatrix() = default;
  PartialAncestorMatrix(int size, std::vector<NodeRole> roles);
  PartialAncestorMatrix(SquareMatrix<std::int8_t> entries, std::vector<NodeRole> roles);

  int size() const { return entries_.size(); }
  int operator()(int i, int j) const { return entries_(i, j); }
  void set(int i, int j, int value) { entries_(i, j) = static_cast<std::int8_t>(value); }
  const std::vector<NodeRole>& roles() const { return roles_; }
  const SquareMatrix<std::int8_t>& entries() const { return entries_; }
  int count_off_diagonal(int value) const;

  friend bool operator==(const PartialAncestorMatrix& a, const PartialAncestorMatrix& b) {
    return a.entries_ == b.entries_ && a.roles_ == b.roles_;
  }

 private:
  SquareMatrix<std::int8_t> entries_;
  std::vector<NodeRole> roles_;
};

enum class BiasMode : std::uint8_t { soft, hard };

// Entry (i, j) is derived from PAM entry (i, j): it is the bias applied when token j
// attends to token i, i.e. when the key i is a (potential) ancestor of the query j.
// Attention layers therefore add bias(key, query) to the logit of (query, key).
class BiasMatrix {
 public:
  BiasMatrix(int size, BiasMode mode) : mode_(mode), values_(size, 0.0), masked_(size, 0) {}

  int size() const { return values_.size(); }
  BiasMode mode() const { return mode_; }
  bool masked(int i, int j) const { return masked_(i, j) != 0; }
  double value(int i, int j) const { return values_(i, j); }
  void set_value(int i, int j, double v) { values_(i, j) = v; }
  void set_masked(int i, int j) { masked_(i, j) = 1; }

  // Numeric entry at precision S; masked cells become the most negative finite value.
  template <class S>
  S at(int i, int j) const {
    return masked(i, j) ? std::numeric_limits<S>::lowest() : static_cast<S>(value(i, j));
  }

 private:
  BiasMode mode_;
  SquareMatrix<double> values_;
  SquareMatrix<std::uint8_t> masked_;
};

AncestorMatrix transitive_closure(const AdjacencyMatrix& adjacency);

// Maps T to a fully known PAM and hides round_half_even(fraction * K(K-1)) uniformly chosen
// off-diagonal entries. Mirrored entries are hidden independently.
PartialAncestorMatrix hide_entries(const AncestorMatrix& ancestors, double hide_fraction,
                                   std::uint64_t seed, std::vector<NodeRole> roles = {});

int hidden_entry_count(int size, double hide_fraction);

// Node order: x_1..x_K, t, y.
PartialAncestorMatrix pam_from_unconfoundedness(int num_covariates);

// Indicator masks consumed by the structural bias: `ancestor` has the PAM's +1 entries plus the
// diagonal, `non_ancestor` its -1 entries.
struct PamIndicators {
  SquareMatrix<std::uint8_t> ancestor;
  SquareMatrix<std::uint8_t> non_ancestor;
};
PamIndicators pam_indicators(const PartialAncestorMatrix& pam);

BiasMatrix pam_to_attention_bias(const PartialAncestorMatrix& pam, double beta_ancestor,
                                 double beta_non_ancestor, BiasMode mode);

enum class PamViolationKind : std::uint8_t { out_of_range, mutual_ancestry, transitivity_conflict, implied_cycle };

struct PamViolation {
  PamViolationKind kind;
  std::vector<int> nodes;
  std::string message;
};

struct PamValidationReport {
  std::vector<PamViolation> violations;
  bool ok() const { return violations.empty(); }
  std::size_t count(PamViolationKind kind) const;
};

PamValidationReport validate_pam(const PartialAncestorMatrix& pam);

// Text format: K, then K rows of space-separated integers, then "roles: r_0 ... r_{K-1}".
void write_pam(std::ostream& out, const PartialAncestorMatrix& pam);
PartialAncestorMatrix read_pam(std::istream& in);

// Same layout without the role line, for 0/1 matrices.
void write_binary_matrix(std::ostream& out, const SquareMatrix<std::uint8_t>& grid);
SquareMatrix<std::uint8_t> read_binary_matrix(std::istream& in);

}  // namespace cfm
