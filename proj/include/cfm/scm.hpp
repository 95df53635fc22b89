#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "cfm/graph.hpp"
#include "cfm/mechanism.hpp"
#include "cfm/noise.hpp"

namespace cfm {

using Table = Eigen::MatrixXd;  // rows = samples, columns = nodes

// Raised when an SCM cannot produce a usable dataset; the caller draws a fresh SCM.
class ScmRejected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kRetryCap = 100;

struct Scm {
  AdjacencyMatrix graph;
  std::vector<std::shared_ptr<const Mechanism>> mechanisms;
  NoiseSpec exogenous;
  NoiseSpec endogenous;
  std::vector<int> order;

  int num_nodes() const { return graph.size(); }
  // Throws ValidationError when mechanism parents disagree with the graph or the graph is cyclic.
  void check_invariants() const;
};

// K ~ U{min..max}, p ~ Beta(2,3) unless forced, edges oriented along a random permutation.
AdjacencyMatrix sample_dag(int min_nodes, int max_nodes, std::uint64_t seed,
                           std::optional<double> forced_edge_probability = std::nullopt);

std::vector<std::shared_ptr<const Mechanism>> sample_mechanisms(const AdjacencyMatrix& graph,
                                                                const MechanismComplexity& complexity,
                                                                std::uint64_t seed);

struct ComplexPriorConfig {
  int min_nodes = 2;
  int max_nodes = 52;
  MechanismComplexity complexity{};
  int calibration_rows = 512;
};

Scm sample_scm(const ComplexPriorConfig& config, std::uint64_t seed);

// Linear mechanisms, Gaussian noise, every node standardised after its assignment.
Scm make_linear_gaussian_scm(const AdjacencyMatrix& graph, std::uint64_t seed, int calibration_rows = 512);

// Fixes the frozen standardisation constants of every node with standardize = true by running
// the SCM on `rows` calibration samples.
void calibrate_standardization(Scm& scm, int rows, std::uint64_t seed);

Table ancestral_sample(const Scm& scm, int n, std::uint64_t seed);

Scm intervene(const Scm& scm, int node, double value);

// Interventional query rows: t ~ U(-4a, 4a) with a the empirical std of the observational
// treatment column, each row propagated through do(t) with fresh noise.
Table sample_interventional(const Scm& scm, int treatment, int outcome, int n, const Table& observational,
                            std::uint64_t seed);

}  // namespace cfm
