#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "cfm/noise.hpp"
#include "cfm/rng.hpp"
#include "cfm/scm.hpp"
#include "cfm/task.hpp"

using namespace cfm;

namespace {

double column_mean(const Eigen::VectorXd& v) { return v.mean(); }
double column_std(const Eigen::VectorXd& v) { return std::sqrt((v.array() - v.mean()).square().mean()); }

Scm slope_scm(double slope, double noise_std) {
  AdjacencyMatrix g(2);
  g.set_edge(0, 1);
  Scm scm;
  scm.graph = g;
  scm.exogenous = NoiseSpec{NoiseFamily::normal, NoiseKind::exogenous, 1.0};
  scm.endogenous = NoiseSpec{NoiseFamily::normal, NoiseKind::endogenous, noise_std};
  Mechanism t;
  t.root = true;
  t.layers.push_back(DenseLayer{1, 1, {1.0}, {0.0}});
  Mechanism y;
  y.parents = {0};
  y.layers.push_back(DenseLayer{1, 1, {slope}, {0.0}});
  scm.mechanisms = {std::make_shared<const Mechanism>(t), std::make_shared<const Mechanism>(y)};
  scm.order = g.topological_order();
  return scm;
}

}  // namespace

TEST(SampleDag, EdgeProbabilityExtremes) {
  const auto none = sample_dag(6, 6, 1, 0.0);
  EXPECT_EQ(none.edge_count(), 0);
  const auto full = sample_dag(6, 6, 2, 1.0);
  EXPECT_EQ(full.edge_count(), 15);
  EXPECT_TRUE(full.is_acyclic());
}

TEST(SampleDag, NodeCountWithinRangeAndAcyclic) {
  std::set<int> sizes;
  for (int s = 0; s < 300; ++s) {
    const auto g = sample_dag(3, 7, derive_seed(9, "dag", s));
    EXPECT_GE(g.size(), 3);
    EXPECT_LE(g.size(), 7);
    EXPECT_TRUE(g.is_acyclic());
    sizes.insert(g.size());
  }
  EXPECT_EQ(sizes.size(), 5u);
}

TEST(SampleDag, Deterministic) { EXPECT_EQ(sample_dag(2, 20, 77), sample_dag(2, 20, 77)); }

TEST(Noise, ZeroMeanAndRequestedStdPerFamily) {
  for (auto family : {NoiseFamily::normal, NoiseFamily::gamma, NoiseFamily::laplace, NoiseFamily::student_t,
                      NoiseFamily::gumbel, NoiseFamily::mixture}) {
    NoiseSpec spec{family, NoiseKind::exogenous, 0.7};
    auto rng = make_rng(derive_seed(4, to_string(family)));
    const int n = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = spec.draw(rng);
      s += x;
      s2 += x * x;
    }
    const double mean = s / n;
    const double sd = std::sqrt(s2 / n - mean * mean);
    EXPECT_NEAR(mean, 0.0, 0.01) << to_string(family);
    // Student-t with 5 dof has heavy tails, so its sample std converges slowly.
    EXPECT_NEAR(sd, 0.7, 0.03) << to_string(family);
  }
}

TEST(Noise, StudentTHasExcessKurtosis) {
  NoiseSpec spec{NoiseFamily::student_t, NoiseKind::exogenous, 1.0};
  auto rng = make_rng(5);
  const int n = 200000;
  double m2 = 0.0, m4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = spec.draw(rng);
    m2 += x * x;
    m4 += x * x * x * x;
  }
  m2 /= n;
  m4 /= n;
  EXPECT_GT(m4 / (m2 * m2), 4.0);
}

TEST(Noise, SampledStdPositive) {
  for (int s = 0; s < 500; ++s) {
    EXPECT_GT(sample_noise_spec(NoiseKind::exogenous, s).std, 0.0);
    EXPECT_GT(sample_noise_spec(NoiseKind::endogenous, s).std, 0.0);
  }
}

TEST(Scm, InterventionOnSlopeModel) {
  const auto scm = intervene(slope_scm(0.25, 1.0), 0, 2.0);
  const auto rows = ancestral_sample(scm, 40000, 6);
  for (int i = 0; i < rows.rows(); ++i) ASSERT_EQ(rows(i, 0), 2.0);
  EXPECT_NEAR(column_mean(rows.col(1)), 0.5, 0.02);
}

TEST(Scm, ChainPropagatesParentValues) {
  const auto rows = ancestral_sample(slope_scm(3.0, 0.0), 100, 7);
  for (int i = 0; i < rows.rows(); ++i) EXPECT_NEAR(rows(i, 1), 3.0 * rows(i, 0), 1e-12);
}

TEST(Scm, LinearGaussianNodesStandardised) {
  AdjacencyMatrix g(3);
  g.set_edge(0, 1);
  g.set_edge(1, 2);
  const auto scm = make_linear_gaussian_scm(g, 8, 4000);
  const auto rows = ancestral_sample(scm, 20000, 9);
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(column_mean(rows.col(k)), 0.0, 0.05);
    EXPECT_NEAR(column_std(rows.col(k)), 1.0, 0.05);
  }
}

TEST(Scm, InvariantsCatchParentMismatch) {
  auto scm = slope_scm(1.0, 0.1);
  EXPECT_NO_THROW(scm.check_invariants());
  scm.graph.set_edge(0, 1, false);
  EXPECT_THROW(scm.check_invariants(), ValidationError);
}

TEST(Scm, ComplexPriorDrawsAreFinite) {
  ComplexPriorConfig cfg;
  cfg.max_nodes = 10;
  int produced = 0;
  for (int s = 0; s < 20; ++s) {
    try {
      const auto scm = sample_scm(cfg, derive_seed(10, "complex", s));
      scm.check_invariants();
      const auto rows = ancestral_sample(scm, 200, s);
      EXPECT_TRUE(rows.allFinite());
      ++produced;
    } catch (const ScmRejected&) {
    }
  }
  EXPECT_GT(produced, 10);
}

TEST(Interventional, QueriesWithinFourStd) {
  const auto scm = slope_scm(0.5, 0.2);
  const auto obs = ancestral_sample(scm, 500, 11);
  const double a = column_std(obs.col(0));
  const auto q = sample_interventional(scm, 0, 1, 1000, obs, 12);
  EXPECT_LE(q.col(0).maxCoeff(), 4.0 * a);
  EXPECT_GE(q.col(0).minCoeff(), -4.0 * a);
  EXPECT_GT(q.col(0).maxCoeff(), 3.5 * a);
}

TEST(LinearGaussianTask, RelationHonoured) {
  for (auto rel : {PathRelation::treatment_to_outcome, PathRelation::outcome_to_treatment, PathRelation::no_path}) {
    for (int s = 0; s < 10; ++s) {
      const auto task = sample_linear_gaussian_task(5, rel, derive_seed(13, to_string(rel), s), {64, 32});
      EXPECT_EQ(relation_of(task.ancestors, task.treatment, task.outcome), rel);
      EXPECT_EQ(task.num_context(), 64);
      EXPECT_EQ(task.num_queries(), 32);
    }
  }
}

TEST(GenerateTask, RelationsBalanced) {
  PriorConfig cfg;
  cfg.node_counts = {5};
  cfg.linear = {16, 8};
  int counts[3] = {0, 0, 0};
  const int n = 600;
  for (int i = 0; i < n; ++i) {
    const auto task = generate_task(cfg, 14, i);
    ++counts[static_cast<int>(relation_of(task.ancestors, task.treatment, task.outcome))];
  }
  for (int c : counts) EXPECT_NEAR(c / double(n), 1.0 / 3.0, 0.06);
}

TEST(GenerateTask, DeterministicPerIndex) {
  PriorConfig cfg;
  cfg.node_counts = {2, 5};
  cfg.linear = {32, 16};
  const auto a = generate_task(cfg, 15, 3);
  const auto b = generate_task(cfg, 15, 3);
  EXPECT_EQ(a.observational, b.observational);
  EXPECT_EQ(a.interventional, b.interventional);
  EXPECT_NE(generate_task(cfg, 15, 4).observational, a.observational);
}

TEST(GenerateTask, NormalisedTargetInUnitRange) {
  PriorConfig cfg;
  cfg.node_counts = {5};
  cfg.linear = {64, 32};
  for (int i = 0; i < 30; ++i) {
    const auto task = generate_task(cfg, 16, i);
    ASSERT_TRUE(task.normalized);
    EXPECT_LE(task.observational.col(task.outcome).cwiseAbs().maxCoeff(), 1.0 + 1e-12);
    EXPECT_LE(task.interventional.col(task.outcome).cwiseAbs().maxCoeff(), 1.0 + 1e-12);
    EXPECT_FALSE(check_rejection(task).has_value());
  }
}

TEST(Preprocess, RejectsConstantTarget) {
  CausalTask raw = sample_linear_gaussian_task(3, PathRelation::treatment_to_outcome, 17, {64, 32});
  raw.observational.col(raw.outcome).setConstant(4.0);
  raw.interventional.col(raw.outcome).setConstant(4.0);
  const auto r = preprocess_task(raw);
  ASSERT_TRUE(std::holds_alternative<Rejection>(r));
  EXPECT_EQ(std::get<Rejection>(r).rule, RejectionRule::target_variance);
}

TEST(Preprocess, RejectsBinaryTarget) {
  CausalTask raw = sample_linear_gaussian_task(3, PathRelation::treatment_to_outcome, 18, {64, 32});
  for (Table* t : {&raw.observational, &raw.interventional})
    for (int i = 0; i < t->rows(); ++i) (*t)(i, raw.outcome) = (*t)(i, raw.outcome) > 0 ? 1.0 : 0.0;
  const auto r = preprocess_task(raw);
  ASSERT_TRUE(std::holds_alternative<Rejection>(r));
  EXPECT_EQ(std::get<Rejection>(r).rule, RejectionRule::target_uniqueness);
}

TEST(Preprocess, FeatureStatisticsAfterNormalisation) {
  CausalTask raw = sample_linear_gaussian_task(5, PathRelation::no_path, 19, {200, 100});
  raw.observational *= 3.0;
  raw.interventional *= 3.0;
  const auto task = normalize_task(raw);
  Table all(task.num_context() + task.num_queries(), task.num_nodes());
  all << task.observational, task.interventional;
  for (int c : task.feature_columns()) {
    EXPECT_NEAR(column_mean(all.col(c)), 0.0, 1e-9);
    EXPECT_NEAR(column_std(all.col(c)), 1.0, 1e-9);
  }
  // The clipped target spans [-1, 1] over all rows.
  EXPECT_NEAR(all.col(task.outcome).maxCoeff(), 1.0, 1e-12);
  EXPECT_NEAR(all.col(task.outcome).minCoeff(), -1.0, 1e-12);
}

TEST(Preprocess, DenormaliseRoundTrip) {
  const auto raw = sample_linear_gaussian_task(4, PathRelation::treatment_to_outcome, 20, {100, 50});
  const auto task = normalize_task(raw);
  for (double v : {-1.0, -0.3, 0.0, 0.6, 1.0})
    EXPECT_NEAR(task.meta.normalize_target(task.meta.denormalize_target(v)), v, 1e-9);
  for (int i = 0; i < raw.num_context(); ++i) {
    const double r = raw.observational(i, raw.outcome);
    if (r > task.meta.target_clip_low && r < task.meta.target_clip_high) {
      EXPECT_NEAR(task.meta.denormalize_target(task.observational(i, task.outcome)), r, 1e-9);
    }
  }
}

TEST(Quantile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({5, 1, 3}, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile({5, 1, 3}, 1.0), 5.0);
  EXPECT_DOUBLE_EQ(quantile({0, 10}, 0.25), 2.5);
}

TEST(TaskIo, RoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "cfm_test_task_io";
  std::filesystem::remove_all(dir);
  PriorConfig cfg;
  cfg.node_counts = {5};
  cfg.linear = {20, 10};
  const auto task = generate_task(cfg, 21, 0);
  save_task(task, dir);
  const auto back = load_task(dir);
  EXPECT_EQ(back.observational, task.observational);
  EXPECT_EQ(back.interventional, task.interventional);
  EXPECT_EQ(back.treatment, task.treatment);
  EXPECT_EQ(back.outcome, task.outcome);
  EXPECT_EQ(back.adjacency, task.adjacency);
  EXPECT_EQ(back.ancestors, task.ancestors);
  EXPECT_EQ(back.meta.target_scale, task.meta.target_scale);
  EXPECT_EQ(back.meta.target_offset, task.meta.target_offset);
  std::filesystem::remove_all(dir);
}

namespace {

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

std::vector<double> column(const Table& t, int c) { return {t.col(c).data(), t.col(c).data() + t.rows()}; }

}  // namespace

TEST(SampleDag, NodeCountUniformChiSquare) {
  // sample_scm draws its graph as sample_dag(min, max, derive_seed(seed, "dag")).
  std::vector<int> counts(51, 0);
  const int n = 10000;
  for (int s = 0; s < n; ++s) ++counts[sample_dag(2, 52, derive_seed(derive_seed(60, "scm", s), "dag")).size() - 2];
  double chi2 = 0.0;
  const double expect = n / 51.0;
  for (int c : counts) chi2 += (c - expect) * (c - expect) / expect;
  EXPECT_LT(chi2, 76.15);  // chi-square(50) at alpha = 0.01
}

TEST(SampleDag, EdgeDensityMatchesBetaMean) {
  double density = 0.0;
  for (int s = 0; s < 10000; ++s) density += sample_dag(10, 10, derive_seed(61, "density", s)).edge_count() / 45.0;
  EXPECT_NEAR(density / 10000, 0.4, 0.02);
}

TEST(Mechanism, DepthZeroIsAffineThenNonlinearity) {
  MechanismComplexity c;
  c.depth_support = {0};
  c.depth_weights = {1.0};
  for (int s = 0; s < 30; ++s) {
    auto rng = make_rng(derive_seed(62, "depth0", s));
    const auto m = sample_mechanism({0, 1}, false, c, 0.0, rng);
    ASSERT_EQ(m.kind, MechanismKind::mlp);
    ASSERT_EQ(m.layers.size(), 1u);
    if (m.placement != NoisePlacement::post_additive) continue;
    const std::vector<double> x{0.4, -1.3};
    const auto& l = m.layers[0];
    const double pre = l.weight[0] * x[0] + l.weight[1] * x[1] + l.bias[0];
    EXPECT_NEAR(m.evaluate_raw(x, 0.25, 0.0), apply_nonlinearity(m.nonlinearity, pre, m.gp.get()) + 0.25, 1e-12);
  }
}

TEST(Mechanism, GpFeaturesAtZero) {
  auto rng = make_rng(63);
  const auto gp = GpFeatureMap::sample(rng);
  const auto phi = gp.phi(0.0);
  double norm = 0.0;
  for (double w : gp.w()) norm += w * w;
  norm = std::sqrt(norm);
  double f = 0.0;
  for (int i = 0; i < GpFeatureMap::kFeatures; ++i) {
    EXPECT_NEAR(phi[i], gp.w()[i] * std::sin(gp.b()[i]) / norm, 1e-15);
    f += phi[i] * gp.z()[i];
  }
  EXPECT_NEAR(gp(0.0), f, 1e-12);
}

TEST(Mechanism, TreesClusterOutputs) {
  MechanismComplexity c;
  auto rng = make_rng(64);
  const auto m = sample_mechanism({0}, false, c, 1.0, rng);
  ASSERT_EQ(m.kind, MechanismKind::boosted_trees);
  std::set<double> outputs;
  auto probe = make_rng(65);
  for (int i = 0; i < 1000; ++i) {
    const double x = standard_normal(probe);
    outputs.insert(m.evaluate_raw(std::span<const double>(&x, 1), 0.0, 0.0));
  }
  EXPECT_LT(outputs.size(), 1000u);
}

TEST(Scm, SampleScmDeterministic) {
  ComplexPriorConfig cfg;
  cfg.max_nodes = 8;
  for (int s = 0; s < 5; ++s) {
    try {
      const auto a = sample_scm(cfg, derive_seed(66, "det", s));
      const auto b = sample_scm(cfg, derive_seed(66, "det", s));
      EXPECT_EQ(a.graph, b.graph);
      EXPECT_EQ(ancestral_sample(a, 50, 1), ancestral_sample(b, 50, 1));
    } catch (const ScmRejected&) {
    }
  }
}

TEST(Scm, SingleNodeMatchesNoiseThroughMechanism) {
  Scm scm;
  scm.graph = AdjacencyMatrix(1);
  scm.exogenous = NoiseSpec{NoiseFamily::gumbel, NoiseKind::exogenous, 1.3};
  Mechanism m;
  m.root = true;
  m.nonlinearity = Nonlinearity::silu;
  m.layers = {DenseLayer{1, 2, {0.7, -1.1}, {0.1, 0.2}}, DenseLayer{2, 1, {1.5, 0.5}, {-0.3}}};
  scm.mechanisms = {std::make_shared<const Mechanism>(m)};
  scm.order = {0};
  const auto rows = ancestral_sample(scm, 100000, 67);
  auto rng = make_rng(68);
  std::vector<double> oracle(1000000);
  for (auto& v : oracle) v = m.evaluate(std::span<const double>(), scm.exogenous.draw(rng), 0.0);
  EXPECT_LT(ks_two_sample(column(rows, 0), oracle), 0.01);
}

TEST(Scm, RelabellingNodesPreservesTheJointDistribution) {
  AdjacencyMatrix g(3);
  g.set_edge(0, 1);
  g.set_edge(0, 2);
  const auto scm = make_linear_gaussian_scm(g, 69);
  const std::vector<int> p{2, 0, 1};
  Scm re = scm;
  re.graph = AdjacencyMatrix(3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (g.edge(i, j)) re.graph.set_edge(p[i], p[j]);
  for (int k = 0; k < 3; ++k) {
    Mechanism m = *scm.mechanisms[k];
    for (auto& parent : m.parents) parent = p[parent];
    re.mechanisms[p[k]] = std::make_shared<const Mechanism>(m);
  }
  re.order = re.graph.topological_order();
  re.check_invariants();
  const auto a = ancestral_sample(scm, 10000, 70);
  const auto b = ancestral_sample(re, 10000, 71);
  for (int k = 0; k < 3; ++k) EXPECT_LT(ks_two_sample(column(a, k), column(b, p[k])), 0.03) << k;
  // Cross-moments carry the arrows as well as the marginals.
  EXPECT_NEAR((a.col(0).array() * a.col(1).array()).mean(), (b.col(p[0]).array() * b.col(p[1]).array()).mean(), 0.05);
}

TEST(Scm, InterventionCutsIncomingEdges) {
  AdjacencyMatrix g(3);
  g.set_edge(0, 1);
  g.set_edge(1, 2);
  const auto scm = make_linear_gaussian_scm(g, 72);
  const auto cut = intervene(scm, 1, 0.5);
  EXPECT_EQ(cut.graph.in_degree(1), 0);
  EXPECT_TRUE(cut.graph.edge(1, 2));
  // Clamping the root pins its column exactly.
  const auto root = intervene(scm, 0, 0.0);
  const auto rows = ancestral_sample(root, 20000, 73);
  EXPECT_EQ(rows.col(0).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Interventional, UnitStdSupportIsUniform) {
  Scm scm = slope_scm(0.5, 0.1);
  Table obs(2, 2);
  obs << -1.0, 0.0, 1.0, 0.0;  // population std exactly 1
  const auto q = sample_interventional(scm, 0, 1, 10000, obs, 74);
  std::vector<double> u = column(q, 0);
  for (double t : u) {
    ASSERT_GE(t, -4.0);
    ASSERT_LE(t, 4.0);
  }
  std::sort(u.begin(), u.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double cdf = (u[i] + 4.0) / 8.0;
    ks = std::max({ks, std::abs(cdf - double(i) / u.size()), std::abs(cdf - double(i + 1) / u.size())});
  }
  EXPECT_LT(ks, 0.02);
}

TEST(Preprocess, TargetScaleIgnoresInterventionalOutcomes) {
  // Otherwise the spread of the observational target would reveal whether t causes y.
  CausalTask raw = sample_linear_gaussian_task(2, PathRelation::treatment_to_outcome, 75, {64, 32});
  CausalTask shifted = raw;
  shifted.interventional.col(raw.outcome) *= 10.0;
  const auto a = normalize_task(raw);
  const auto b = normalize_task(shifted);
  EXPECT_EQ(a.meta.target_scale, b.meta.target_scale);
  EXPECT_EQ(a.meta.target_offset, b.meta.target_offset);
  EXPECT_EQ(a.observational, b.observational);
}
