#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cfm/evaluation.hpp"
#include "cfm/rng.hpp"

using namespace cfm;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny(ConditioningMode mode) {
  ModelConfig c;
  c.d_model = 16;
  c.num_layers = 1;
  c.num_heads = 2;
  c.max_features = 4;
  c.num_bins = 48;
  c.mode = mode;
  return c;
}

std::vector<CausalTask> small_tasks(int n, std::uint64_t seed) {
  PriorConfig p;
  p.node_counts = {2, 5};
  p.linear = {24, 10};
  std::vector<CausalTask> out;
  for (int i = 0; i < n; ++i) out.push_back(generate_task(p, seed, i));
  return out;
}

std::vector<double> randoms(int n, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = standard_normal(rng);
  return v;
}

fs::path write_temp(const std::string& name, const std::string& content) {
  const auto p = fs::temp_directory_path() / name;
  std::ofstream(p) << content;
  return p;
}

SemiSyntheticTask synthetic_psid_shape(int treated, int untreated) {
  SemiSyntheticTask t;
  t.covariate_names = {"x"};
  t.covariates.resize(treated + untreated, 1);
  for (int i = 0; i < treated + untreated; ++i) {
    const double x = i;
    t.covariates(i, 0) = x;
    const bool tr = i < treated;
    t.t.push_back(tr ? 1.0 : 0.0);
    t.y0.push_back(x);
    t.y1.push_back(x + 1.0);
    t.y.push_back(tr ? x + 1.0 : x);
  }
  return t;
}

}  // namespace

TEST(Metrics, ConstantMeanPredictorHasZeroR2) {
  const std::vector<double> y{1.0, 3.0, -2.0, 4.5, 0.5};
  const std::vector<double> pred(y.size(), mean(y));
  EXPECT_NEAR(r_squared(pred, y), 0.0, 1e-15);
  EXPECT_EQ(mean_squared_error(y, y), 0.0);
  EXPECT_EQ(r_squared(y, y), 1.0);
  EXPECT_THROW(r_squared(y, std::vector<double>(5, 2.0)), ValidationError);
}

TEST(Metrics, PeheAndAteError) {
  const auto tau = randoms(50, 1);
  EXPECT_EQ(pehe(tau, tau), 0.0);
  EXPECT_EQ(ate_error(tau, tau), 0.0);
  std::vector<double> shifted = tau;
  for (auto& v : shifted) v += 2.0;
  EXPECT_NEAR(pehe(shifted, tau), 2.0, 1e-12);
  EXPECT_NEAR(ate_error(std::vector<double>(4, 0.0), {1.0, 2.0, 3.0, 2.0}), 1.0, 1e-15);
  EXPECT_THROW(pehe({1.0}, {1.0, 2.0}), ValidationError);
}

TEST(Metrics, FormulaOracle) {
  const auto a = randoms(200, 2), b = randoms(200, 3);
  long double se = 0, mb = 0, ma = 0;
  for (int i = 0; i < 200; ++i) {
    se += (static_cast<long double>(a[i]) - b[i]) * (static_cast<long double>(a[i]) - b[i]);
    mb += b[i];
    ma += a[i];
  }
  mb /= 200;
  ma /= 200;
  long double sst = 0;
  for (double v : b) sst += (v - mb) * (v - mb);
  EXPECT_NEAR(mean_squared_error(a, b), static_cast<double>(se / 200), 1e-14);
  EXPECT_NEAR(r_squared(a, b), static_cast<double>(1 - se / sst), 1e-14);
  EXPECT_NEAR(pehe(a, b), static_cast<double>(std::sqrt(se / 200)), 1e-14);
  EXPECT_NEAR(ate_error(a, b), static_cast<double>(std::fabs((ma - mb) / mb)), 1e-12);
}

TEST(Metrics, MedianAndMean) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_EQ(mean({1.0, 2.0, 6.0}), 3.0);
}

TEST(Bootstrap, ContainsEstimateAndShrinks) {
  const auto small = randoms(20, 4), large = randoms(2000, 5);
  for (auto stat : {Statistic::mean, Statistic::median}) {
    const auto a = bootstrap_ci(small, stat, 6);
    const auto b = bootstrap_ci(large, stat, 6);
    EXPECT_LE(a.lower, a.estimate);
    EXPECT_GE(a.upper, a.estimate);
    EXPECT_LT(b.upper - b.lower, a.upper - a.lower);
    EXPECT_EQ(a.level, 0.95);
  }
  const auto m = bootstrap_ci(large, Statistic::mean, 7);
  EXPECT_NEAR(m.estimate, mean(large), 1e-15);
  // Half-width close to 1.96 standard errors.
  EXPECT_NEAR((m.upper - m.lower) / 2, 1.96 / std::sqrt(2000.0), 0.01);
  EXPECT_EQ(bootstrap_ci(large, Statistic::mean, 7).lower, m.lower);
}

TEST(Bootstrap, PairedDeltaSign) {
  auto base = randoms(100, 8);
  std::vector<double> cand = base;
  for (auto& v : cand) v -= 0.5;
  const auto d = paired_delta(cand, base, Statistic::mean, 9);
  EXPECT_NEAR(d.estimate, -0.5, 1e-12);
  EXPECT_LT(d.upper, 0.0);
}

TEST(Predict, MetricsMatchIndependentOracle) {
  const Model<float> model(tiny(ConditioningMode::soft_bias), 10);
  const auto tasks = small_tasks(10, 11);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& task = tasks[i];
    const auto pam = hide_entries(task.ancestors, 0.3, i, task.roles());
    const auto pred = predict_task(model, task, &pam);
    const auto m = task_metrics(pred, task);

    Tape<float> tape(false);
    const Mat<float> logits = tape.value(model.forward(tape, make_model_input(task, &pam, 4)).logits);
    const auto& edges = model.bins().edges();
    long double nll = 0, se = 0, my = 0, sst = 0;
    const int n = task.num_queries();
    for (int r = 0; r < n; ++r) my += task.interventional(r, task.outcome);
    my /= n;
    for (int r = 0; r < n; ++r) {
      long double mx = logits.row(r).maxCoeff(), z = 0, mu = 0;
      for (int k = 0; k < logits.cols(); ++k) z += std::exp(static_cast<long double>(logits(r, k)) - mx);
      for (int k = 0; k < logits.cols(); ++k)
        mu += std::exp(static_cast<long double>(logits(r, k)) - mx) / z * 0.5L * (edges[k] + edges[k + 1]);
      const double y = task.interventional(r, task.outcome);
      int bin = 0;
      while (bin + 1 < logits.cols() && y >= edges[bin + 1]) ++bin;
      nll += -(static_cast<long double>(logits(r, bin)) - mx - std::log(z)) + std::log(edges[bin + 1] - edges[bin]);
      se += (mu - y) * (mu - y);
      sst += (y - my) * (y - my);
    }
    EXPECT_NEAR(m.nll, static_cast<double>(nll / n), 1e-5) << i;
    EXPECT_NEAR(m.mse, static_cast<double>(se / n), 1e-6) << i;
    ASSERT_TRUE(m.r2.has_value());
    EXPECT_NEAR(*m.r2, static_cast<double>(1 - se / sst), 1e-5) << i;
  }
}

TEST(Predict, ChunkedQueriesMatchSingleBatch) {
  const Model<float> model(tiny(ConditioningMode::none), 12);
  PriorConfig p;
  p.node_counts = {3};
  p.linear = {16, 1100};
  const auto task = generate_task(p, 13, 0);
  const auto full = predict_task(model, task, nullptr);
  auto head = task;
  head.interventional = task.interventional.topRows(7);
  const auto part = predict_task(model, head, nullptr);
  for (int r = 0; r < 7; ++r) EXPECT_NEAR(part.mean[r], full.mean[r], 1e-6);
  ASSERT_EQ(full.mean.size(), 1100u);
  auto tail = task;
  tail.interventional = task.interventional.bottomRows(3);
  const auto end = predict_task(model, tail, nullptr);
  for (int r = 0; r < 3; ++r) EXPECT_NEAR(end.nll[r], full.nll[1097 + r], 1e-5);
}

TEST(EvalPredictive, StrataAndReport) {
  const Model<float> model(tiny(ConditioningMode::soft_bias), 14);
  const auto tasks = small_tasks(6, 15);
  const auto report = eval_predictive(model, tasks, {0.0, 0.5, 1.0}, 16);
  ASSERT_EQ(report.strata.size(), 3u);
  for (const auto& s : report.strata) {
    EXPECT_EQ(s.tasks.size(), 6u);
    EXPECT_LE(s.nll_mean.lower, s.nll_mean.upper);
  }
  EXPECT_EQ(report.strata[1].hide_fraction, 0.5);
  const auto again = eval_predictive(model, tasks, {0.0, 0.5, 1.0}, 16);
  EXPECT_EQ(report_to_json(again).dump(), report_to_json(report).dump());

  const auto j = report_to_json(report);
  ASSERT_EQ(j["strata"].size(), 3u);
  EXPECT_EQ(j["strata"][2]["num_tasks"], 6);
  const auto csv = fs::temp_directory_path() / "cfm_eval_report.csv";
  const auto json = fs::temp_directory_path() / "cfm_eval_report.json";
  write_report(report, csv, json);
  std::ifstream in(csv);
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 18);
}

TEST(EvalPredictive, FullPamUnderHardMaskDiffersFromHidden) {
  const Model<float> model(tiny(ConditioningMode::hard_mask), 17);
  const auto tasks = small_tasks(4, 18);
  const auto r = eval_predictive(model, tasks, {0.0, 1.0}, 19);
  double diff = 0.0;
  for (int i = 0; i < 4; ++i) diff += std::abs(r.strata[0].tasks[i].nll - r.strata[1].tasks[i].nll);
  EXPECT_GT(diff, 0.0);
}

TEST(SemiSynthetic, FixtureLoadsWithKnownAte) {
  const auto task = load_semisynthetic(fs::path(CFM_TEST_DATA) / "ate_10.csv");
  EXPECT_EQ(task.rows(), 10);
  EXPECT_NEAR(task.true_ate(), 2.06, 1e-12);
  EXPECT_EQ(task.covariate_names, std::vector<std::string>{"x1"});
  EXPECT_EQ(task.t[0], 1.0);
  EXPECT_EQ(task.y[0], 3.2);
}

TEST(SemiSynthetic, FactualViolationRejected) {
  const auto ok = write_temp("cfm_ok.csv", "x,t,y,y0,y1\n0.1,1,3.2,1.1,3.2\n0.2,0,1.0,1.0,2.0\n");
  EXPECT_NO_THROW(load_semisynthetic(ok));
  const auto bad = write_temp("cfm_bad.csv", "x,t,y,y0,y1\n0.1,1,3.2,1.1,3.2\n0.2,0,3.2,1.1,2.0\n");
  try {
    load_semisynthetic(bad);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
  }
  const auto missing = write_temp("cfm_missing.csv", "x,t,y,y0\n0.1,1,3.2,1.1\n");
  EXPECT_THROW(load_semisynthetic(missing), ValidationError);
  const auto nonbinary = write_temp("cfm_nonbinary.csv", "x,t,y,y0,y1\n0.1,0.5,3.2,1.1,3.2\n");
  EXPECT_THROW(load_semisynthetic(nonbinary), ValidationError);
}

TEST(SemiSynthetic, RebalanceCounts) {
  const auto psid = synthetic_psid_shape(141, 2266);
  const auto a = rebalance(psid, 500, 1);
  EXPECT_EQ(a.rows(), 641);
  int treated = 0;
  for (double t : a.t) treated += t == 1.0;
  EXPECT_EQ(treated, 141);

  const auto b = rebalance(psid, 500, 2);
  std::set<double> ca, cb, ta, tb;
  for (int i = 0; i < a.rows(); ++i) (a.t[i] == 1.0 ? ta : ca).insert(a.covariates(i, 0));
  for (int i = 0; i < b.rows(); ++i) (b.t[i] == 1.0 ? tb : cb).insert(b.covariates(i, 0));
  EXPECT_EQ(ta, tb);
  EXPECT_NE(ca, cb);

  const auto all = rebalance(psid, 2266, 3);
  EXPECT_EQ(all.rows(), psid.rows());
  std::multiset<double> x0(psid.y.begin(), psid.y.end()), x1(all.y.begin(), all.y.end());
  EXPECT_EQ(x0, x1);
  EXPECT_THROW(rebalance(psid, 2267, 3), ValidationError);
}

TEST(Cate, AffineDenormalisation) {
  NormalizationMeta meta;
  meta.target_scale = 10.0;
  meta.target_offset = 3.0;
  const auto tau = cate_from_arms({0.3, -0.1}, {0.1, -0.3}, meta);
  EXPECT_NEAR(tau[0], 2.0, 1e-12);
  EXPECT_NEAR(tau[1], 2.0, 1e-12);
  EXPECT_EQ(cate_from_arms({0.4}, {0.4}, meta)[0], 0.0);
}

TEST(Cate, BarMeanMatchesTrapezoidIntegration) {
  const auto edges = BinEdges::uniform(40, -1.05, 1.05);
  const auto l1 = randoms(40, 20), l0 = randoms(40, 21);
  const BarDistribution d1(edges, l1), d0(edges, l0);
  // y * p(y) is linear inside each bin, so the trapezoid rule on interior points is exact per bin.
  auto integrate = [&](const BarDistribution& d) {
    double s = 0.0;
    for (int k = 0; k < edges.bins(); ++k) {
      const int m = 16;
      const double a = edges.edges()[k], w = edges.width(k), eps = 1e-12 * w;
      for (int i = 0; i < m; ++i) {
        const double x0 = a + eps + (w - 2 * eps) * i / m, x1 = a + eps + (w - 2 * eps) * (i + 1) / m;
        s += 0.5 * (x1 - x0) * (x0 * d.density(x0) + x1 * d.density(x1));
      }
    }
    return s;
  };
  NormalizationMeta meta;
  meta.target_scale = 4.0;
  const double oracle = 4.0 * (integrate(d1) - integrate(d0));
  EXPECT_NEAR(cate_from_arms({d1.mean()}, {d0.mean()}, meta)[0], oracle, 1e-6);
}

TEST(Cate, EstimateIsShiftInvariantAndSized) {
  const Model<float> model(tiny(ConditioningMode::soft_bias), 22);
  auto task = load_semisynthetic(fs::path(CFM_TEST_DATA) / "ate_10.csv");
  const auto tau = estimate_cate(model, task);
  ASSERT_EQ(tau.size(), 10u);
  for (auto* col : {&task.y, &task.y0, &task.y1})
    for (auto& v : *col) v += 5.0;
  const auto shifted = estimate_cate(model, task);
  for (int i = 0; i < 10; ++i) EXPECT_NEAR(shifted[i], tau[i], 1e-4);
}

TEST(Cate, UnconfoundednessPamForTask) {
  CausalTask task;
  task.observational = Table::Zero(3, 4);
  task.treatment = 0;
  task.outcome = 2;
  const auto pam = unconfoundedness_pam_for(task);
  EXPECT_EQ(pam(0, 2), 1);
  EXPECT_EQ(pam(1, 0), 1);
  EXPECT_EQ(pam(3, 2), 1);
  EXPECT_EQ(pam(2, 0), -1);
  EXPECT_EQ(pam(1, 3), 0);
}

TEST(Demo, PamModes) {
  EXPECT_EQ(bivariate_pam(PamMode::correct)(0, 1), 1);
  EXPECT_EQ(bivariate_pam(PamMode::correct)(1, 0), -1);
  EXPECT_EQ(bivariate_pam(PamMode::wrong)(1, 0), 1);
  EXPECT_EQ(bivariate_pam(PamMode::wrong)(0, 1), -1);
  EXPECT_EQ(bivariate_pam(PamMode::none).count_off_diagonal(0), 2);
  for (auto m : {PamMode::none, PamMode::correct, PamMode::wrong}) EXPECT_EQ(pam_mode_from_string(to_string(m)), m);
}

TEST(Demo, BivariateDataAndSummary) {
  const auto data = make_bivariate_data(0.25, 0.1, 64, 50, {-2.0, 0.0, 2.0}, 23);
  EXPECT_EQ(data.task.num_context(), 64);
  EXPECT_EQ(data.grid_task.num_queries(), 3);
  EXPECT_TRUE(data.task.normalized);
  // Grid treatment values map back to raw units through the stored statistics.
  const auto& m = data.task.meta;
  EXPECT_NEAR(data.grid_task.interventional(2, 0) * m.feature_std[0] + m.feature_mean[0], 2.0, 1e-12);

  ModelConfig c = tiny(ConditioningMode::soft_bias);
  c.max_features = 0;
  const Model<float> model(c, 24);
  std::vector<DemoResult> results;
  for (auto mode : {PamMode::none, PamMode::correct, PamMode::wrong})
    results.push_back(bivariate_demo(model, data, mode, 30, 25));
  EXPECT_EQ(results[2].asserted_direction, "Y->T");
  EXPECT_EQ(results[1].asserted_direction, "T->Y");
  for (const auto& r : results) {
    ASSERT_EQ(r.points.size(), 3u);
    for (const auto& p : r.points) {
      EXPECT_LE(p.q05, p.q50);
      EXPECT_LE(p.q50, p.q95);
      EXPECT_GT(p.stddev, 0.0);
      EXPECT_EQ(p.samples.size(), 30u);
    }
  }
  const auto j = demo_to_json(results, 0.25, 0.1);
  EXPECT_EQ(j["modes"].size(), 3u);
  EXPECT_EQ(j["modes"][2]["asserted_direction"], "Y->T");
  EXPECT_TRUE(j["modes"][0]["points"][0].contains("std"));
}
