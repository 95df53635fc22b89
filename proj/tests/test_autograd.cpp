#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "cfm/autograd.hpp"
#include "cfm/rng.hpp"

using namespace cfm;

namespace {

using M = Mat<double>;
using Build = std::function<Var(Tape<double>&, const std::vector<Var>&)>;

M random_matrix(int r, int c, std::uint64_t seed, double scale = 1.0) {
  auto rng = make_rng(seed);
  M m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = scale * standard_normal(rng);
  return m;
}

// Contracts the output with fixed random weights so every entry contributes to the scalar.
Var reduce(Tape<double>& tape, Var out) {
  const auto& v = tape.value(out);
  if (v.size() == 1) return out;
  Var w = tape.constant(random_matrix(static_cast<int>(v.rows()), static_cast<int>(v.cols()), 999));
  Var prod = tape.mul(out, w);
  Var left = tape.matmul(tape.constant(M::Ones(1, v.rows())), prod);
  return tape.matmul(left, tape.constant(M::Ones(v.cols(), 1)));
}

double evaluate(ParamStore<double>& store, const Build& build) {
  Tape<double> tape(false);
  std::vector<Var> in;
  for (int i = 0; i < store.size(); ++i) in.push_back(tape.param(store, i));
  return tape.value(reduce(tape, build(tape, in)))(0, 0);
}

void check_gradients(std::vector<M> inputs, const Build& build, double tol = 1e-6) {
  ParamStore<double> store;
  for (std::size_t i = 0; i < inputs.size(); ++i) store.add("in" + std::to_string(i), inputs[i]);
  store.zero_grad();
  {
    Tape<double> tape;
    std::vector<Var> in;
    for (int i = 0; i < store.size(); ++i) in.push_back(tape.param(store, i));
    tape.backward(reduce(tape, build(tape, in)));
  }
  const double h = 1e-6;
  for (int p = 0; p < store.size(); ++p) {
    for (Eigen::Index e = 0; e < store[p].value.size(); ++e) {
      double& x = store[p].value.data()[e];
      const double x0 = x;
      x = x0 + h;
      const double up = evaluate(store, build);
      x = x0 - h;
      const double down = evaluate(store, build);
      x = x0;
      const double fd = (up - down) / (2 * h);
      const double an = store[p].grad.data()[e];
      ASSERT_NEAR(an, fd, tol * std::max(1.0, std::abs(fd))) << "input " << p << " entry " << e;
    }
  }
}

}  // namespace

TEST(Autograd, Matmul) {
  check_gradients({random_matrix(3, 4, 1), random_matrix(4, 2, 2)},
                  [](Tape<double>& t, const std::vector<Var>& v) { return t.matmul(v[0], v[1]); });
}

TEST(Autograd, ElementwiseAddSubMul) {
  check_gradients({random_matrix(3, 4, 3), random_matrix(3, 4, 4)}, [](Tape<double>& t, const std::vector<Var>& v) {
    return t.mul(t.add(v[0], v[1]), t.sub(v[0], v[1]));
  });
}

TEST(Autograd, RowBroadcasts) {
  check_gradients({random_matrix(5, 3, 5), random_matrix(1, 3, 6), random_matrix(1, 3, 7)},
                  [](Tape<double>& t, const std::vector<Var>& v) { return t.mul_row(t.add_row(v[0], v[1]), v[2]); });
}

TEST(Autograd, ScaleByVariableAndConstant) {
  check_gradients({random_matrix(2, 3, 8), random_matrix(1, 1, 9)},
                  [](Tape<double>& t, const std::vector<Var>& v) { return t.scale(t.scale(v[0], v[1]), 0.3); });
}

TEST(Autograd, Activations) {
  check_gradients({random_matrix(4, 4, 10, 2.0)},
                  [](Tape<double>& t, const std::vector<Var>& v) { return t.add(t.silu(v[0]), t.softplus(v[0])); });
}

TEST(Autograd, LayerNorm) {
  check_gradients({random_matrix(3, 6, 11), random_matrix(1, 6, 12), random_matrix(1, 6, 13)},
                  [](Tape<double>& t, const std::vector<Var>& v) { return t.layer_norm(v[0], v[1], v[2]); });
}

TEST(Autograd, NormalizeRows) {
  check_gradients({random_matrix(4, 5, 14)},
                  [](Tape<double>& t, const std::vector<Var>& v) { return t.normalize_rows(v[0]); });
}

TEST(Autograd, Modulate) {
  check_gradients({random_matrix(6, 3, 15), random_matrix(2, 3, 16), random_matrix(2, 3, 17)},
                  [](Tape<double>& t, const std::vector<Var>& v) { return t.modulate(v[0], v[1], v[2], 2); });
}

TEST(Autograd, GatherConcatSlice) {
  check_gradients({random_matrix(4, 5, 18), random_matrix(2, 5, 19)}, [](Tape<double>& t, const std::vector<Var>& v) {
    Var g = t.gather_rows(v[0], {3, -1, 0, 3, 1});
    return t.slice_cols(t.concat_rows({g, v[1]}), 1, 3);
  });
}

TEST(Autograd, GatherMissingRowIsZero) {
  Tape<double> t(false);
  Var x = t.constant(random_matrix(2, 3, 20));
  const auto& out = t.value(t.gather_rows(x, {-1, 1}));
  EXPECT_EQ(out.row(0).cwiseAbs().sum(), 0.0);
  EXPECT_EQ(out.row(1), t.value(x).row(1));
}

TEST(Autograd, AttentionWithBias) {
  // Two groups of four items, strided by one row; three queries attend to four keys.
  AttentionLayout lay{2, 4, 1, 3, 4};
  check_gradients({random_matrix(8, 4, 21), random_matrix(8, 4, 22), random_matrix(8, 4, 23), random_matrix(3, 4, 24)},
                  [lay](Tape<double>& t, const std::vector<Var>& v) { return t.attention(v[0], v[1], v[2], 2, lay, v[3]); },
                  1e-5);
}

TEST(Autograd, AttentionStridedLayout) {
  AttentionLayout lay{3, 1, 3, 3, 2};
  check_gradients({random_matrix(9, 4, 25), random_matrix(9, 4, 26), random_matrix(9, 4, 27)},
                  [lay](Tape<double>& t, const std::vector<Var>& v) { return t.attention(v[0], v[1], v[2], 1, lay); },
                  1e-5);
}

TEST(Autograd, AttentionRowsAreDistributions) {
  Tape<double> t(false);
  t.set_keep_attention(true);
  Var x = t.constant(random_matrix(4, 4, 28));
  Var a = t.attention(x, x, x, 2, AttentionLayout{1, 0, 1, 4, 4});
  const auto& probs = t.attention_probs(a);
  ASSERT_EQ(probs.size(), 2u);
  for (const auto& p : probs)
    for (int r = 0; r < p.rows(); ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-12);
}

TEST(Autograd, BarNll) {
  const std::vector<double> log_widths{std::log(0.5), std::log(0.25), std::log(0.25)};
  check_gradients({random_matrix(4, 3, 29)}, [log_widths](Tape<double>& t, const std::vector<Var>& v) {
    return t.bar_nll(v[0], {0, 2, 1, 2}, log_widths);
  });
}

TEST(Autograd, BarNllUniformValue) {
  Tape<double> t(false);
  Var logits = t.constant(M::Zero(2, 4));
  const double w = std::log(0.5);
  EXPECT_NEAR(t.value(t.bar_nll(logits, {0, 3}, {w, w, w, w}))(0, 0), std::log(4.0) + w, 1e-15);
}

TEST(Autograd, GradientsAccumulateAcrossUses) {
  ParamStore<double> store;
  store.add("x", random_matrix(2, 2, 30));
  store.zero_grad();
  Tape<double> t;
  Var x = t.param(store, 0);
  Var y = t.add(x, x);
  t.backward(reduce(t, y));
  M w = random_matrix(2, 2, 999);
  EXPECT_TRUE(store[0].grad.isApprox(2.0 * w));
}

TEST(Autograd, NoGradTapeRecordsNoGradient) {
  ParamStore<double> store;
  store.add("x", random_matrix(2, 2, 31));
  Tape<double> t(false);
  Var x = t.param(store, 0);
  EXPECT_FALSE(t.requires_grad(t.silu(x)));
}

TEST(Autograd, ShapeErrors) {
  Tape<double> t;
  Var a = t.constant(M::Zero(2, 3));
  Var b = t.constant(M::Zero(2, 3));
  EXPECT_THROW(t.matmul(a, b), ValidationError);
  EXPECT_THROW(t.scale(a, b), ValidationError);
  EXPECT_THROW(t.bar_nll(a, {0}, {0, 0, 0}), ValidationError);
}

TEST(Autograd, AttentionWithSingleKeyCopiesValue) {
  Tape<double> t(false);
  Var q = t.constant(random_matrix(3, 4, 32));
  Var k = t.constant(random_matrix(3, 4, 33));
  Var v = t.constant(random_matrix(3, 4, 34));
  // Three groups of one item each: every query sees only its own key.
  const auto& out = t.value(t.attention(q, k, v, 2, AttentionLayout{3, 1, 1, 1, 1}));
  EXPECT_LT((out - t.value(v)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Autograd, PointMassLogitsReachTheWidthBound) {
  Tape<double> t(false);
  M logits = M::Constant(2, 5, -50.0);
  logits(0, 1) = 50.0;
  logits(1, 4) = 50.0;
  const double w = std::log(0.002);
  const double nll = t.value(t.bar_nll(t.constant(logits), {1, 4}, {w, w, w, w, w}))(0, 0);
  EXPECT_NEAR(nll, w, 1e-12);
}
