#include "cfm/autograd.hpp"

#include <cmath>

namespace cfm {

template <class S>
int ParamStore<S>::add(std::string name, Mat<S> value) {
  require(find(name) < 0, "duplicate parameter name " + name);
  Param<S> p;
  p.name = std::move(name);
  p.grad = Mat<S>::Zero(value.rows(), value.cols());
  p.m = Mat<S>::Zero(value.rows(), value.cols());
  p.v = Mat<S>::Zero(value.rows(), value.cols());
  p.value = std::move(value);
  params_.push_back(std::move(p));
  return static_cast<int>(params_.size()) - 1;
}

template <class S>
int ParamStore<S>::find(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return static_cast<int>(i);
  return -1;
}

template <class S>
void ParamStore<S>::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

template <class S>
std::size_t ParamStore<S>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

template <class S>
Var Tape<S>::push(Mat<S> value, bool requires_grad) {
  auto n = std::make_unique<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad && grad_enabled_;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <class S>
bool Tape<S>::needs(std::initializer_list<Var> inputs) const {
  if (!grad_enabled_) return false;
  for (Var v : inputs)
    if (node(v).requires_grad) return true;
  return false;
}

template <class S>
Mat<S>& Tape<S>::grad(Var v) {
  auto& n = node(v);
  if (n.grad.size() == 0) n.grad = Mat<S>::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

template <class S>
Var Tape<S>::constant(Mat<S> value) {
  return push(std::move(value), false);
}

template <class S>
Var Tape<S>::param(ParamStore<S>& store, int index) {
  Var v = push(store[index].value, true);
  node(v).store = &store;
  node(v).param_index = index;
  return v;
}

template <class S>
Var Tape<S>::matmul(Var a, Var b) {
  require(value(a).cols() == value(b).rows(), "matmul shape mismatch");
  Mat<S> out = value(a) * value(b);
  const bool rg = needs({a, b});
  Var o = push(std::move(out), rg);
  if (rg)
    node(o).backward = [this, a, b, o] {
      const auto& g = node(o).grad;
      if (node(a).requires_grad) grad(a).noalias() += g * value(b).transpose();
      if (node(b).requires_grad) grad(b).noalias() += value(a).transpose() * g;
    };
  return o;
}

template <class S>
Var Tape<S>::add(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "add shape mismatch");
  const bool rg = needs({a, b});
  Var o = push(value(a) + value(b), rg);
  if (rg)
    node(o).backward = [this, a, b, o] {
      const auto& g = node(o).grad;
      if (node(a).requires_grad) grad(a) += g;
      if (node(b).requires_grad) grad(b) += g;
    };
  return o;
}

template <class S>
Var Tape<S>::sub(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "sub shape mismatch");
  const bool rg = needs({a, b});
  Var o = push(value(a) - value(b), rg);
  if (rg)
    node(o).backward = [this, a, b, o] {
      const auto& g = node(o).grad;
      if (node(a).requires_grad) grad(a) += g;
      if (node(b).requires_grad) grad(b) -= g;
    };
  return o;
}

template <class S>
Var Tape<S>::mul(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "mul shape mismatch");
  const bool rg = needs({a, b});
  Var o = push(value(a).cwiseProduct(value(b)), rg);
  if (rg)
    node(o).backward = [this, a, b, o] {
      const auto& g = node(o).grad;
      if (node(a).requires_grad) grad(a) += g.cwiseProduct(value(b));
      if (node(b).requires_grad) grad(b) += g.cwiseProduct(value(a));
    };
  return o;
}

template <class S>
Var Tape<S>::add_row(Var x, Var row) {
  require(value(row).rows() == 1 && value(row).cols() == value(x).cols(), "add_row shape mismatch");
  Mat<S> out = value(x);
  out.rowwise() += value(row).row(0);
  const bool rg = needs({x, row});
  Var o = push(std::move(out), rg);
  if (rg)
    node(o).backward = [this, x, row, o] {
      const auto& g = node(o).grad;
      if (node(x).requires_grad) grad(x) += g;
      if (node(row).requires_grad) grad(row) += g.colwise().sum();
    };
  return o;
}

template <class S>
Var Tape<S>::mul_row(Var x, Var row) {
  require(value(row).rows() == 1 && value(row).cols() == value(x).cols(), "mul_row shape mismatch");
  Mat<S> out = value(x).array().rowwise() * value(row).row(0).array();
  const bool rg = needs({x, row});
  Var o = push(std::move(out), rg);
  if (rg)
    node(o).backward = [this, x, row, o] {
      const auto& g = node(o).grad;
      if (node(x).requires_grad) grad(x).array() += g.array().rowwise() * value(row).row(0).array();
      if (node(row).requires_grad) grad(row) += g.cwiseProduct(value(x)).colwise().sum();
    };
  return o;
}

template <class S>
Var Tape<S>::scale(Var x, Var s) {
  require(value(s).size() == 1, "scale expects a 1 x 1 factor");
  const bool rg = needs({x, s});
  Var o = push(value(x) * value(s)(0, 0), rg);
  if (rg)
    node(o).backward = [this, x, s, o] {
      const auto& g = node(o).grad;
      if (node(x).requires_grad) grad(x) += g * value(s)(0, 0);
      if (node(s).requires_grad) grad(s)(0, 0) += g.cwiseProduct(value(x)).sum();
    };
  return o;
}

template <class S>
Var Tape<S>::scale(Var x, S s) {
  const bool rg = needs({x});
  Var o = push(value(x) * s, rg);
  if (rg)
    node(o).backward = [this, x, s, o] { grad(x) += node(o).grad * s; };
  return o;
}

template <class S>
Var Tape<S>::silu(Var x) {
  const auto& xv = value(x);
  Mat<S> sig = (S(1) + (-xv.array()).exp()).inverse().matrix();
  Mat<S> out = xv.cwiseProduct(sig);
  const bool rg = needs({x});
  Var o = push(std::move(out), rg);
  if (rg)
    node(o).backward = [this, x, o, sig = std::move(sig)] {
      const auto& xv = value(x);
      grad(x).array() += node(o).grad.array() * sig.array() * (S(1) + xv.array() * (S(1) - sig.array()));
    };
  return o;
}

template <class S>
Var Tape<S>::softplus(Var x) {
  const auto& xv = value(x);
  Mat<S> out = xv.unaryExpr([](S v) { return v > S(30) ? v : std::log1p(std::exp(v)); });
  const bool rg = needs({x});
  Var o = push(std::move(out), rg);
  if (rg)
    node(o).backward = [this, x, o] {
      grad(x).array() += node(o).grad.array() * (S(1) + (-value(x).array()).exp()).inverse();
    };
  return o;
}

template <class S>
Var Tape<S>::normalize_rows(Var x, S eps) {
  const auto& xv = value(x);
  const Eigen::Index n = xv.rows();
  const S d = static_cast<S>(xv.cols());
  Mat<S> out(xv.rows(), xv.cols());
  Eigen::Matrix<S, Eigen::Dynamic, 1> inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const S mean = xv.row(r).sum() / d;
    const auto centred = xv.row(r).array() - mean;
    const S var = centred.square().sum() / d;
    inv_std(r) = S(1) / std::sqrt(var + eps);
    out.row(r) = centred * inv_std(r);
  }
  const bool rg = needs({x});
  Var o = push(std::move(out), rg);
  if (rg)
    node(o).backward = [this, x, o, inv_std = std::move(inv_std), d] {
      const auto& g = node(o).grad;
      const auto& xhat = value(o);
      auto& gx = grad(x);
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        const S mg = g.row(r).sum() / d;
        const S mgx = g.row(r).dot(xhat.row(r)) / d;
        gx.row(r).array() += inv_std(r) * (g.row(r).array() - mg - xhat.row(r).array() * mgx);
      }
    };
  return o;
}

template <class S>
Var Tape<S>::layer_norm(Var x, Var gamma, Var beta, S eps) {
  return add_row(mul_row(normalize_rows(x, eps), gamma), beta);
}

template <class S>
Var Tape<S>::modulate(Var x, Var scale, Var shift, int period) {
  const auto& xv = value(x);
  require(period > 0 && xv.rows() % period == 0, "modulate: rows must be a multiple of the period");
  require(value(scale).rows() == period && value(shift).rows() == period && value(scale).cols() == xv.cols() &&
              value(shift).cols() == xv.cols(),
          "modulate shape mismatch");
  Mat<S> out(xv.rows(), xv.cols());
  const auto& sc = value(scale);
  const auto& sh = value(shift);
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const auto t = r % period;
    out.row(r) = xv.row(r).array() * (S(1) + sc.row(t).array()) + sh.row(t).array();
  }
  const bool rg = needs({x, scale, shift});
  Var o = push(std::move(out), rg);
  if (rg)
    node(o).backward = [this, x, scale, shift, o, period] {
      const auto& g = node(o).grad;
      const auto& xv = value(x);
      const auto& sc = value(scale);
      const bool gx = node(x).requires_grad, gs = node(scale).requires_grad, gh = node(shift).requires_grad;
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        const auto t = r % period;
        if (gx) grad(x).row(r).array() += g.row(r).array() * (S(1) + sc.row(t).array());
        if (gs) grad(scale).row(t).array() += g.row(r).array() * xv.row(r).array();
        if (gh) grad(shift).row(t) += g.row(r);
      }
    };
  return o;
}

template <class S>
Var Tape<S>::gather_rows(Var x, std::vector<int> index) {
  const auto& xv = value(x);
  Mat<S> out = Mat<S>::Zero(static_cast<Eigen::Index>(index.size()), xv.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    const int i = index[r];
    require(i >= -1 && i < xv.rows(), "gather_rows index out of range");
    if (i >= 0) out.row(static_cast<Eigen::Index>(r)) = xv.row(i);
  }
  const bool rg = needs({x});
  Var o = push(std::move(out), rg);
  if (rg)
    node(o).backward = [this, x, o, index = std::move(index)] {
      const auto& g = node(o).grad;
      auto& gx = grad(x);
      for (std::size_t r = 0; r < index.size(); ++r)
        if (index[r] >= 0) gx.row(index[r]) += g.row(static_cast<Eigen::Index>(r));
    };
  return o;
}

template <class S>
Var Tape<S>::concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows needs at least one part");
  Eigen::Index rows = 0;
  const Eigen::Index cols = value(parts[0]).cols();
  bool rg = false;
  for (Var p : parts) {
    require(value(p).cols() == cols, "concat_rows column mismatch");
    rows += value(p).rows();
    rg = rg || (grad_enabled_ && node(p).requires_grad);
  }
  Mat<S> out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleRows(at, value(p).rows()) = value(p);
    at += value(p).rows();
  }
  Var o = push(std::move(out), rg);
  if (rg)
    node(o).backward = [this, parts, o] {
      const auto& g = node(o).grad;
      Eigen::Index at = 0;
      for (Var p : parts) {
        const auto n = value(p).rows();
        if (node(p).requires_grad) grad(p) += g.middleRows(at, n);
        at += n;
      }
    };
  return o;
}

template <class S>
Var Tape<S>::slice_cols(Var x, int begin, int count) {
  require(begin >= 0 && count >= 0 && begin + count <= value(x).cols(), "slice_cols range out of bounds");
  const bool rg = needs({x});
  Var o = push(value(x).middleCols(begin, count), rg);
  if (rg)
    node(o).backward = [this, x, o, begin, count] { grad(x).middleCols(begin, count) += node(o).grad; };
  return o;
}

template <class S>
Var Tape<S>::attention(Var q, Var k, Var v, int heads, AttentionLayout lay, std::optional<Var> bias) {
  using Map = Eigen::Map<Mat<S>, 0, Eigen::OuterStride<>>;
  using CMap = Eigen::Map<const Mat<S>, 0, Eigen::OuterStride<>>;
  const auto& qv = value(q);
  const auto& kv = value(k);
  const auto& vv = value(v);
  const auto d = qv.cols();
  require(kv.cols() == d && vv.cols() == d && kv.rows() == qv.rows() && vv.rows() == qv.rows(),
          "attention: q, k, v shape mismatch");
  require(heads > 0 && d % heads == 0, "attention: width must be divisible by the head count");
  require(lay.num_keys > 0 && lay.num_queries > 0, "attention: empty query or key set");
  const auto last_q = static_cast<Eigen::Index>(lay.groups - 1) * lay.group_stride +
                      static_cast<Eigen::Index>(std::max(lay.num_queries, lay.num_keys) - 1) * lay.item_stride;
  require(last_q < qv.rows(), "attention layout exceeds the row count");
  if (bias)
    require(value(*bias).rows() == lay.num_queries && value(*bias).cols() == lay.num_keys,
            "attention: bias must be num_queries x num_keys");
  const int dh = static_cast<int>(d / heads);
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));
  const Eigen::OuterStride<> stride(static_cast<Eigen::Index>(lay.item_stride) * d);
  auto offset = [lay, d, dh](int g, int h) {
    return static_cast<Eigen::Index>(g) * lay.group_stride * d + static_cast<Eigen::Index>(h) * dh;
  };

  const bool rg = needs({q, k, v}) || (bias && needs({*bias}));
  const bool keep = rg || keep_attention_;
  Mat<S> out = Mat<S>::Zero(qv.rows(), d);
  std::vector<Mat<S>> probs;
  if (keep) probs.reserve(static_cast<std::size_t>(lay.groups) * heads);
  Mat<S> logits;
  for (int g = 0; g < lay.groups; ++g)
    for (int h = 0; h < heads; ++h) {
      const auto off = offset(g, h);
      CMap qg(qv.data() + off, lay.num_queries, dh, stride);
      CMap kg(kv.data() + off, lay.num_keys, dh, stride);
      CMap vg(vv.data() + off, lay.num_keys, dh, stride);
      logits.noalias() = qg * kg.transpose();
      logits *= scale;
      if (bias) logits += value(*bias);
      for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        auto row = logits.row(r);
        row.array() = (row.array() - row.maxCoeff()).exp();
        row /= row.sum();
      }
      Map og(out.data() + off, lay.num_queries, dh, stride);
      og.noalias() = logits * vg;
      if (keep) probs.push_back(logits);
    }
  Var o = push(std::move(out), rg);
  node(o).probs = std::move(probs);
  if (rg)
    node(o).backward = [this, q, k, v, bias, o, heads, lay, dh, scale, stride, offset] {
      const auto& go = node(o).grad;
      const bool gq = node(q).requires_grad, gk = node(k).requires_grad, gv = node(v).requires_grad;
      const bool gb = bias && node(*bias).requires_grad;
      Mat<S>* dq = gq ? &grad(q) : nullptr;
      Mat<S>* dk = gk ? &grad(k) : nullptr;
      Mat<S>* dv = gv ? &grad(v) : nullptr;
      Mat<S>* db = gb ? &grad(*bias) : nullptr;
      Mat<S> dp, ds;
      for (int g = 0; g < lay.groups; ++g)
        for (int h = 0; h < heads; ++h) {
          const auto off = offset(g, h);
          const auto& p = node(o).probs[static_cast<std::size_t>(g) * heads + h];
          CMap gog(go.data() + off, lay.num_queries, dh, stride);
          CMap qg(value(q).data() + off, lay.num_queries, dh, stride);
          CMap kg(value(k).data() + off, lay.num_keys, dh, stride);
          CMap vg(value(v).data() + off, lay.num_keys, dh, stride);
          if (dv) {
            Map dvg(dv->data() + off, lay.num_keys, dh, stride);
            dvg.noalias() += p.transpose() * gog;
          }
          dp.noalias() = gog * vg.transpose();
          ds = p.cwiseProduct(dp);
          ds -= p.cwiseProduct(ds.rowwise().sum().replicate(1, p.cols()));
          if (db) *db += ds;
          if (dq) {
            Map dqg(dq->data() + off, lay.num_queries, dh, stride);
            dqg.noalias() += scale * (ds * kg);
          }
          if (dk) {
            Map dkg(dk->data() + off, lay.num_keys, dh, stride);
            dkg.noalias() += scale * (ds.transpose() * qg);
          }
        }
    };
  return o;
}

template <class S>
const std::vector<Mat<S>>& Tape<S>::attention_probs(Var v) const {
  return node(v).probs;
}

template <class S>
Var Tape<S>::bar_nll(Var logits, std::vector<int> targets, std::vector<S> log_widths) {
  const auto& lv = value(logits);
  require(static_cast<Eigen::Index>(targets.size()) == lv.rows(), "bar_nll: one target per logit row");
  require(static_cast<Eigen::Index>(log_widths.size()) == lv.cols(), "bar_nll: one width per bin");
  require(lv.rows() > 0, "bar_nll: no rows");
  const auto n = lv.rows();
  Mat<S> probs(lv.rows(), lv.cols());
  S total = 0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    require(t >= 0 && t < lv.cols(), "bar_nll target bin out of range");
    const S m = lv.row(r).maxCoeff();
    probs.row(r) = (lv.row(r).array() - m).exp();
    const S z = probs.row(r).sum();
    probs.row(r) /= z;
    total += -(lv(r, t) - m - std::log(z)) + log_widths[static_cast<std::size_t>(t)];
  }
  Mat<S> out(1, 1);
  out(0, 0) = total / static_cast<S>(n);
  const bool rg = needs({logits});
  Var o = push(std::move(out), rg);
  if (rg)
    node(o).backward = [this, logits, o, targets = std::move(targets), probs = std::move(probs)]() mutable {
      const S g = node(o).grad(0, 0) / static_cast<S>(probs.rows());
      auto& gl = grad(logits);
      for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        gl.row(r) += g * probs.row(r);
        gl(r, targets[static_cast<std::size_t>(r)]) -= g;
      }
    };
  return o;
}

template <class S>
void Tape<S>::backward(Var out) {
  require(value(out).size() == 1, "backward expects a scalar output");
  require(grad_enabled_, "backward on a tape without gradients");
  grad(out)(0, 0) += S(1);
  for (int i = out.id; i >= 0; --i) {
    auto& n = *nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward();
    if (n.store) (*n.store)[n.param_index].grad += n.grad;
  }
}

template class ParamStore<float>;
template class ParamStore<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace cfm
