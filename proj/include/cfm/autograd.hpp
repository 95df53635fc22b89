#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cfm/common.hpp"

namespace cfm {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class S>
struct Param {
  std::string name;
  Mat<S> value;
  Mat<S> grad;
  // Adam moments.
  Mat<S> m;
  Mat<S> v;
};

template <class S>
class ParamStore {
 public:
  int add(std::string name, Mat<S> value);
  int size() const { return static_cast<int>(params_.size()); }
  Param<S>& operator[](int i) { return params_[static_cast<std::size_t>(i)]; }
  const Param<S>& operator[](int i) const { return params_[static_cast<std::size_t>(i)]; }
  int find(const std::string& name) const;  // -1 if absent
  void zero_grad();
  std::size_t scalar_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<Param<S>> params_;
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Grouped attention: group g, item i lives at row g * group_stride + i * item_stride. Queries are
// items [0, num_queries), keys items [0, num_keys) of the same group.
struct AttentionLayout {
  int groups = 1;
  int group_stride = 0;
  int item_stride = 1;
  int num_queries = 0;
  int num_keys = 0;
};

// Reverse-mode tape. Values are computed eagerly; backward() walks the tape in reverse.
template <class S>
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const { return grad_enabled_; }
  // Keep attention probabilities even without gradients (inspection).
  void set_keep_attention(bool keep) { keep_attention_ = keep; }

  Var constant(Mat<S> value);
  // Leaf bound to a parameter; backward() accumulates into store[index].grad.
  Var param(ParamStore<S>& store, int index);

  const Mat<S>& value(Var v) const { return node(v).value; }
  Mat<S>& grad(Var v);
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  // x + 1 x d row broadcast to every row.
  Var add_row(Var x, Var row);
  // x * 1 x d row broadcast to every row.
  Var mul_row(Var x, Var row);
  // x * s with s a 1 x 1 variable.
  Var scale(Var x, Var s);
  Var scale(Var x, S s);
  Var silu(Var x);
  Var softplus(Var x);
  Var layer_norm(Var x, Var gamma, Var beta, S eps = S(1e-5));
  // Parameter-free normalisation (AdaLN supplies the affine part).
  Var normalize_rows(Var x, S eps = S(1e-5));
  // out[r] = x[r] * (1 + scale[r % period]) + shift[r % period]
  Var modulate(Var x, Var scale, Var shift, int period);
  // out[r] = x[index[r]], zero row for index -1.
  Var gather_rows(Var x, std::vector<int> index);
  Var concat_rows(const std::vector<Var>& parts);
  Var slice_cols(Var x, int begin, int count);
  // bias: optional num_queries x num_keys variable added to every group/head's logits.
  Var attention(Var q, Var k, Var v, int heads, AttentionLayout layout, std::optional<Var> bias = std::nullopt);
  // Mean over rows of -log softmax(logits)[r, target[r]] + log_width[target[r]].
  Var bar_nll(Var logits, std::vector<int> targets, std::vector<S> log_widths);

  // Probabilities of an attention node, index g * heads + h; empty unless kept.
  const std::vector<Mat<S>>& attention_probs(Var v) const;

  // Seeds d(out)/d(out) = 1 (out must be 1 x 1) and propagates.
  void backward(Var out);

 private:
  struct Node {
    Mat<S> value;
    Mat<S> grad;
    bool requires_grad = false;
    ParamStore<S>* store = nullptr;
    int param_index = -1;
    std::function<void()> backward;
    std::vector<Mat<S>> probs;
  };

  Node& node(Var v) { return *nodes_[static_cast<std::size_t>(v.id)]; }
  const Node& node(Var v) const { return *nodes_[static_cast<std::size_t>(v.id)]; }
  Var push(Mat<S> value, bool requires_grad);
  bool needs(std::initializer_list<Var> inputs) const;

  bool grad_enabled_;
  bool keep_attention_ = false;
  std::vector<std::unique_ptr<Node>> nodes_;
};

extern template class ParamStore<float>;
extern template class ParamStore<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace cfm
