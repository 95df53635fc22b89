#include "cfm/model.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <numeric>

#include "cfm/rng.hpp"

namespace cfm {

std::string to_string(ConditioningMode mode) {
  switch (mode) {
    case ConditioningMode::none: return "none";
    case ConditioningMode::soft_bias: return "soft_bias";
    case ConditioningMode::hard_mask: return "hard_mask";
    case ConditioningMode::gcn_adaln: return "gcn_adaln";
    case ConditioningMode::gcn_plus_soft_bias: return "gcn_plus_soft_bias";
  }
  return "none";
}

ConditioningMode conditioning_mode_from_string(const std::string& s) {
  for (auto m : {ConditioningMode::none, ConditioningMode::soft_bias, ConditioningMode::hard_mask,
                 ConditioningMode::gcn_adaln, ConditioningMode::gcn_plus_soft_bias})
    if (to_string(m) == s) return m;
  throw ValidationError("unknown conditioning mode '" + s +
                        "' (expected none, soft_bias, hard_mask, gcn_adaln, gcn_plus_soft_bias)");
}

bool uses_bias(ConditioningMode mode) {
  return mode == ConditioningMode::soft_bias || mode == ConditioningMode::hard_mask ||
         mode == ConditioningMode::gcn_plus_soft_bias;
}

bool uses_gcn(ConditioningMode mode) {
  return mode == ConditioningMode::gcn_adaln || mode == ConditioningMode::gcn_plus_soft_bias;
}

void ModelConfig::validate() const {
  require(d_model > 0 && num_layers >= 0 && num_heads > 0, "d_model, num_layers, num_heads must be positive");
  require(d_model % num_heads == 0, "d_model must be divisible by num_heads");
  require(max_features >= 0, "max_features must be non-negative");
  require(num_bins >= 2, "num_bins must be at least 2");
  require(num_sinks >= 0, "num_sinks must be non-negative");
  require(gcn_depth >= 1, "gcn_depth must be at least 1");
  require(ff_expansion >= 1, "ff_expansion must be at least 1");
  require(bin_high > bin_low, "bin_high must exceed bin_low");
}

nlohmann::json to_json(const ModelConfig& c) {
  return nlohmann::json{{"d_model", c.d_model},       {"num_layers", c.num_layers},
                        {"num_heads", c.num_heads},   {"max_features", c.max_features},
                        {"num_bins", c.num_bins},     {"num_sinks", c.num_sinks},
                        {"mode", to_string(c.mode)},  {"gcn_depth", c.gcn_depth},
                        {"ff_expansion", c.ff_expansion}, {"bin_low", c.bin_low},
                        {"bin_high", c.bin_high}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.d_model = j.value("d_model", c.d_model);
    c.num_layers = j.value("num_layers", c.num_layers);
    c.num_heads = j.value("num_heads", c.num_heads);
    c.max_features = j.value("max_features", c.max_features);
    c.num_bins = j.value("num_bins", c.num_bins);
    c.num_sinks = j.value("num_sinks", c.num_sinks);
    c.mode = conditioning_mode_from_string(j.value("mode", to_string(c.mode)));
    c.gcn_depth = j.value("gcn_depth", c.gcn_depth);
    c.ff_expansion = j.value("ff_expansion", c.ff_expansion);
    c.bin_low = j.value("bin_low", c.bin_low);
    c.bin_high = j.value("bin_high", c.bin_high);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<int> token_positions(const CausalTask& task, int max_features) {
  const auto features = task.feature_columns();
  require(static_cast<int>(features.size()) <= max_features,
          "task has " + std::to_string(features.size()) + " features but the model supports at most " +
              std::to_string(max_features) + " (max_features)");
  std::vector<int> pos(task.num_nodes());
  for (std::size_t i = 0; i < features.size(); ++i) pos[features[i]] = static_cast<int>(i);
  pos[task.treatment] = max_features;
  pos[task.outcome] = max_features + 1;
  return pos;
}

PartialAncestorMatrix token_pam(const PartialAncestorMatrix& node_pam, const CausalTask& task, int max_features) {
  require(node_pam.size() == task.num_nodes(), "PAM size must equal the task's node count");
  const auto pos = token_positions(task, max_features);
  const int t = max_features + 2;
  std::vector<NodeRole> roles(t, NodeRole::feature);
  roles[max_features] = NodeRole::treatment;
  roles[max_features + 1] = NodeRole::outcome;
  PartialAncestorMatrix out(t, roles);
  std::vector<bool> real(t, false);
  for (int p : pos) real[p] = true;
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < t; ++j)
      if (i != j && (!real[i] || !real[j])) out.set(i, j, -1);
  for (int i = 0; i < task.num_nodes(); ++i)
    for (int j = 0; j < task.num_nodes(); ++j)
      if (i != j) out.set(pos[i], pos[j], node_pam(i, j));
  return out;
}

ModelInput make_model_input(const CausalTask& task, const PartialAncestorMatrix* node_pam, int max_features) {
  const auto pos = token_positions(task, max_features);
  const int t = max_features + 2;
  ModelInput in;
  in.num_features = static_cast<int>(task.feature_columns().size());
  in.context = Mat<double>::Zero(task.num_context(), t);
  in.queries = Mat<double>::Zero(task.num_queries(), t);
  for (int c = 0; c < task.num_nodes(); ++c) {
    for (int r = 0; r < task.num_context(); ++r) in.context(r, pos[c]) = task.observational(r, c);
    if (c == task.outcome) continue;
    for (int r = 0; r < task.num_queries(); ++r) in.queries(r, pos[c]) = task.interventional(r, c);
  }
  if (node_pam) in.pam = token_pam(*node_pam, task, max_features);
  return in;
}

double inverse_softplus(double y) { return std::log(std::expm1(y)); }

template <class S>
int Model<S>::linear(const std::string& name, int in, int out, bool zero) {
  Mat<S> w = Mat<S>::Zero(in, out);
  if (!zero) {
    auto rng = make_rng(derive_seed(seed_, name));
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(in, 1)));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<S>(uniform(rng, -bound, bound));
  }
  const int idx = params_.add(name + ".w", std::move(w));
  params_.add(name + ".b", Mat<S>::Zero(1, out));
  return idx;
}

namespace {

template <class S>
Mat<S> normal_init(std::uint64_t seed, const std::string& name, int rows, int cols, double std) {
  auto rng = make_rng(derive_seed(seed, name));
  Mat<S> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(std * standard_normal(rng));
  return m;
}

template <class S>
Mat<S> filled(int rows, int cols, double v) {
  return Mat<S>::Constant(rows, cols, static_cast<S>(v));
}

// D_row^-1/2 (A + I) D_col^-1/2
template <class S>
Mat<S> normalized_adjacency(const Mat<S>& a) {
  Mat<S> m = a + Mat<S>::Identity(a.rows(), a.cols());
  const Eigen::Matrix<S, Eigen::Dynamic, 1> r = m.rowwise().sum().cwiseSqrt().cwiseInverse();
  const Eigen::Matrix<S, 1, Eigen::Dynamic> c = m.colwise().sum().cwiseSqrt().cwiseInverse();
  return r.asDiagonal() * m * c.asDiagonal();
}

constexpr int kGcnChannels = 4;

}  // namespace

template <class S>
Model<S>::Model(const ModelConfig& config, std::uint64_t seed)
    : config_(config), bins_(BinEdges::uniform(config.num_bins, config.bin_low, config.bin_high)), seed_(seed) {
  config_.validate();
  const int d = config_.d_model;
  const int D = config_.max_features;
  const int t = config_.num_tokens();
  const int ff = d * config_.ff_expansion;
  constexpr double kEmbStd = 0.02;

  row_w1_ = linear("embed.row.0", D + 1, d);
  row_b1_ = row_w1_ + 1;
  row_w2_ = linear("embed.row.1", d, d);
  row_b2_ = row_w2_ + 1;
  cell_w1_ = linear("embed.cell.0", 1, d);
  cell_b1_ = cell_w1_ + 1;
  cell_w2_ = linear("embed.cell.1", d, d);
  cell_b2_ = cell_w2_ + 1;
  type_emb_ = params_.add("embed.type", normal_init<S>(seed_, "embed.type", 3, d, kEmbStd));
  source_emb_ = params_.add("embed.source", normal_init<S>(seed_, "embed.source", 2, d, kEmbStd));
  target_token_ = params_.add("embed.target_token", normal_init<S>(seed_, "embed.target_token", 1, d, kEmbStd));
  lambda_row_ = params_.add("embed.lambda_row", filled<S>(1, 1, 1.0));
  lambda_cell_ = params_.add("embed.lambda_cell", filled<S>(1, 1, 1.0));
  if (config_.num_sinks > 0)
    sinks_ = params_.add("embed.sinks", normal_init<S>(seed_, "embed.sinks", config_.num_sinks * t, d, kEmbStd));

  if (uses_bias(config_.mode) && config_.mode != ConditioningMode::hard_mask) {
    beta_anc_ = params_.add("bias.beta_anc_raw", filled<S>(1, 1, inverse_softplus(1.0)));
    beta_non_ = params_.add("bias.beta_non_raw", filled<S>(1, 1, inverse_softplus(1.0)));
  }
  const bool gcn = uses_gcn(config_.mode);
  if (gcn) {
    role_emb_ = params_.add("gcn.role", normal_init<S>(seed_, "gcn.role", 3, d, 1.0));
    for (int l = 0; l < config_.gcn_depth; ++l) {
      std::vector<int> ws;
      for (int c = 0; c < kGcnChannels; ++c)
        ws.push_back(params_.add("gcn." + std::to_string(l) + ".ch" + std::to_string(c),
                                 normal_init<S>(seed_, "gcn.w" + std::to_string(l) + std::to_string(c), d, d,
                                                1.0 / std::sqrt(static_cast<double>(d)))));
      gcn_w_.push_back(ws);
      gcn_b_.push_back(params_.add("gcn." + std::to_string(l) + ".b", Mat<S>::Zero(1, d)));
    }
  }

  for (int l = 0; l < config_.num_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    LayerParams lp{};
    lp.ln1_g = params_.add(p + "ln1.g", filled<S>(1, d, 1.0));
    lp.ln1_b = params_.add(p + "ln1.b", Mat<S>::Zero(1, d));
    lp.ada1_w = lp.ada1_b = -1;
    if (gcn) {
      lp.ada1_w = linear(p + "ada1", d, 2 * d, true);
      lp.ada1_b = lp.ada1_w + 1;
    }
    lp.fq_w = linear(p + "feat.q", d, d);
    lp.fk_w = linear(p + "feat.k", d, d);
    lp.fv_w = linear(p + "feat.v", d, d);
    lp.fo_w = linear(p + "feat.o", d, d);
    lp.fq_b = lp.fq_w + 1, lp.fk_b = lp.fk_w + 1, lp.fv_b = lp.fv_w + 1, lp.fo_b = lp.fo_w + 1;
    lp.ln2_g = params_.add(p + "ln2.g", filled<S>(1, d, 1.0));
    lp.ln2_b = params_.add(p + "ln2.b", Mat<S>::Zero(1, d));
    lp.sq_w = linear(p + "samp.q", d, d);
    lp.sk_w = linear(p + "samp.k", d, d);
    lp.sv_w = linear(p + "samp.v", d, d);
    lp.so_w = linear(p + "samp.o", d, d);
    lp.sq_b = lp.sq_w + 1, lp.sk_b = lp.sk_w + 1, lp.sv_b = lp.sv_w + 1, lp.so_b = lp.so_w + 1;
    lp.ln3_g = params_.add(p + "ln3.g", filled<S>(1, d, 1.0));
    lp.ln3_b = params_.add(p + "ln3.b", Mat<S>::Zero(1, d));
    lp.ada3_w = lp.ada3_b = -1;
    if (gcn) {
      lp.ada3_w = linear(p + "ada3", d, 2 * d, true);
      lp.ada3_b = lp.ada3_w + 1;
    }
    lp.ff1_w = linear(p + "ff.gate", d, ff);
    lp.ff3_w = linear(p + "ff.up", d, ff);
    lp.ff2_w = linear(p + "ff.down", ff, d);
    lp.ff1_b = lp.ff1_w + 1, lp.ff3_b = lp.ff3_w + 1, lp.ff2_b = lp.ff2_w + 1;
    layers_.push_back(lp);
  }
  lnf_g_ = params_.add("final.ln.g", filled<S>(1, d, 1.0));
  lnf_b_ = params_.add("final.ln.b", Mat<S>::Zero(1, d));
  head_w_ = linear("head", d, config_.num_bins);
  head_b_ = head_w_ + 1;
}

template <class S>
Var Model<S>::lin(Tape<S>& t, Var x, int w, int b) const {
  return t.add_row(t.matmul(x, t.param(params_, w)), t.param(params_, b));
}

template <class S>
Var Model<S>::graph_encode(Tape<S>& t, const PartialAncestorMatrix& pam) const {
  require(uses_gcn(config_.mode), "graph_encode requires a GCN conditioning mode");
  const int k = config_.num_tokens();
  require(pam.size() == k, "PAM size " + std::to_string(pam.size()) + " does not match the token count " +
                               std::to_string(k));
  std::vector<int> role_index(k);
  for (int i = 0; i < k; ++i) role_index[i] = static_cast<int>(pam.roles()[i]);
  Mat<S> anc = Mat<S>::Zero(k, k), non = Mat<S>::Zero(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      if (i == j) continue;
      if (pam(i, j) == 1) anc(i, j) = 1;
      if (pam(i, j) == -1) non(i, j) = 1;
    }
  const Mat<S> a_anc = normalized_adjacency<S>(anc);
  const Mat<S> a_non = normalized_adjacency<S>(non);
  const std::vector<Var> channels{t.constant(a_anc), t.constant(a_anc.transpose()), t.constant(a_non),
                                  t.constant(a_non.transpose())};
  Var z = t.gather_rows(t.param(params_, role_emb_), role_index);
  for (int l = 0; l < config_.gcn_depth; ++l) {
    Var acc;
    for (int c = 0; c < kGcnChannels; ++c) {
      Var m = t.matmul(channels[c], t.matmul(z, t.param(params_, gcn_w_[l][c])));
      acc = acc.valid() ? t.add(acc, m) : m;
    }
    acc = t.add_row(acc, t.param(params_, gcn_b_[l]));
    z = (l + 1 < config_.gcn_depth) ? t.silu(acc) : acc;
  }
  return z;
}

template <class S>
ForwardResult<S> Model<S>::forward(Tape<S>& t, const ModelInput& in) const {
  const int D = config_.max_features;
  const int T = config_.num_tokens();
  const int d = config_.d_model;
  const int ns = config_.num_sinks;
  require(in.num_features <= D, "task has " + std::to_string(in.num_features) +
                                    " features but the model supports at most " + std::to_string(D) +
                                    " (max_features)");
  require(in.context.cols() == T && in.queries.cols() == T, "input width does not match max_features + 2");
  const int nc = static_cast<int>(in.context.rows());
  const int nq = static_cast<int>(in.queries.rows());
  require(nc >= 1 && nq >= 1, "forward needs at least one context row and one query row");
  const int n = nc + nq;
  const int rows_total = ns + n;

  const PartialAncestorMatrix* pam = in.pam ? &*in.pam : nullptr;
  if (config_.mode == ConditioningMode::none && pam) {
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true)) std::cerr << "warning: PAM ignored under conditioning mode none\n";
    pam = nullptr;
  }
  if (config_.mode != ConditioningMode::none) {
    require(pam != nullptr, "conditioning mode " + to_string(config_.mode) + " requires a PAM");
    require(pam->size() == T, "PAM size " + std::to_string(pam->size()) + " does not match the token count " +
                                  std::to_string(T));
    const auto report = validate_pam(*pam);
    if (!report.ok()) throw ValidationError("inconsistent PAM: " + report.violations.front().message);
  }

  ForwardResult<S> res;

  // Row embedding over [x, t].
  Mat<S> row_in(n, D + 1);
  for (int r = 0; r < n; ++r) {
    const auto& src = r < nc ? in.context : in.queries;
    const int rr = r < nc ? r : r - nc;
    for (int c = 0; c <= D; ++c) row_in(r, c) = static_cast<S>(src(rr, c));
  }
  Var e_row = lin(t, t.silu(lin(t, t.constant(std::move(row_in)), row_w1_, row_b1_)), row_w2_, row_b2_);

  // Cell embeddings; query outcome cells take the target token instead.
  std::vector<S> cell_values;
  cell_values.reserve(static_cast<std::size_t>(n) * T);
  std::vector<int> cell_index(static_cast<std::size_t>(n) * T, -1), target_index(cell_index.size(), -1),
      type_index(cell_index.size()), source_index(cell_index.size()), row_of(cell_index.size());
  for (int r = 0; r < n; ++r)
    for (int k = 0; k < T; ++k) {
      const std::size_t at = static_cast<std::size_t>(r) * T + k;
      const bool query = r >= nc;
      row_of[at] = r;
      type_index[at] = k < D ? 0 : (k == D ? 1 : 2);
      source_index[at] = query ? 1 : 0;
      if (query && k == T - 1) {
        target_index[at] = 0;
        continue;
      }
      cell_index[at] = static_cast<int>(cell_values.size());
      cell_values.push_back(static_cast<S>(query ? in.queries(r - nc, k) : in.context(r, k)));
    }
  Mat<S> cell_in = Eigen::Map<Mat<S>>(cell_values.data(), static_cast<Eigen::Index>(cell_values.size()), 1);
  Var e_cell = lin(t, t.silu(lin(t, t.constant(std::move(cell_in)), cell_w1_, cell_b1_)), cell_w2_, cell_b2_);
  Var cell = t.gather_rows(e_cell, cell_index);
  cell = t.add(cell, t.gather_rows(t.param(params_, target_token_), target_index));
  cell = t.add(cell, t.gather_rows(t.param(params_, type_emb_), type_index));
  cell = t.add(cell, t.gather_rows(t.param(params_, source_emb_), source_index));

  Mat<S> pe_base(T, d);
  for (int k = 0; k < T; ++k)
    for (int i = 0; i < d; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / d);
      pe_base(k, i) = static_cast<S>((i % 2 == 0) ? std::sin(k * freq) : std::cos(k * freq));
    }
  Mat<S> pe = pe_base.replicate(n, 1);
  Var h = t.add(t.scale(t.gather_rows(e_row, row_of), t.param(params_, lambda_row_)),
                t.scale(cell, t.param(params_, lambda_cell_)));
  h = t.add(h, t.constant(std::move(pe)));
  if (ns > 0) h = t.concat_rows({t.param(params_, sinks_), h});
  res.embedded = h;

  std::optional<Var> z;
  if (uses_gcn(config_.mode)) {
    z = graph_encode(t, *pam);
    res.graph_embedding = z;
  }

  // Structural bias in (query token, key token) orientation.
  std::optional<Var> bias;
  if (uses_bias(config_.mode)) {
    if (config_.mode == ConditioningMode::hard_mask) {
      const auto b = pam_to_attention_bias(*pam, 0.0, 0.0, BiasMode::hard);
      Mat<S> m(T, T);
      for (int q = 0; q < T; ++q)
        for (int k = 0; k < T; ++k) m(q, k) = b.template at<S>(k, q);
      bias = t.constant(std::move(m));
    } else {
      const auto ind = pam_indicators(*pam);
      Mat<S> anc(T, T), non(T, T);
      for (int q = 0; q < T; ++q)
        for (int k = 0; k < T; ++k) {
          anc(q, k) = static_cast<S>(ind.ancestor(k, q));
          non(q, k) = static_cast<S>(ind.non_ancestor(k, q));
        }
      Var b_anc = t.softplus(t.param(params_, beta_anc_));
      Var b_non = t.softplus(t.param(params_, beta_non_));
      bias = t.sub(t.scale(t.constant(std::move(anc)), b_anc), t.scale(t.constant(std::move(non)), b_non));
    }
  }

  const AttentionLayout feature_layout{rows_total, T, 1, T, T};
  const AttentionLayout sample_layout{T, 1, T, rows_total, ns + nc};
  auto norm = [&](Var x, int g, int b, int ada_w, int ada_b) {
    Var y = t.layer_norm(x, t.param(params_, g), t.param(params_, b));
    if (z && ada_w >= 0) {
      Var mod = lin(t, *z, ada_w, ada_b);
      y = t.modulate(y, t.slice_cols(mod, 0, d), t.slice_cols(mod, d, d), T);
    }
    return y;
  };
  for (const auto& lp : layers_) {
    Var x = norm(h, lp.ln1_g, lp.ln1_b, lp.ada1_w, lp.ada1_b);
    Var a = t.attention(lin(t, x, lp.fq_w, lp.fq_b), lin(t, x, lp.fk_w, lp.fk_b), lin(t, x, lp.fv_w, lp.fv_b),
                        config_.num_heads, feature_layout, bias);
    res.feature_attention.push_back(a);
    h = t.add(h, lin(t, a, lp.fo_w, lp.fo_b));

    x = norm(h, lp.ln2_g, lp.ln2_b, -1, -1);
    a = t.attention(lin(t, x, lp.sq_w, lp.sq_b), lin(t, x, lp.sk_w, lp.sk_b), lin(t, x, lp.sv_w, lp.sv_b),
                    config_.num_heads, sample_layout);
    res.sample_attention.push_back(a);
    h = t.add(h, lin(t, a, lp.so_w, lp.so_b));

    x = norm(h, lp.ln3_g, lp.ln3_b, lp.ada3_w, lp.ada3_b);
    Var f = t.mul(t.silu(lin(t, x, lp.ff1_w, lp.ff1_b)), lin(t, x, lp.ff3_w, lp.ff3_b));
    h = t.add(h, lin(t, f, lp.ff2_w, lp.ff2_b));
  }

  std::vector<int> out_rows(nq);
  for (int i = 0; i < nq; ++i) out_rows[i] = (ns + nc + i) * T + (T - 1);
  Var y = t.layer_norm(t.gather_rows(h, out_rows), t.param(params_, lnf_g_), t.param(params_, lnf_b_));
  res.logits = lin(t, y, head_w_, head_b_);
  return res;
}

template <class S>
std::vector<int> Model<S>::target_bins(const std::vector<double>& y, ClampStats* stats) const {
  std::vector<int> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (stats) {
      ++stats->evaluated;
      if (!bins_.contains(y[i])) ++stats->clamped;
    }
    out[i] = bins_.bin_of(y[i]);
  }
  return out;
}

template <class S>
std::vector<S> Model<S>::log_widths() const {
  std::vector<S> out(bins_.bins());
  for (int k = 0; k < bins_.bins(); ++k) out[k] = static_cast<S>(std::log(bins_.width(k)));
  return out;
}

template <class S>
template <class T>
void Model<S>::load_values(const ParamStore<T>& other) {
  for (auto& p : params_) {
    const int j = other.find(p.name);
    if (j < 0) continue;
    const auto& src = other[j].value;
    require(src.rows() == p.value.rows() && src.cols() == p.value.cols(), "shape mismatch for parameter " + p.name);
    p.value = src.template cast<S>();
  }
}

template <class S>
std::vector<BarDistribution> Model<S>::distributions(const Tape<S>& tape, Var logits) const {
  const auto& l = tape.value(logits);
  std::vector<BarDistribution> out;
  out.reserve(static_cast<std::size_t>(l.rows()));
  std::vector<double> row(static_cast<std::size_t>(l.cols()));
  for (Eigen::Index r = 0; r < l.rows(); ++r) {
    for (Eigen::Index k = 0; k < l.cols(); ++k) row[static_cast<std::size_t>(k)] = static_cast<double>(l(r, k));
    out.emplace_back(bins_, row);
  }
  return out;
}

template class Model<float>;
template class Model<double>;
template void Model<float>::load_values<float>(const ParamStore<float>&);
template void Model<float>::load_values<double>(const ParamStore<double>&);
template void Model<double>::load_values<float>(const ParamStore<float>&);
template void Model<double>::load_values<double>(const ParamStore<double>&);

}  // namespace cfm
