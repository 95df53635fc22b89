#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfm/autograd.hpp"
#include "cfm/bar.hpp"
#include "cfm/graph.hpp"
#include "cfm/task.hpp"

namespace cfm {

enum class ConditioningMode : std::uint8_t { none, soft_bias, hard_mask, gcn_adaln, gcn_plus_soft_bias };
std::string to_string(ConditioningMode mode);
ConditioningMode conditioning_mode_from_string(const std::string& s);
bool uses_bias(ConditioningMode mode);
bool uses_gcn(ConditioningMode mode);

struct ModelConfig {
  int d_model = 128;
  int num_layers = 4;
  int num_heads = 4;
  int max_features = 52;
  int num_bins = 1000;
  int num_sinks = 2;
  ConditioningMode mode = ConditioningMode::soft_bias;
  int gcn_depth = 2;
  int ff_expansion = 4;
  double bin_low = -1.05;
  double bin_high = 1.05;

  int num_tokens() const { return max_features + 2; }
  void validate() const;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Cell values laid out in token order (features padded with zeros up to D, then t, then y).
struct ModelInput {
  int num_features = 0;
  Mat<double> context;  // n_ctx x (D + 2)
  Mat<double> queries;  // n_q x (D + 2); the outcome column is ignored
  std::optional<PartialAncestorMatrix> pam;  // token order, size D + 2
};

// Maps node indices of `task` to token positions.
std::vector<int> token_positions(const CausalTask& task, int max_features);

// PAM over task nodes -> PAM over tokens. Padding tokens are marked non-ancestors of, and
// non-descendants of, every other token.
PartialAncestorMatrix token_pam(const PartialAncestorMatrix& node_pam, const CausalTask& task, int max_features);

// Query rows take the interventional treatment value.
ModelInput make_model_input(const CausalTask& task, const PartialAncestorMatrix* node_pam, int max_features);

template <class S>
struct ForwardResult {
  Var logits;            // n_q x num_bins
  Var embedded;          // H0, ((N_sink + n) * (D + 2)) x d_model
  std::optional<Var> graph_embedding;  // (D + 2) x d_model
  std::vector<Var> feature_attention;  // one per layer
  std::vector<Var> sample_attention;   // one per layer
};

template <class S>
class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const BinEdges& bins() const { return bins_; }
  ParamStore<S>& params() { return params_; }
  const ParamStore<S>& params() const { return params_; }

  // Throws ValidationError when the input does not fit the configuration or a required PAM is
  // missing; a PAM under mode none is ignored with a warning on stderr.
  ForwardResult<S> forward(Tape<S>& tape, const ModelInput& input) const;
  Var graph_encode(Tape<S>& tape, const PartialAncestorMatrix& pam) const;

  // Normalised targets mapped to bins (clamped at the boundary bins).
  std::vector<int> target_bins(const std::vector<double>& y, ClampStats* stats = nullptr) const;
  std::vector<S> log_widths() const;

  // Copies values between precisions, matching parameters by name.
  template <class T>
  void load_values(const ParamStore<T>& other);

  // Convenience: softmaxed rows of the logits as bar distributions.
  std::vector<BarDistribution> distributions(const Tape<S>& tape, Var logits) const;

 private:
  struct LayerParams {
    int ln1_g, ln1_b, ada1_w, ada1_b;
    int fq_w, fq_b, fk_w, fk_b, fv_w, fv_b, fo_w, fo_b;
    int ln2_g, ln2_b;
    int sq_w, sq_b, sk_w, sk_b, sv_w, sv_b, so_w, so_b;
    int ln3_g, ln3_b, ada3_w, ada3_b;
    int ff1_w, ff1_b, ff3_w, ff3_b, ff2_w, ff2_b;
  };

  // Weights U(+-1/sqrt(in)) seeded by the parameter name, bias zero.
  int linear(const std::string& name, int in, int out, bool zero = false);
  Var lin(Tape<S>& t, Var x, int w, int b) const;

  ModelConfig config_;
  BinEdges bins_;
  mutable ParamStore<S> params_;
  int row_w1_, row_b1_, row_w2_, row_b2_;
  int cell_w1_, cell_b1_, cell_w2_, cell_b2_;
  int type_emb_, source_emb_, target_token_, lambda_row_, lambda_cell_, sinks_ = -1;
  int beta_anc_ = -1, beta_non_ = -1;
  int role_emb_ = -1;
  std::vector<std::vector<int>> gcn_w_;  // [layer][channel]
  std::vector<int> gcn_b_;
  std::vector<LayerParams> layers_;
  int lnf_g_, lnf_b_, head_w_, head_b_;
  std::uint64_t seed_;
};

// Inverse of softplus, used to set beta parameters.
double inverse_softplus(double y);

extern template class Model<float>;
extern template class Model<double>;

// Checkpoint: magic, JSON header (config, provenance, bin edges, tensor table), raw little-endian
// float32 tensor data.
struct Checkpoint {
  ModelConfig config;
  std::vector<double> bin_edges;
  nlohmann::json provenance;
  ParamStore<float> params;
};

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model, const nlohmann::json& provenance);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Model with the checkpoint's configuration and weights.
template <class S>
Model<S> model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace cfm
