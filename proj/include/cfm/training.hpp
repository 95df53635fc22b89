#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfm/model.hpp"
#include "cfm/task.hpp"

namespace cfm {

enum class HidePolicy : std::uint8_t { always_full, always_none, uniform_amortized };
std::string to_string(HidePolicy policy);
HidePolicy hide_policy_from_string(const std::string& s);

struct TrainConfig {
  int steps = 5000;
  // Tasks per optimizer update, split into `accumulation` micro-batches.
  int batch_size = 8;
  int accumulation = 1;
  double lr = 1e-4;
  double warmup_ratio = 0.1;
  double min_lr_ratio = 0.1;
  double weight_decay = 1e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  PriorConfig prior{};
  ModelConfig model{};
  HidePolicy hide_policy = HidePolicy::uniform_amortized;
  std::uint64_t seed = 0;
  // Evaluation on the held-out set every `eval_interval` steps (0 = never).
  int eval_interval = 0;
  int eval_tasks = 256;
  int threads = 0;  // task producers; 0 = hardware concurrency
  bool deterministic = false;

  void validate() const;
};

nlohmann::ordered_json to_json(const PriorConfig& prior);
PriorConfig prior_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const TrainConfig& config);
// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);

double lr_schedule(int step, const TrainConfig& config);

// Hide fraction drawn for a task under `policy` (1 = all hidden).
double sample_hide_fraction(HidePolicy policy, std::uint64_t seed);
PartialAncestorMatrix apply_hide_policy(const CausalTask& task, HidePolicy policy, std::uint64_t seed);

struct TrainItem {
  std::uint64_t index = 0;
  CausalTask task;
  PartialAncestorMatrix pam;  // node order
};

// Training task `index`: fresh prior draw plus its hidden PAM, a pure function of (config, index).
TrainItem make_train_item(const TrainConfig& config, std::uint64_t index);
// Held-out tasks come from an index range no training run reaches.
inline constexpr std::uint64_t kEvalIndexBase = std::uint64_t{1} << 48;
std::vector<TrainItem> make_eval_set(const TrainConfig& config);

struct LossStats {
  double last = 0.0;
  double ema = 0.0;  // exponential moving average, factor 0.98
  std::uint64_t updates = 0;
  std::uint64_t skipped = 0;
  int consecutive_skips = 0;
};

template <class S>
struct TrainState {
  int step = 0;                      // completed optimizer steps
  std::uint64_t next_task = 0;       // index of the next training task
  std::uint64_t adam_step = 0;
  LossStats loss;
};

struct StepResult {
  double loss = 0.0;
  bool skipped = false;
  double lr = 0.0;
};

// Mean NLL over the query rows of one task (1 x 1).
template <class S>
Var task_loss(Model<S>& model, Tape<S>& tape, const TrainItem& item);

// One optimizer update over `batch` (size = batch_size), accumulating gradients over
// config.accumulation micro-batches. A non-finite loss or gradient skips the update; the third
// consecutive skip throws RuntimeFailure.
template <class S>
StepResult training_step(Model<S>& model, TrainState<S>& state, const TrainConfig& config,
                         const std::vector<TrainItem>& batch);

// Mean over tasks of the per-task NLL.
template <class S>
double evaluate_loss(const Model<S>& model, const std::vector<TrainItem>& items);

template <class S>
void save_train_state(const std::filesystem::path& path, const Model<S>& model, const TrainState<S>& state,
                      const TrainConfig& config);
template <class S>
TrainState<S> load_train_state(const std::filesystem::path& path, Model<S>& model, const TrainConfig& config);

struct TrainOptions {
  std::filesystem::path checkpoint;   // final (or partial) checkpoint
  std::filesystem::path metrics_csv;  // append-only
  std::filesystem::path state;        // optional resumable state, written at the end and on abort
  std::optional<std::filesystem::path> resume;
  // Stop after this many steps in this call (for resume tests); 0 = run to config.steps.
  int stop_after = 0;
  std::function<void(int step, const StepResult&)> on_step;
  bool quiet = false;
};

nlohmann::ordered_json train_provenance(const TrainConfig& config, int steps_done);

// Returns the trained model; the checkpoint is written to options.checkpoint.
Model<float> train(const TrainConfig& config, const TrainOptions& options);

extern template Var task_loss<float>(Model<float>&, Tape<float>&, const TrainItem&);
extern template Var task_loss<double>(Model<double>&, Tape<double>&, const TrainItem&);
extern template StepResult training_step<float>(Model<float>&, TrainState<float>&, const TrainConfig&,
                                                const std::vector<TrainItem>&);
extern template StepResult training_step<double>(Model<double>&, TrainState<double>&, const TrainConfig&,
                                                 const std::vector<TrainItem>&);

}  // namespace cfm
