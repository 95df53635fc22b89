#include "cfm/training.hpp"

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <numbers>
#include <thread>

#include "cfm/parallel.hpp"
#include "cfm/rng.hpp"

namespace cfm {

std::string to_string(HidePolicy policy) {
  switch (policy) {
    case HidePolicy::always_full: return "always_full";
    case HidePolicy::always_none: return "always_none";
    case HidePolicy::uniform_amortized: return "uniform_amortized";
  }
  return "uniform_amortized";
}

HidePolicy hide_policy_from_string(const std::string& s) {
  if (s == "always_full") return HidePolicy::always_full;
  if (s == "always_none") return HidePolicy::always_none;
  if (s == "uniform_amortized") return HidePolicy::uniform_amortized;
  throw ValidationError("unknown hide policy '" + s + "' (expected always_full, always_none, uniform_amortized)");
}

void TrainConfig::validate() const {
  require(steps >= 1, "steps must be at least 1");
  require(batch_size >= 1, "batch_size must be at least 1");
  require(accumulation >= 1 && batch_size % accumulation == 0,
          "batch_size must be a positive multiple of accumulation");
  require(lr > 0.0, "lr must be positive");
  require(warmup_ratio >= 0.0 && warmup_ratio < 1.0, "warmup_ratio must lie in [0, 1)");
  require(min_lr_ratio > 0.0 && min_lr_ratio <= 1.0, "min_lr_ratio must lie in (0, 1]");
  require(weight_decay >= 0.0, "weight_decay must be non-negative");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
          "Adam betas must lie in [0, 1)");
  require(adam_eps > 0.0, "adam_eps must be positive");
  require(eval_interval >= 0, "eval_interval must be non-negative");
  require(eval_tasks >= 1, "eval_tasks must be at least 1");
  require(threads >= 0, "threads must be non-negative");
  model.validate();
  if (prior.kind == PriorKind::linear_gaussian) {
    require(!prior.node_counts.empty(), "the linear-Gaussian prior needs at least one node count");
    for (int k : prior.node_counts)
      require(k >= 2 && k - 2 <= model.max_features,
              "prior node count " + std::to_string(k) + " exceeds the model's max_features + 2");
  } else {
    require(prior.complex.max_nodes - 2 <= model.max_features, "complex prior nodes exceed max_features + 2");
  }
}

nlohmann::ordered_json to_json(const PriorConfig& p) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(p.kind);
  j["node_counts"] = p.node_counts;
  j["num_context"] = p.linear.num_context;
  j["num_queries"] = p.linear.num_queries;
  j["min_nodes"] = p.complex.min_nodes;
  j["max_nodes"] = p.complex.max_nodes;
  j["total_rows"] = p.total_rows;
  return j;
}

namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> keys, const std::string& what) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw ValidationError(what + ": unknown key '" + it.key() + "'");
  }
}

}  // namespace

PriorConfig prior_config_from_json(const nlohmann::json& j) {
  require(j.is_object(), "prior config must be a JSON object");
  reject_unknown(j, {"kind", "node_counts", "num_context", "num_queries", "min_nodes", "max_nodes", "total_rows"},
                 "prior config");
  PriorConfig p;
  try {
    p.kind = prior_kind_from_string(j.value("kind", to_string(p.kind)));
    p.node_counts = j.value("node_counts", p.node_counts);
    p.linear.num_context = j.value("num_context", p.linear.num_context);
    p.linear.num_queries = j.value("num_queries", p.linear.num_queries);
    p.complex.min_nodes = j.value("min_nodes", p.complex.min_nodes);
    p.complex.max_nodes = j.value("max_nodes", p.complex.max_nodes);
    p.total_rows = j.value("total_rows", p.total_rows);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("prior config: ") + e.what());
  }
  require(p.linear.num_context >= 2 && p.linear.num_queries >= 1, "prior needs >= 2 context and >= 1 query rows");
  return p;
}

nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["steps"] = c.steps;
  j["batch_size"] = c.batch_size;
  j["accumulation"] = c.accumulation;
  j["lr"] = c.lr;
  j["warmup_ratio"] = c.warmup_ratio;
  j["min_lr_ratio"] = c.min_lr_ratio;
  j["weight_decay"] = c.weight_decay;
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["adam_eps"] = c.adam_eps;
  j["prior"] = to_json(c.prior);
  j["model"] = to_json(c.model);
  j["hide_policy"] = to_string(c.hide_policy);
  j["seed"] = c.seed;
  j["eval_interval"] = c.eval_interval;
  j["eval_tasks"] = c.eval_tasks;
  j["threads"] = c.threads;
  j["deterministic"] = c.deterministic;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  require(j.is_object(), "train config must be a JSON object");
  reject_unknown(j,
                 {"steps", "batch_size", "accumulation", "lr", "warmup_ratio", "min_lr_ratio", "weight_decay",
                  "adam_beta1", "adam_beta2", "adam_eps", "prior", "model", "hide_policy", "seed", "eval_interval",
                  "eval_tasks", "threads", "deterministic"},
                 "train config");
  TrainConfig c;
  try {
    c.steps = j.value("steps", c.steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.accumulation = j.value("accumulation", c.accumulation);
    c.lr = j.value("lr", c.lr);
    c.warmup_ratio = j.value("warmup_ratio", c.warmup_ratio);
    c.min_lr_ratio = j.value("min_lr_ratio", c.min_lr_ratio);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    if (j.contains("prior")) c.prior = prior_config_from_json(j.at("prior"));
    if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
    c.hide_policy = hide_policy_from_string(j.value("hide_policy", to_string(c.hide_policy)));
    c.seed = j.value("seed", c.seed);
    c.eval_interval = j.value("eval_interval", c.eval_interval);
    c.eval_tasks = j.value("eval_tasks", c.eval_tasks);
    c.threads = j.value("threads", c.threads);
    c.deterministic = j.value("deterministic", c.deterministic);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

double lr_schedule(int step, const TrainConfig& c) {
  require(step >= 0 && step <= c.steps, "lr_schedule step out of range");
  const double warm = c.warmup_ratio * c.steps;
  if (step < warm) return c.lr * step / warm;
  const double span = c.steps - warm;
  const double progress = span > 0.0 ? (step - warm) / span : 1.0;
  return c.lr * (c.min_lr_ratio + (1.0 - c.min_lr_ratio) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
}

double sample_hide_fraction(HidePolicy policy, std::uint64_t seed) {
  switch (policy) {
    case HidePolicy::always_full: return 0.0;
    case HidePolicy::always_none: return 1.0;
    case HidePolicy::uniform_amortized: {
      auto rng = make_rng(seed);
      return uniform(rng);
    }
  }
  return 1.0;
}

PartialAncestorMatrix apply_hide_policy(const CausalTask& task, HidePolicy policy, std::uint64_t seed) {
  const double fraction = sample_hide_fraction(policy, derive_seed(seed, "fraction"));
  return hide_entries(task.ancestors, fraction, derive_seed(seed, "entries"), task.roles());
}

TrainItem make_train_item(const TrainConfig& config, std::uint64_t index) {
  TrainItem item;
  item.index = index;
  item.task = generate_task(config.prior, derive_seed(config.seed, "generation"), index);
  item.pam = apply_hide_policy(item.task, config.hide_policy, derive_seed(config.seed, "training.hide", index));
  return item;
}

std::vector<TrainItem> make_eval_set(const TrainConfig& config) {
  std::vector<TrainItem> items(static_cast<std::size_t>(config.eval_tasks));
  parallel_for(config.eval_tasks, config.threads > 0 ? config.threads : default_threads(),
               [&](int i) { items[static_cast<std::size_t>(i)] = make_train_item(config, kEvalIndexBase + i); });
  return items;
}

// ---------------------------------------------------------------------------

template <class S>
Var task_loss(Model<S>& model, Tape<S>& tape, const TrainItem& item) {
  const bool conditioned = model.config().mode != ConditioningMode::none;
  const auto input = make_model_input(item.task, conditioned ? &item.pam : nullptr, model.config().max_features);
  const auto res = model.forward(tape, input);
  std::vector<double> y(static_cast<std::size_t>(item.task.num_queries()));
  for (int r = 0; r < item.task.num_queries(); ++r) y[r] = item.task.interventional(r, item.task.outcome);
  return tape.bar_nll(res.logits, model.target_bins(y), model.log_widths());
}

namespace {

template <class S>
bool grads_finite(const ParamStore<S>& store) {
  for (const auto& p : store)
    if (!p.grad.allFinite()) return false;
  return true;
}

// Adam with L2 weight decay added to the gradient.
template <class S>
void adam_update(ParamStore<S>& store, TrainState<S>& state, const TrainConfig& c, double lr) {
  ++state.adam_step;
  const double t = static_cast<double>(state.adam_step);
  const S b1 = static_cast<S>(c.adam_beta1), b2 = static_cast<S>(c.adam_beta2);
  const S corr1 = static_cast<S>(1.0 - std::pow(c.adam_beta1, t));
  const S corr2 = static_cast<S>(1.0 - std::pow(c.adam_beta2, t));
  const S step = static_cast<S>(lr), eps = static_cast<S>(c.adam_eps), wd = static_cast<S>(c.weight_decay);
  for (auto& p : store) {
    const Mat<S> g = p.grad + wd * p.value;
    p.m = b1 * p.m + (S(1) - b1) * g;
    p.v = b2 * p.v + (S(1) - b2) * g.cwiseProduct(g);
    p.value.array() -= step * (p.m.array() / corr1) / ((p.v.array() / corr2).sqrt() + eps);
  }
}

}  // namespace

template <class S>
StepResult training_step(Model<S>& model, TrainState<S>& state, const TrainConfig& config,
                         const std::vector<TrainItem>& batch) {
  require(static_cast<int>(batch.size()) == config.batch_size,
          "batch holds " + std::to_string(batch.size()) + " tasks, expected " + std::to_string(config.batch_size));
  require(state.step < config.steps, "training already reached its step budget");
  auto& store = model.params();
  store.zero_grad();
  const int micro = config.batch_size / config.accumulation;
  double total = 0.0;
  bool finite = true;
  for (int a = 0; a < config.accumulation && finite; ++a) {
    for (int i = 0; i < micro; ++i) {
      const auto& item = batch[static_cast<std::size_t>(a * micro + i)];
      Tape<S> tape;
      const Var loss = task_loss(model, tape, item);
      const double value = static_cast<double>(tape.value(loss)(0, 0));
      if (!std::isfinite(value)) {
        finite = false;
        break;
      }
      total += value;
      // Each micro-batch contributes its mean, and micro-batches are averaged.
      tape.backward(tape.scale(loss, static_cast<S>(1.0 / (micro * config.accumulation))));
    }
  }
  finite = finite && grads_finite(store);
  StepResult result;
  result.lr = lr_schedule(state.step + 1, config);
  ++state.step;
  if (!finite) {
    store.zero_grad();
    result.skipped = true;
    result.loss = std::numeric_limits<double>::quiet_NaN();
    ++state.loss.skipped;
    std::cerr << "step " << state.step << ": non-finite loss or gradient, update skipped\n";
    if (++state.loss.consecutive_skips >= 3)
      throw RuntimeFailure("training aborted after three consecutive non-finite steps (step " +
                           std::to_string(state.step) + ")");
    return result;
  }
  state.loss.consecutive_skips = 0;
  result.loss = total / config.batch_size;
  adam_update(store, state, config, result.lr);
  state.loss.last = result.loss;
  state.loss.ema = state.loss.updates == 0 ? result.loss : 0.98 * state.loss.ema + 0.02 * result.loss;
  ++state.loss.updates;
  return result;
}

template <class S>
double evaluate_loss(const Model<S>& model, const std::vector<TrainItem>& items) {
  require(!items.empty(), "evaluation set is empty");
  std::vector<double> losses(items.size());
  auto& m = const_cast<Model<S>&>(model);  // no-grad tapes never write to the store
  parallel_for(static_cast<int>(items.size()), default_threads(), [&](int i) {
    Tape<S> tape(false);
    const Var loss = task_loss(m, tape, items[static_cast<std::size_t>(i)]);
    losses[static_cast<std::size_t>(i)] = static_cast<double>(tape.value(loss)(0, 0));
  });
  double s = 0.0;
  for (double l : losses) s += l;
  return s / static_cast<double>(losses.size());
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kStateMagic[8] = {'C', 'F', 'M', 'S', 'T', 'A', 'T', '1'};

template <class S>
const char* scalar_name() {
  return sizeof(S) == 4 ? "f32" : "f64";
}

}  // namespace

template <class S>
void save_train_state(const std::filesystem::path& path, const Model<S>& model, const TrainState<S>& state,
                      const TrainConfig& config) {
  nlohmann::ordered_json header;
  header["config"] = to_json(config);
  header["scalar"] = scalar_name<S>();
  header["step"] = state.step;
  header["next_task"] = state.next_task;
  header["adam_step"] = state.adam_step;
  header["loss"] = {{"last", state.loss.last},
                    {"ema", state.loss.ema},
                    {"updates", state.loss.updates},
                    {"skipped", state.loss.skipped},
                    {"consecutive_skips", state.loss.consecutive_skips}};
  nlohmann::ordered_json names = nlohmann::ordered_json::array();
  for (const auto& p : model.params()) names.push_back({{"name", p.name}, {"shape", {p.value.rows(), p.value.cols()}}});
  header["tensors"] = names;
  const std::string text = header.dump();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write training state " + tmp);
    out.write(kStateMagic, sizeof kStateMagic);
    const auto len = static_cast<std::uint32_t>(text.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& p : model.params())
      for (const Mat<S>* m : {&p.value, &p.m, &p.v})
        out.write(reinterpret_cast<const char*>(m->data()), static_cast<std::streamsize>(m->size() * sizeof(S)));
    if (!out) throw RuntimeFailure("short write to training state " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

template <class S>
TrainState<S> load_train_state(const std::filesystem::path& path, Model<S>& model, const TrainConfig& config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("cannot read training state " + path.string());
  char magic[8];
  std::uint32_t len = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kStateMagic, sizeof magic) != 0)
    throw ValidationError(path.string() + ": not a training state file");
  std::string text(len, '\0');
  in.read(text.data(), len);
  TrainState<S> state;
  try {
    const auto header = nlohmann::json::parse(text);
    if (header.at("scalar").get<std::string>() != scalar_name<S>())
      throw ValidationError(path.string() + ": training state precision does not match");
    auto saved = header.at("config");
    auto current = nlohmann::json(to_json(config));
    // The step budget may be extended on resume; everything else must match.
    saved.erase("steps");
    current.erase("steps");
    if (saved != current) throw ValidationError(path.string() + ": training state was written with another config");
    state.step = header.at("step").get<int>();
    state.next_task = header.at("next_task").get<std::uint64_t>();
    state.adam_step = header.at("adam_step").get<std::uint64_t>();
    const auto& l = header.at("loss");
    state.loss.last = l.at("last").get<double>();
    state.loss.ema = l.at("ema").get<double>();
    state.loss.updates = l.at("updates").get<std::uint64_t>();
    state.loss.skipped = l.at("skipped").get<std::uint64_t>();
    state.loss.consecutive_skips = l.at("consecutive_skips").get<int>();
    const auto& tensors = header.at("tensors");
    require(tensors.size() == static_cast<std::size_t>(model.params().size()),
            path.string() + ": tensor count does not match the model");
    int i = 0;
    for (auto& p : model.params()) {
      require(tensors.at(static_cast<std::size_t>(i++)).at("name").get<std::string>() == p.name,
              path.string() + ": tensor order does not match the model");
      for (Mat<S>* m : {&p.value, &p.m, &p.v}) {
        in.read(reinterpret_cast<char*>(m->data()), static_cast<std::streamsize>(m->size() * sizeof(S)));
        if (!in) throw ValidationError(path.string() + ": truncated tensor " + p.name);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": malformed training state: " + e.what());
  }
  return state;
}

// ---------------------------------------------------------------------------

namespace {

// Producers claim task indices in order and park results until the consumer reaches them, so the
// sequence seen by training depends only on the indices.
class TaskStream {
 public:
  TaskStream(const TrainConfig& config, std::uint64_t start, int threads, std::uint64_t capacity)
      : config_(config), claim_(start), consume_(start), capacity_(capacity) {
    for (int i = 0; i < threads; ++i) workers_.emplace_back([this] { work(); });
  }

  ~TaskStream() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  TrainItem next() {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [&] { return ready_.count(consume_) || errors_.count(consume_); });
    if (auto e = errors_.find(consume_); e != errors_.end()) std::rethrow_exception(e->second);
    auto node = ready_.extract(consume_);
    ++consume_;
    lock.unlock();
    cv_.notify_all();
    return std::move(node.mapped());
  }

 private:
  void work() {
    for (;;) {
      std::uint64_t index;
      {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [&] { return stop_ || claim_ < consume_ + capacity_; });
        if (stop_) return;
        index = claim_++;
      }
      try {
        auto item = make_train_item(config_, index);
        std::lock_guard<std::mutex> lock(mu_);
        ready_.emplace(index, std::move(item));
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu_);
        errors_.emplace(index, std::current_exception());
      }
      cv_.notify_all();
    }
  }

  const TrainConfig& config_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::uint64_t, TrainItem> ready_;
  std::map<std::uint64_t, std::exception_ptr> errors_;
  std::uint64_t claim_, consume_, capacity_;
  bool stop_ = false;
  std::vector<std::thread> workers_;
};

void write_metrics_header(const std::filesystem::path& path) {
  if (std::filesystem::exists(path) && std::filesystem::file_size(path) > 0) return;
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write metrics " + path.string());
  out << "step,kind,loss,lr,eval_nll\n";
}

}  // namespace

nlohmann::ordered_json train_provenance(const TrainConfig& config, int steps_done) {
  nlohmann::ordered_json p;
  p["seed"] = config.seed;
  p["steps"] = steps_done;
  p["steps_planned"] = config.steps;
  p["prior"] = config.prior.identifier();
  p["hide_policy"] = to_string(config.hide_policy);
  p["conditioning_mode"] = to_string(config.model.mode);
  p["optimizer"] = {{"name", "adam"},
                    {"lr", config.lr},
                    {"beta1", config.adam_beta1},
                    {"beta2", config.adam_beta2},
                    {"eps", config.adam_eps},
                    {"weight_decay", config.weight_decay},
                    {"weight_decay_mode", "coupled_l2"},
                    {"dropout", 0.0}};
  p["schedule"] = {{"kind", "warmup_cosine"}, {"warmup_ratio", config.warmup_ratio},
                   {"min_lr_ratio", config.min_lr_ratio}};
  p["batch_size"] = config.batch_size;
  p["accumulation"] = config.accumulation;
  p["deterministic"] = config.deterministic;
  p["train_config"] = to_json(config);
  return p;
}

Model<float> train(const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  Model<float> model(config.model, derive_seed(config.seed, "training.init"));
  TrainState<float> state;
  if (options.resume) state = load_train_state(*options.resume, model, config);
  require(state.step <= config.steps, "resumed state is past the step budget");

  if (!options.metrics_csv.empty()) {
    if (options.metrics_csv.has_parent_path()) std::filesystem::create_directories(options.metrics_csv.parent_path());
    write_metrics_header(options.metrics_csv);
  }
  std::ofstream metrics;
  if (!options.metrics_csv.empty()) {
    metrics.open(options.metrics_csv, std::ios::app);
    metrics << std::setprecision(9);
  }
  std::vector<TrainItem> eval_set;
  if (config.eval_interval > 0) eval_set = make_eval_set(config);

  auto finish = [&] {
    save_checkpoint(options.checkpoint, model, train_provenance(config, state.step));
    if (!options.state.empty()) save_train_state(options.state, model, state, config);
  };

  const int producers = config.deterministic ? 1 : (config.threads > 0 ? config.threads : default_threads());
  TaskStream stream(config, state.next_task, producers, static_cast<std::uint64_t>(2 * config.batch_size));
  const int last = options.stop_after > 0 ? std::min(config.steps, state.step + options.stop_after) : config.steps;
  try {
    while (state.step < last) {
      std::vector<TrainItem> batch;
      for (int i = 0; i < config.batch_size; ++i) batch.push_back(stream.next());
      state.next_task += static_cast<std::uint64_t>(config.batch_size);
      const auto r = training_step(model, state, config, batch);
      if (metrics.is_open()) metrics << state.step << ",train," << r.loss << ',' << r.lr << ",\n";
      if (options.on_step) options.on_step(state.step, r);
      if (config.eval_interval > 0 && state.step % config.eval_interval == 0) {
        const double nll = evaluate_loss(model, eval_set);
        if (metrics.is_open()) metrics << state.step << ",eval,," << r.lr << ',' << nll << '\n';
        if (!options.quiet) std::cerr << "step " << state.step << " eval_nll " << nll << '\n';
      }
      if (!options.quiet && state.step % 100 == 0)
        std::cerr << "step " << state.step << " loss_ema " << state.loss.ema << " lr " << r.lr << '\n';
    }
  } catch (const RuntimeFailure&) {
    metrics.flush();
    finish();
    throw;
  }
  metrics.flush();
  finish();
  return model;
}

template Var task_loss<float>(Model<float>&, Tape<float>&, const TrainItem&);
template Var task_loss<double>(Model<double>&, Tape<double>&, const TrainItem&);
template StepResult training_step<float>(Model<float>&, TrainState<float>&, const TrainConfig&,
                                         const std::vector<TrainItem>&);
template StepResult training_step<double>(Model<double>&, TrainState<double>&, const TrainConfig&,
                                          const std::vector<TrainItem>&);
template double evaluate_loss<float>(const Model<float>&, const std::vector<TrainItem>&);
template double evaluate_loss<double>(const Model<double>&, const std::vector<TrainItem>&);
template void save_train_state<float>(const std::filesystem::path&, const Model<float>&, const TrainState<float>&,
                                      const TrainConfig&);
template void save_train_state<double>(const std::filesystem::path&, const Model<double>&,
                                       const TrainState<double>&, const TrainConfig&);
template TrainState<float> load_train_state<float>(const std::filesystem::path&, Model<float>&, const TrainConfig&);
template TrainState<double> load_train_state<double>(const std::filesystem::path&, Model<double>&,
                                                     const TrainConfig&);

}  // namespace cfm
