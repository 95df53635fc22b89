#include "cfm/cli.hpp"

#include <openssl/sha.h>

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cfm/evaluation.hpp"
#include "cfm/plots.hpp"
#include "cfm/rng.hpp"
#include "cfm/training.hpp"

namespace cfm {

std::string git_blob_hash(const std::string& content) {
  const std::string blob = "blob " + std::to_string(content.size()) + '\0' + content;
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(blob.data()), blob.size(), digest);
  std::ostringstream hex;
  for (unsigned char c : digest) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(c);
  return hex.str();
}

std::string RunManifest::config_hash() const { return git_blob_hash(config.dump()); }

nlohmann::ordered_json RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["subcommand"] = subcommand;
  j["seed"] = seed;
  j["config"] = config;
  j["config_hash"] = config_hash();
  j["artifacts"] = artifacts;
  return j;
}

void RunManifest::write(const std::filesystem::path& path) const {
  write_text_file(path, to_json().dump(2) + "\n");
}

namespace {

struct Globals {
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string config;
  bool deterministic = false;
  std::string out;
};

std::filesystem::path output_dir(const Globals& g, const std::string& subcommand) {
  if (!g.out.empty()) return g.out;
  const char* root = std::getenv(kOutputRootEnv);
  return std::filesystem::path(root && *root ? root : "runs") / subcommand;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError(what + ": cannot parse '" + item + "' as a number");
    }
  }
  require(!out.empty(), what + " must not be empty");
  return out;
}

std::string relative_name(std::uint64_t i) {
  std::ostringstream s;
  s << "task_" << std::setw(5) << std::setfill('0') << i;
  return s.str();
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string prior = "linear_gaussian";
  int count = 10;
  std::string nodes;
  int context = -1, queries = -1, total_rows = -1;
};

int cmd_generate(const Globals& g, const GenerateArgs& a, std::ostream& out) {
  PriorConfig prior;
  if (!g.config.empty()) {
    const auto j = read_json_file(g.config);
    prior = prior_config_from_json(j.contains("prior") ? j.at("prior") : j);
  } else {
    prior.kind = prior_kind_from_string(a.prior);
  }
  if (!a.nodes.empty()) {
    prior.node_counts.clear();
    for (double v : parse_list(a.nodes, "--nodes")) prior.node_counts.push_back(static_cast<int>(v));
  }
  if (a.context > 0) prior.linear.num_context = a.context;
  if (a.queries > 0) prior.linear.num_queries = a.queries;
  if (a.total_rows > 0) prior.total_rows = a.total_rows;
  require(a.count >= 1, "--count must be at least 1");

  const auto dir = output_dir(g, "generate");
  std::filesystem::create_directories(dir);
  const auto root = derive_seed(g.seed, "generation");
  nlohmann::ordered_json manifest;
  manifest["prior"] = prior.identifier();
  manifest["prior_config"] = to_json(prior);
  manifest["seed"] = g.seed;
  manifest["count"] = a.count;
  manifest["tasks"] = nlohmann::ordered_json::array();
  for (int i = 0; i < a.count; ++i) {
    const auto task = generate_task(prior, root, static_cast<std::uint64_t>(i));
    const auto name = relative_name(static_cast<std::uint64_t>(i));
    save_task(task, dir / name);
    manifest["tasks"].push_back(name);
  }
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");

  RunManifest run{"generate", {{"prior", to_json(prior)}, {"count", a.count}}, g.seed, {"manifest.json"}};
  run.config["deterministic"] = g.deterministic;
  run.write(dir / "run_manifest.json");
  out << "wrote " << a.count << " tasks to " << dir.string() << '\n';
  return 0;
}

std::vector<CausalTask> load_shard(const std::filesystem::path& dir) {
  const auto j = read_json_file(dir / "manifest.json");
  std::vector<CausalTask> tasks;
  try {
    for (const auto& name : j.at("tasks")) tasks.push_back(load_task(dir / name.get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError((dir / "manifest.json").string() + ": " + e.what());
  }
  return tasks;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::optional<int> steps, batch_size, accumulation, eval_interval, eval_tasks, threads;
  std::optional<double> lr;
  std::optional<std::string> mode, hide_policy, prior;
  std::string resume;
  int stop_after = 0;
};

int cmd_train(const Globals& g, const TrainArgs& a, std::ostream& out) {
  if (g.config.empty()) throw ValidationError("train requires --config <file.json>");
  auto j = read_json_file(g.config);
  if (g.seed_given) j["seed"] = g.seed;
  if (a.steps) j["steps"] = *a.steps;
  if (a.batch_size) j["batch_size"] = *a.batch_size;
  if (a.accumulation) j["accumulation"] = *a.accumulation;
  if (a.eval_interval) j["eval_interval"] = *a.eval_interval;
  if (a.eval_tasks) j["eval_tasks"] = *a.eval_tasks;
  if (a.threads) j["threads"] = *a.threads;
  if (a.lr) j["lr"] = *a.lr;
  if (a.hide_policy) j["hide_policy"] = *a.hide_policy;
  if (a.mode) j["model"]["mode"] = *a.mode;
  if (a.prior) j["prior"]["kind"] = *a.prior;
  if (g.deterministic) j["deterministic"] = true;
  auto config = train_config_from_json(j);

  const auto dir = output_dir(g, "train");
  std::filesystem::create_directories(dir);
  TrainOptions options;
  options.checkpoint = dir / "checkpoint.cfm";
  options.metrics_csv = dir / "metrics.csv";
  options.state = dir / "state.cfmstate";
  options.stop_after = a.stop_after;
  if (!a.resume.empty()) options.resume = a.resume;
  else std::filesystem::remove(options.metrics_csv);

  RunManifest run{"train", to_json(config), config.seed, {"checkpoint.cfm", "metrics.csv", "state.cfmstate"}};
  run.write(dir / "run_manifest.json");
  train(config, options);
  out << "checkpoint " << options.checkpoint.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint, tasks, semisynthetic, hide_fractions = "0,0.5,1", report;
  int n_control = -1;
};

int cmd_eval(const Globals& g, const EvalArgs& a, std::ostream& out) {
  require(!a.checkpoint.empty(), "eval requires --checkpoint");
  require(a.tasks.empty() != a.semisynthetic.empty(), "eval requires exactly one of --tasks or --semisynthetic");
  const auto ckpt = load_checkpoint(a.checkpoint);
  const auto model = model_from_checkpoint<float>(ckpt);
  const auto dir = output_dir(g, "eval");
  const auto prefix = a.report.empty() ? dir / "report" : std::filesystem::path(a.report);
  RunManifest run;
  run.subcommand = "eval";
  run.seed = g.seed;
  run.config = {{"checkpoint", a.checkpoint}, {"deterministic", g.deterministic}};

  if (!a.tasks.empty()) {
    const auto fractions = parse_list(a.hide_fractions, "--hide-fractions");
    const auto tasks = load_shard(a.tasks);
    auto report = eval_predictive(model, tasks, fractions, derive_seed(g.seed, "eval"));
    report.checkpoint = std::filesystem::path(a.checkpoint).filename().string();
    write_report(report, prefix.string() + ".csv", prefix.string() + ".json");
    run.config["tasks"] = a.tasks;
    run.config["hide_fractions"] = fractions;
    run.artifacts = {prefix.filename().string() + ".csv", prefix.filename().string() + ".json"};
    for (const auto& s : report.strata)
      out << "hide_fraction " << s.hide_fraction << ": mean NLL " << s.nll_mean.estimate << " ["
          << s.nll_mean.lower << ", " << s.nll_mean.upper << "]\n";
  } else {
    auto data = load_semisynthetic(a.semisynthetic);
    if (a.n_control >= 0) data = rebalance(data, a.n_control, derive_seed(g.seed, "eval.rebalance"));
    const auto tau_hat = estimate_cate(model, data);
    const auto tau = data.true_effects();
    CateReport r{data.id, data.rows(), pehe(tau_hat, tau), 0.0, data.true_ate(), mean(tau_hat)};
    nlohmann::ordered_json j{{"id", r.id}, {"rows", r.rows}, {"pehe", r.pehe}, {"true_ate", r.true_ate},
                             {"estimated_ate", r.estimated_ate}};
    if (r.true_ate != 0.0) j["ate_error"] = ate_error(tau_hat, tau);
    else j["ate_error"] = nullptr;
    write_text_file(prefix.string() + ".json", j.dump(2) + "\n");
    std::ostringstream csv;
    csv << std::setprecision(17) << "row,tau_hat,tau\n";
    for (std::size_t i = 0; i < tau.size(); ++i) csv << i << ',' << tau_hat[i] << ',' << tau[i] << '\n';
    write_text_file(prefix.string() + ".csv", csv.str());
    run.config["semisynthetic"] = a.semisynthetic;
    run.config["n_control"] = a.n_control;
    run.artifacts = {prefix.filename().string() + ".csv", prefix.filename().string() + ".json"};
    out << data.id << ": sqrt(PEHE) " << r.pehe << ", true ATE " << r.true_ate << ", estimated ATE "
        << r.estimated_ate << '\n';
  }
  run.write(dir / "run_manifest.json");
  return 0;
}

// ---------------------------------------------------------------------------

struct DemoArgs {
  std::string checkpoint, kind = "bivariate";
  double slope = 0.25, noise_std = 0.1, t_min = -3.0, t_max = 3.0;
  int grid_points = 13, context = 64, samples = 200;
};

int cmd_demo(const Globals& g, const DemoArgs& a, std::ostream& out, std::ostream& err) {
  require(!a.checkpoint.empty(), "demo requires --checkpoint");
  require(a.kind == "bivariate" || a.kind == "misspecification",
          "--kind must be bivariate or misspecification, got '" + a.kind + "'");
  require(a.grid_points >= 2 && a.t_max > a.t_min, "the t grid needs at least two points and t_max > t_min");
  const auto ckpt = load_checkpoint(a.checkpoint);
  const auto prior = ckpt.provenance.value("prior", std::string());
  if (prior.rfind("linear_gaussian/nodes=2/", 0) != 0)
    err << "warning: checkpoint prior '" << prior << "' is not the 2-node linear-Gaussian prior\n";
  const auto model = model_from_checkpoint<float>(ckpt);
  std::vector<double> grid(static_cast<std::size_t>(a.grid_points));
  for (int i = 0; i < a.grid_points; ++i) grid[i] = a.t_min + (a.t_max - a.t_min) * i / (a.grid_points - 1);
  const auto data = make_bivariate_data(a.slope, a.noise_std, a.context, 1, grid, derive_seed(g.seed, "demo.data"));

  std::vector<PamMode> modes{PamMode::correct, PamMode::wrong};
  if (a.kind == "bivariate") modes.insert(modes.begin(), PamMode::none);
  std::vector<DemoResult> results;
  for (auto m : modes) results.push_back(bivariate_demo(model, data, m, a.samples, derive_seed(g.seed, "demo")));
  auto summary = demo_to_json(results, a.slope, a.noise_std);
  summary["kind"] = a.kind;
  if (a.kind == "misspecification") {
    const auto& c = results[0].points;
    const auto& w = results[1].points;
    double diff = 0.0, sd = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < c.size(); ++i)
      if (std::abs(std::abs(c[i].t) - 2.0) < 1e-9) {
        diff += std::abs(c[i].mean - w[i].mean);
        sd += c[i].stddev;
        ++n;
      }
    if (n > 0) summary["at_abs_t_2"] = {{"mean_abs_difference", diff / n}, {"correct_std", sd / n}};
  }

  const auto dir = output_dir(g, "demo");
  RunManifest run;
  run.subcommand = "demo";
  run.seed = g.seed;
  run.config = {{"checkpoint", a.checkpoint}, {"kind", a.kind},       {"slope", a.slope},
                {"noise_std", a.noise_std},   {"t_min", a.t_min},      {"t_max", a.t_max},
                {"grid_points", a.grid_points}, {"context", a.context}, {"samples", a.samples}};
  write_text_file(dir / "summary.json", summary.dump(2) + "\n");
  run.artifacts.push_back("summary.json");
  for (const auto& r : results) {
    const auto name = "fan_" + to_string(r.mode) + ".svg";
    write_text_file(dir / name, posterior_fan_svg(r, "PAM " + to_string(r.mode)));
    run.artifacts.push_back(name);
  }
  run.write(dir / "run_manifest.json");
  out << "wrote " << run.artifacts.size() << " files to " << dir.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct PlotArgs {
  std::string summary, candidate, baseline;
};

std::map<double, std::vector<double>> nll_by_fraction(const std::filesystem::path& csv_path) {
  const auto csv = read_csv_file(csv_path);
  const int hf = csv.column("hide_fraction"), nll = csv.column("nll");
  if (hf < 0 || nll < 0) throw ValidationError(csv_path.string() + ": not an evaluation report CSV");
  std::map<double, std::vector<double>> out;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) out[csv.number(r, hf)].push_back(csv.number(r, nll));
  return out;
}

int cmd_plot(const Globals& g, const PlotArgs& a, std::ostream& out) {
  require(!a.summary.empty() || (!a.candidate.empty() && !a.baseline.empty()),
          "plot requires --summary, or both --candidate and --baseline");
  const auto dir = output_dir(g, "plot");
  RunManifest run;
  run.subcommand = "plot";
  run.seed = g.seed;
  if (!a.summary.empty()) {
    const auto j = read_json_file(a.summary);
    if (!j.contains("modes")) throw ValidationError(a.summary + ": not a demo summary");
    for (const auto& m : j.at("modes")) {
      const auto r = demo_result_from_json(m);
      const auto name = "fan_" + to_string(r.mode) + ".svg";
      write_text_file(dir / name, posterior_fan_svg(r, "PAM " + to_string(r.mode)));
      run.artifacts.push_back(name);
    }
    run.config["summary"] = a.summary;
  }
  if (!a.candidate.empty()) {
    const auto cand = nll_by_fraction(a.candidate), base = nll_by_fraction(a.baseline);
    std::vector<std::string> labels;
    std::vector<ConfidenceInterval> deltas;
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    std::uint64_t k = 0;
    for (const auto& [fraction, values] : cand) {
      auto it = base.find(fraction);
      if (it == base.end()) continue;
      require(it->second.size() == values.size(), "candidate and baseline reports cover different task sets");
      // Positive = candidate NLL lower than the baseline.
      const auto ci = paired_delta(it->second, values, Statistic::median, derive_seed(g.seed, "plot.delta", k++));
      std::ostringstream label;
      label << "hide " << fraction;
      labels.push_back(label.str());
      deltas.push_back(ci);
      j.push_back({{"hide_fraction", fraction}, {"estimate", ci.estimate}, {"lower", ci.lower}, {"upper", ci.upper}});
    }
    require(!labels.empty(), "the reports share no hide fraction");
    write_text_file(dir / "nll_delta.svg", delta_bars_svg(labels, deltas, "NLL improvement over baseline",
                                                         "median paired NLL reduction"));
    write_text_file(dir / "nll_delta.json", j.dump(2) + "\n");
    run.artifacts.push_back("nll_delta.svg");
    run.artifacts.push_back("nll_delta.json");
    run.config["candidate"] = a.candidate;
    run.config["baseline"] = a.baseline;
  }
  run.write(dir / "run_manifest.json");
  out << "wrote " << run.artifacts.size() << " figure files to " << dir.string() << '\n';
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Causal in-context prediction with partial ancestral knowledge", "cfm"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "root seed");
  app.add_option("--config", g.config, "JSON config file");
  app.add_flag("--deterministic", g.deterministic, "single-threaded, reproducible execution");
  app.add_option("--out", g.out, std::string("output directory (default $") + kOutputRootEnv + "/<subcommand>)");

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "sample tasks from a prior into a shard directory");
  gen->add_option("--prior", ga.prior, "linear_gaussian or complex");
  gen->add_option("--count", ga.count, "number of tasks");
  gen->add_option("--nodes", ga.nodes, "comma-separated node counts (linear_gaussian)");
  gen->add_option("--context", ga.context, "context rows (linear_gaussian)");
  gen->add_option("--queries", ga.queries, "query rows (linear_gaussian)");
  gen->add_option("--total-rows", ga.total_rows, "rows per task (complex)");

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "train a model on freshly sampled tasks");
  tr->add_option("--steps", ta.steps);
  tr->add_option("--batch-size", ta.batch_size);
  tr->add_option("--accumulation", ta.accumulation);
  tr->add_option("--lr", ta.lr);
  tr->add_option("--mode", ta.mode, "conditioning mode");
  tr->add_option("--hide-policy", ta.hide_policy);
  tr->add_option("--prior", ta.prior);
  tr->add_option("--eval-interval", ta.eval_interval);
  tr->add_option("--eval-tasks", ta.eval_tasks);
  tr->add_option("--threads", ta.threads);
  tr->add_option("--resume", ta.resume, "training state to resume from");
  tr->add_option("--stop-after", ta.stop_after, "stop after this many steps in this run");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--checkpoint", ea.checkpoint)->required();
  ev->add_option("--tasks", ea.tasks, "shard directory written by generate");
  ev->add_option("--semisynthetic", ea.semisynthetic, "CSV with covariates, t, y, y0, y1");
  ev->add_option("--n-control", ea.n_control, "subsample untreated rows (semi-synthetic)");
  ev->add_option("--hide-fractions", ea.hide_fractions, "comma-separated hide fractions");
  ev->add_option("--report", ea.report, "report path prefix (.csv and .json are appended)");

  DemoArgs da;
  auto* de = app.add_subcommand("demo", "bivariate posterior demos");
  de->add_option("--checkpoint", da.checkpoint)->required();
  de->add_option("--kind", da.kind, "bivariate or misspecification");
  de->add_option("--slope", da.slope);
  de->add_option("--noise-std", da.noise_std);
  de->add_option("--t-min", da.t_min);
  de->add_option("--t-max", da.t_max);
  de->add_option("--grid-points", da.grid_points);
  de->add_option("--context", da.context, "observational rows");
  de->add_option("--samples", da.samples, "posterior samples per grid point");

  PlotArgs pa;
  auto* pl = app.add_subcommand("plot", "render figures from demo summaries or evaluation reports");
  pl->add_option("--summary", pa.summary, "demo summary.json");
  pl->add_option("--candidate", pa.candidate, "report CSV of the conditioned model");
  pl->add_option("--baseline", pa.baseline, "report CSV of the baseline model");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 1;
  }
  g.seed_given = seed_opt->count() > 0;

  try {
    if (*gen) return cmd_generate(g, ga, out);
    if (*tr) return cmd_train(g, ta, out);
    if (*ev) return cmd_eval(g, ea, out);
    if (*de) return cmd_demo(g, da, out, err);
    if (*pl) return cmd_plot(g, pa, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const RuntimeFailure& e) {
    err << "failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace cfm
