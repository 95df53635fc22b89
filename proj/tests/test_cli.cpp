#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cfm/cli.hpp"
#include "cfm/training.hpp"

using namespace cfm;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out, err;
};

CliResult cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

class CliPipeline : public ::testing::Test {
 protected:
  static fs::path root;

  static void SetUpTestSuite() {
    root = fs::temp_directory_path() / "cfm_test_cli";
    fs::remove_all(root);
    fs::create_directories(root);
    TrainConfig c;
    c.steps = 40;
    c.batch_size = 2;
    c.eval_interval = 10;
    c.eval_tasks = 4;
    c.prior.node_counts = {2, 5};
    c.prior.linear = {24, 12};
    c.model.d_model = 16;
    c.model.num_layers = 1;
    c.model.num_heads = 2;
    c.model.max_features = 3;
    c.model.num_bins = 32;
    std::ofstream(root / "train.json") << to_json(c).dump(2);

    ASSERT_EQ(cli({"generate", "--seed", "3", "--deterministic", "--count", "10", "--nodes", "2,5", "--context", "24",
                   "--queries", "12", "--out", (root / "gen").string()})
                  .code,
              0);
    ASSERT_EQ(cli({"train", "--seed", "3", "--deterministic", "--config", (root / "train.json").string(), "--steps",
                   "20", "--out", (root / "train").string()})
                  .code,
              0);
  }

  static fs::path checkpoint() { return root / "train" / "checkpoint.cfm"; }
};

fs::path CliPipeline::root;

}  // namespace

TEST(Cli, MissingConfigIsUsageError) {
  const auto r = cli({"train", "--steps", "10", "--out", (fs::temp_directory_path() / "cfm_cli_noconf").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(r.err.empty());
}

TEST(Cli, UnknownSubcommandAndBadValues) {
  EXPECT_EQ(cli({"frobnicate"}).code, 1);
  EXPECT_EQ(cli({"generate", "--count", "zero"}).code, 1);
  // An unreadable file is an I/O failure; a file that is not a checkpoint is invalid input.
  EXPECT_EQ(cli({"eval", "--checkpoint", "/nonexistent/x.cfm", "--tasks", "/nonexistent"}).code, 2);
  const auto junk = fs::temp_directory_path() / "cfm_cli_junk.cfm";
  std::ofstream(junk) << "junk";
  EXPECT_EQ(cli({"eval", "--checkpoint", junk.string(), "--tasks", "/nonexistent"}).code, 1);
}

TEST(Cli, GitBlobHash) {
  // Matches `printf 'hello\n' | git hash-object --stdin`.
  EXPECT_EQ(git_blob_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
  EXPECT_EQ(git_blob_hash(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST_F(CliPipeline, GenerateWritesShard) {
  const auto m = read_json(root / "gen" / "manifest.json");
  ASSERT_EQ(m["tasks"].size(), 10u);
  for (const auto& name : m["tasks"]) EXPECT_TRUE(fs::is_directory(root / "gen" / name.get<std::string>()));
  const auto run = read_json(root / "gen" / "run_manifest.json");
  EXPECT_EQ(run["subcommand"], "generate");
  EXPECT_EQ(run["seed"], 3);
}

TEST_F(CliPipeline, GeneratedTasksRoundTrip) {
  const auto m = read_json(root / "gen" / "manifest.json");
  PriorConfig p = prior_config_from_json(m["prior_config"]);
  const auto first = load_task(root / "gen" / m["tasks"][0].get<std::string>());
  EXPECT_EQ(first.num_context(), 24);
  EXPECT_EQ(first.num_queries(), 12);
  const auto direct = generate_task(p, derive_seed(3, "generation"), 0);
  EXPECT_EQ(first.observational, direct.observational);
  EXPECT_EQ(first.interventional, direct.interventional);
  EXPECT_EQ(first.ancestors, direct.ancestors);
}

TEST_F(CliPipeline, GenerateIsDeterministic) {
  const auto other = root / "gen2";
  ASSERT_EQ(cli({"generate", "--seed", "3", "--deterministic", "--count", "10", "--nodes", "2,5", "--context", "24",
                 "--queries", "12", "--out", other.string()})
                .code,
            0);
  for (const auto& e : fs::recursive_directory_iterator(root / "gen")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root / "gen");
    EXPECT_EQ(slurp(e.path()), slurp(other / rel)) << rel;
  }
}

TEST_F(CliPipeline, TrainOverrideInManifestAndMetrics) {
  const auto run = read_json(root / "train" / "run_manifest.json");
  EXPECT_EQ(run["config"]["steps"], 20);
  EXPECT_EQ(run["config_hash"].get<std::string>().size(), 40u);
  std::ifstream in(root / "train" / "metrics.csv");
  std::string line;
  int eval_rows = 0, train_rows = 0;
  while (std::getline(in, line)) {
    eval_rows += line.find(",eval,") != std::string::npos;
    train_rows += line.find(",train,") != std::string::npos;
  }
  EXPECT_EQ(train_rows, 20);
  EXPECT_EQ(eval_rows, 20 / 10);
  const auto ck = load_checkpoint(checkpoint());
  EXPECT_EQ(ck.provenance["steps"], 20);
}

TEST_F(CliPipeline, TrainResumeContinues) {
  const auto dir = root / "train_resume";
  ASSERT_EQ(cli({"train", "--seed", "3", "--deterministic", "--config", (root / "train.json").string(), "--steps",
                 "20", "--stop-after", "8", "--out", dir.string()})
                .code,
            0);
  EXPECT_EQ(load_checkpoint(dir / "checkpoint.cfm").provenance["steps"], 8);
  ASSERT_EQ(cli({"train", "--seed", "3", "--deterministic", "--config", (root / "train.json").string(), "--steps",
                 "20", "--resume", (dir / "state.cfmstate").string(), "--out", dir.string()})
                .code,
            0);
  EXPECT_EQ(slurp(dir / "checkpoint.cfm"), slurp(checkpoint()));
}

TEST_F(CliPipeline, EvalThreeStrataAndReproducible) {
  for (const char* side : {"e1", "e2"}) {
    const auto r = cli({"eval", "--seed", "3", "--deterministic", "--checkpoint", checkpoint().string(), "--tasks",
                        (root / "gen").string(), "--hide-fractions", "0,0.5,1", "--out", (root / side).string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  const auto j = read_json(root / "e1" / "report.json");
  ASSERT_EQ(j["strata"].size(), 3u);
  EXPECT_EQ(j["strata"][1]["hide_fraction"], 0.5);
  EXPECT_EQ(slurp(root / "e1" / "report.json"), slurp(root / "e2" / "report.json"));
  EXPECT_EQ(slurp(root / "e1" / "report.csv"), slurp(root / "e2" / "report.csv"));
}

TEST_F(CliPipeline, EvalSemiSynthetic) {
  const auto r = cli({"eval", "--seed", "3", "--checkpoint", checkpoint().string(), "--semisynthetic",
                      (fs::path(CFM_TEST_DATA) / "semisynthetic_200.csv").string(), "--n-control", "50", "--out",
                      (root / "cate").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = read_json(root / "cate" / "report.json");
  EXPECT_EQ(j["rows"], 110 + 50);
  EXPECT_GE(j["pehe"].get<double>(), 0.0);
}

TEST_F(CliPipeline, DemoAndPlots) {
  const auto dir = root / "demo";
  const auto r = cli({"demo", "--seed", "3", "--checkpoint", checkpoint().string(), "--kind", "bivariate",
                      "--grid-points", "5", "--samples", "20", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* m : {"none", "correct", "wrong"}) EXPECT_TRUE(fs::exists(dir / (std::string("fan_") + m + ".svg")));
  const auto j = read_json(dir / "summary.json");
  ASSERT_EQ(j["modes"].size(), 3u);
  for (const auto& mode : j["modes"]) {
    ASSERT_EQ(mode["points"].size(), 5u);
    for (const auto& p : mode["points"]) EXPECT_GT(p["std"].get<double>(), 0.0);
    if (mode["mode"] == "wrong") {
      EXPECT_EQ(mode["asserted_direction"], "Y->T");
    }
  }

  const auto mis = cli({"demo", "--seed", "3", "--checkpoint", checkpoint().string(), "--kind", "misspecification",
                        "--grid-points", "5", "--samples", "10", "--out", (root / "mis").string()});
  ASSERT_EQ(mis.code, 0) << mis.err;

  const auto plots = root / "plots";
  EXPECT_EQ(cli({"plot", "--summary", (dir / "summary.json").string(), "--out", plots.string()}).code, 0);
  EXPECT_TRUE(fs::exists(plots / "fan_correct.svg"));
}

TEST_F(CliPipeline, PlotDeltaBars) {
  for (const char* side : {"p1", "p2"})
    ASSERT_EQ(cli({"eval", "--seed", side[1] == '1' ? "3" : "4", "--checkpoint", checkpoint().string(), "--tasks",
                   (root / "gen").string(), "--out", (root / side).string()})
                  .code,
              0);
  const auto dir = root / "delta";
  ASSERT_EQ(cli({"plot", "--candidate", (root / "p1" / "report.csv").string(), "--baseline",
                 (root / "p2" / "report.csv").string(), "--out", dir.string()})
                .code,
            0);
  EXPECT_TRUE(fs::exists(dir / "nll_delta.svg"));
  const auto j = read_json(dir / "nll_delta.json");
  EXPECT_FALSE(j.empty());
}
