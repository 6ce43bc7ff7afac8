#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <set>

#include "dtn/error.hpp"
#include "dtn/experiment.hpp"

using namespace dtn;
namespace fs = std::filesystem;

namespace {

EncodedDataset toy(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  EncodedDataset d;
  d.features.resize(n, 4);
  for (Index i = 0; i < n; ++i) {
    for (int j = 0; j < 4; ++j) d.features(i, j) = u(rng);
    d.labels.push_back(d.features(i, 0) > 0.5 ? 1 : 0);
  }
  return d;
}

DatasetSplits toy_splits() { return {toy(64, 1), toy(32, 2), toy(32, 3)}; }

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.task = "mnist-3v5";
  c.ancillas = {0};
  c.p_grid = {0.0, 1.0};
  c.runs = 1;
  c.epochs = 2;
  c.batch_size = 16;
  c.seed = 5;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("dtn_exp_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("config JSON round trip and validation") {
  ExperimentConfig c = small_config();
  c.learning_rate = 0.01;
  c.scheme = AncillaScheme::per_node;
  const ExperimentConfig back = ExperimentConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.learning_rate.value() == 0.01);
  CHECK_FALSE(back.init_std.has_value());

  CHECK_THROWS_AS(ExperimentConfig::from_json({{"tsak", "mnist"}}), Error);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"p_grid", {0.0, 1.5}}}), Error);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"runs", 0}}), Error);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"runs", "five"}}), Error);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"model", "peps"}}), Error);

  const fs::path dir = scratch("cfg");
  std::ofstream(dir / "c.json") << R"({"task": "mnist", "ancillas": [0, 2], "runs": 3})";
  const ExperimentConfig loaded = load_config(dir / "c.json");
  CHECK(loaded.task == "mnist");
  CHECK(loaded.ancillas == std::vector<int>{0, 2});
  CHECK(loaded.runs == 3);
  std::ofstream(dir / "bad.json") << "{";
  CHECK_THROWS_AS(load_config(dir / "bad.json"), Error);
}

TEST_CASE("cell seeds are distinct across the default grid") {
  std::set<std::uint64_t> seeds;
  for (int k = 0; k <= 3; ++k)
    for (double p : {0.0, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0})
      for (int run = 0; run < 5; ++run) seeds.insert(cell_seed(1, p, k, run));
  CHECK(seeds.size() == 4 * 7 * 5);
}

TEST_CASE("sweep rows, CSV round trip and seed reproduction") {
  const ExperimentConfig cfg = small_config();
  const DatasetSplits s = toy_splits();
  const auto rows = run_sweep(cfg, s);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].p == 0.0);
  CHECK(rows[1].p == 1.0);

  const fs::path dir = scratch("csv");
  write_results_csv(dir / "results.csv", rows);
  const std::string text = slurp(dir / "results.csv");
  CHECK(text.substr(0, text.find('\n')) == kCsvHeader);
  CHECK(text.find('\r') == std::string::npos);
  const auto back = read_results_csv(dir / "results.csv");
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].seed == rows[i].seed);
    CHECK(back[i].test_accuracy == rows[i].test_accuracy);  // %.17g round trips exactly
    CHECK(back[i].grouping == "3v5");
  }

  // Re-running a row from its seed reproduces it bit for bit.
  const RunResult again = run_single(cfg, s, back[1].p, back[1].k, back[1].run, back[1].seed);
  CHECK(again.test_accuracy == back[1].test_accuracy);
  CHECK(again.val_accuracy == back[1].val_accuracy);

  // workers do not change results
  ExperimentConfig par = cfg;
  par.workers = 2;
  const auto rows2 = run_sweep(par, s);
  for (std::size_t i = 0; i < 2; ++i) CHECK(rows2[i].test_accuracy == rows[i].test_accuracy);
}

TEST_CASE("cached splits honour size overrides") {
  const fs::path dir = scratch("cache_sizes");
  const DatasetSplits s = toy_splits();
  write_split_caches(dir, "mnist-3v5", s);
  ExperimentConfig cfg = small_config();
  cfg.validation_size = 10;
  cfg.test_size = 7;
  cfg.subsample = 20;
  const DatasetSplits got = load_splits(cfg, "", dir);
  CHECK(got.train.size() == 20);
  CHECK(got.validation.size() == 10);
  CHECK(got.test.size() == 7);
  CHECK(got.test.features == s.test.features.topRows(7));
  cfg.test_size = 100;
  CHECK_THROWS_AS(load_splits(cfg, "", dir), Error);
}

TEST_CASE("aggregates match an independent mean / standard error") {
  std::vector<RunResult> rows;
  const std::vector<double> acc = {0.91, 0.93, 0.96, 0.90, 0.95};
  for (int i = 0; i < 5; ++i) {
    RunResult r;
    r.k = 1;
    r.p = 0.4;
    r.run = i;
    r.test_accuracy = acc[static_cast<std::size_t>(i)];
    rows.push_back(r);
  }
  RunResult bad;
  bad.k = 1;
  bad.p = 0.4;
  bad.status = "diverged";
  bad.test_accuracy = std::nan("");
  rows.push_back(bad);

  const auto cells = aggregate(rows);
  REQUIRE(cells.size() == 1);
  CHECK(cells[0].n == 5);
  // spreadsheet: AVERAGE = 0.93, STDEV.S = sqrt(0.0026 / 4), stderr = STDEV.S / sqrt(5)
  CHECK(std::abs(cells[0].mean - 0.93) < 1e-12);
  CHECK(std::abs(cells[0].stderr_ - std::sqrt(0.0026 / 4) / std::sqrt(5.0)) < 1e-12);

  const fs::path dir = scratch("agg");
  write_results_csv(dir / "r.csv", rows);
  const auto back = read_results_csv(dir / "r.csv");
  CHECK(back.back().status == "diverged");
  CHECK(aggregate(back)[0].n == 5);
}

TEST_CASE("svg plot layout") {
  std::vector<CellAggregate> cells = {{0, 0.0, 5, 0.95, 0.004}, {0, 1.0, 5, 0.90, 0.006},
                                      {2, 0.0, 5, 0.96, 0.003}, {2, 1.0, 5, 0.95, 0.002}};
  const std::string svg = svg_plot(cells, "demo");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("stroke-dasharray") != std::string::npos);
  std::size_t polylines = 0;
  for (std::size_t pos = 0; (pos = svg.find("<polyline", pos)) != std::string::npos; ++pos) ++polylines;
  CHECK(polylines == 2);
  CHECK(svg.find("2 ancillas") != std::string::npos);
}

#ifdef DTNML_EXE
namespace {
int run_cli(const std::string& args) {
  const std::string cmd = std::string(DTNML_EXE) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}
}  // namespace

TEST_CASE("cli exit codes") {
  const fs::path dir = scratch("cli");
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("train --model peps") == 2);
  CHECK(run_cli("sweep --config " + (dir / "missing.json").string()) == 2);
  CHECK(run_cli("prepare --data-dir " + (dir / "nothing").string() + " --out " + (dir / "c").string()) == 3);
  CHECK(run_cli("eval --checkpoint " + (dir / "none.bin").string() + " --data-dir " + dir.string()) == 3);
}

TEST_CASE("cli train, eval, bayes and analyze on cached splits") {
  const fs::path dir = scratch("cli_run");
  const DatasetSplits s = toy_splits();
  write_split_caches(dir / "cache", "mnist-3v5", s);
  const std::string common = " --task mnist-3v5 --cache-dir " + (dir / "cache").string();
  REQUIRE(run_cli("train" + common + " --ancillas 1 --p 1 --epochs 2 --batch-size 16 --seed 3 --out " + (dir / "run").string()) == 0);
  CHECK(fs::exists(dir / "run" / "checkpoint.bin"));
  CHECK(fs::exists(dir / "run" / "report.json"));
  const auto rows = read_results_csv(dir / "run" / "results.csv");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].seed == 3);

  const std::string ck = " --checkpoint " + (dir / "run" / "checkpoint.bin").string();
  const std::string eval_cmd = std::string(DTNML_EXE) + " eval" + common + ck;
  const std::string bayes_cmd = std::string(DTNML_EXE) + " bayes" + common + ck;
  auto capture = [](const std::string& cmd) {
    std::string out;
    if (FILE* f = popen(cmd.c_str(), "r")) {
      char buf[256];
      while (fgets(buf, sizeof buf, f)) out += buf;
      pclose(f);
    }
    return nlohmann::json::parse(out);
  };
  const auto e1 = capture(eval_cmd), e2 = capture(eval_cmd), b = capture(bayes_cmd);
  CHECK(e1 == e2);
  CHECK(std::abs(e1["test_accuracy"].get<double>() - b["test_accuracy"].get<double>()) <= 1e-10);
  CHECK(e1["test_accuracy"].get<double>() == rows[0].test_accuracy);
  CHECK(run_cli("analyze" + ck + " --node 0 --out " + (dir / "a.json").string()) == 0);
  const auto a = nlohmann::json::parse(slurp(dir / "a.json"));
  CHECK(a["exponents"].size() == 16 * 16);
}
#endif
