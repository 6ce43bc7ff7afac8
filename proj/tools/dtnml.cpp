// dtnml: prepare data, train, sweep and inspect dephased tensor-network classifiers.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "dtn/analysis.hpp"
#include "dtn/dephased.hpp"
#include "dtn/error.hpp"
#include "dtn/experiment.hpp"

namespace fs = std::filesystem;
using namespace dtn;

namespace {

/// Flags shared by the subcommands. Values set on the command line override the
/// JSON config; everything else keeps the config (or built-in) value.
struct Common {
  std::string config;
  std::string data_dir;
  std::string cache_dir;
  std::string out;
  std::string task;
  std::uint64_t seed = 0;
  int threads = 1;
  int workers = 1;
  std::vector<double> p;
  std::vector<int> ancillas;
  std::string scheme, model;
  bool no_dephase_data = false;
  int epochs = 0, runs = 0, batch_size = 0;
  std::size_t subsample = 0;
  double lr = 0, init_std = 0;

  CLI::App* active = nullptr;  // the parsed subcommand

  bool given(const std::string& name) const {
    const CLI::Option* opt = active ? active->get_option_no_throw("--" + name) : nullptr;
    return opt != nullptr && opt->count() > 0;
  }
};

void add_data_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON experiment config (flags override it)");
  cmd->add_option("--data-dir", c.data_dir, "directory with IDX files")->envname("DTNML_DATA_DIR");
  cmd->add_option("--cache-dir", c.cache_dir, "directory with prepared split caches");
  cmd->add_option("--task", c.task, "mnist | kmnist | fashion | mnist-3v5 | mnist-pca");
  cmd->add_option("--threads", c.threads, "threads per run")->check(CLI::PositiveNumber);
}

void add_model_flags(CLI::App* cmd, Common& c, bool lists) {
  cmd->add_option("--seed", c.seed, lists ? "base seed of the sweep" : "run seed");
  if (lists) {
    cmd->add_option("--p", c.p, "p grid")->delimiter(',');
    cmd->add_option("--ancillas", c.ancillas, "ancilla counts")->delimiter(',');
  } else {
    cmd->add_option("--p", c.p, "dephasing probability")->expected(1);
    cmd->add_option("--ancillas", c.ancillas, "ancillas per data qubit (per node with --scheme per-node)")->expected(1);
  }
  cmd->add_option("--scheme", c.scheme, "ancilla scheme")->check(CLI::IsMember({"per-qubit", "per-node"}));
  cmd->add_option("--model", c.model, "network kind")->check(CLI::IsMember({"ttn", "mera"}));
  cmd->add_flag("--no-dephase-data", c.no_dephase_data, "keep the data layer coherent");
  cmd->add_option("--epochs", c.epochs)->check(CLI::NonNegativeNumber);
  cmd->add_option("--batch-size", c.batch_size)->check(CLI::PositiveNumber);
  cmd->add_option("--subsample", c.subsample, "keep the first n training samples");
  cmd->add_option("--lr", c.lr, "learning rate (default: embedded tables)");
  cmd->add_option("--std", c.init_std, "initialization std (default: embedded tables)");
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
  if (c.given("task")) cfg.task = c.task;
  if (c.given("seed")) cfg.seed = c.seed;
  if (c.given("threads")) cfg.threads = c.threads;
  if (c.given("workers")) cfg.workers = c.workers;
  if (c.given("p")) cfg.p_grid = c.p;
  if (c.given("ancillas")) cfg.ancillas = c.ancillas;
  if (c.given("scheme")) cfg.scheme = parse_scheme(c.scheme);
  if (c.given("model")) cfg.model = parse_model_kind(c.model);
  if (c.given("no-dephase-data")) cfg.dephase_data_layer = false;
  if (c.given("epochs")) cfg.epochs = c.epochs;
  if (c.given("runs")) cfg.runs = c.runs;
  if (c.given("batch-size")) cfg.batch_size = c.batch_size;
  if (c.given("subsample")) cfg.subsample = c.subsample;
  if (c.given("lr")) cfg.learning_rate = c.lr;
  if (c.given("std")) cfg.init_std = c.init_std;
  cfg.validate();
  return cfg;
}

std::optional<fs::path> cache_dir(const Common& c) {
  if (c.cache_dir.empty()) return std::nullopt;
  return fs::path(c.cache_dir);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) config_error("cannot write " + path.string());
  out << text;
}

int cmd_prepare(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  if (c.data_dir.empty()) config_error("no data directory: pass --data-dir or set DTNML_DATA_DIR");
  const DatasetSplits s = prepare_splits(c.data_dir, prepare_options(cfg));
  const fs::path out = c.out.empty() ? fs::path("cache") : fs::path(c.out);
  write_split_caches(out, cfg.task, s);
  std::cout << "task " << cfg.task << ": train " << s.train.size() << ", validation " << s.validation.size() << ", test "
            << s.test.size() << " (features " << s.train.feature_count() << ") -> " << out.string() << "\n";
  return 0;
}

int cmd_train(const Common& c) {
  ExperimentConfig cfg = resolve(c);
  if (cfg.p_grid.size() != 1 || cfg.ancillas.size() != 1) config_error("train needs a single --p and --ancillas value");
  const DatasetSplits splits = load_splits(cfg, c.data_dir, cache_dir(c));
  Network net;
  TrainReport report;
  const RunResult r = run_single(cfg, splits, cfg.p_grid[0], cfg.ancillas[0], 0, cfg.seed, &net, &report);
  const fs::path out = c.out.empty() ? fs::path("run") : fs::path(c.out);
  fs::create_directories(out);
  write_checkpoint(out / "checkpoint.bin", net);
  nlohmann::json j = report.to_json();
  j["config"] = cfg.to_json();
  write_text(out / "report.json", j.dump(2) + "\n");
  write_results_csv(out / "results.csv", {r});
  std::cout << kCsvHeader << "\n" << csv_row(r) << "\n";
  if (report.diverged) numerical_error("training diverged (non-finite loss)");
  return 0;
}

int cmd_sweep(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  const DatasetSplits splits = load_splits(cfg, c.data_dir, cache_dir(c));
  const fs::path out = c.out.empty() ? fs::path("sweep") : fs::path(c.out);
  fs::create_directories(out);
  write_text(out / "config.json", cfg.to_json().dump(2) + "\n");
  const auto rows = run_sweep(cfg, splits);
  write_results_csv(out / "results.csv", rows);
  const auto cells = aggregate(rows);
  write_aggregate_csv(out / "aggregate.csv", cells);
  const PrepareOptions opts = task_options(cfg.task);
  write_text(out / "accuracy_vs_p.svg",
             svg_plot(cells, to_string(cfg.model) + " " + opts.dataset + " (" + opts.grouping + "), " + to_string(cfg.scheme)));
  int diverged = 0;
  for (const auto& r : rows) diverged += r.status != "ok";
  std::cout << "k,p,n,mean,stderr\n";
  for (const auto& a : cells) std::cout << a.k << ',' << a.p << ',' << a.n << ',' << a.mean << ',' << a.stderr_ << "\n";
  if (diverged > 0) std::cerr << diverged << " run(s) diverged and were excluded from the aggregates\n";
  return 0;
}

struct CheckpointArgs {
  std::string checkpoint;
};

int cmd_eval(const Common& c, const CheckpointArgs& a, bool bayes) {
  const Network net = read_checkpoint(a.checkpoint);
  const ExperimentConfig cfg = resolve(c);
  const DatasetSplits splits = load_splits(cfg, c.data_dir, cache_dir(c));
  if (splits.test.feature_count() != net.topology().m) config_error("checkpoint width does not match the task features");
  Index correct = 0;
  if (bayes) {
    for (Index i = 0; i < splits.test.size(); ++i)
      correct += bayes_forward(net, splits.test.features.row(i).transpose()).predicted_class == splits.test.labels[static_cast<std::size_t>(i)];
  } else {
    const DensityModel model(net);
    for (Index i = 0; i < splits.test.size(); ++i)
      correct += model.predict(splits.test.features.row(i).transpose()).predicted_class == splits.test.labels[static_cast<std::size_t>(i)];
  }
  const double acc = splits.test.size() ? static_cast<double>(correct) / static_cast<double>(splits.test.size()) : 0.0;
  nlohmann::json j{{"engine", bayes ? "bayes" : "density"},
                   {"p", net.p()},
                   {"dephase_data_layer", net.topology().dephase_data_layer},
                   {"samples", splits.test.size()},
                   {"correct", correct},
                   {"test_accuracy", acc}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_analyze(const Common& c, const CheckpointArgs& a, int node, std::optional<double> p, bool json) {
  const Network net = read_checkpoint(a.checkpoint);
  if (node < 0) node = net.node_count() - 1;
  if (node >= net.node_count()) config_error("node index out of range");
  const double rate = p.value_or(net.p());
  const CMatrix& u = net.unitary(node);
  const RegressorReport report = regressor_coefficients(UnitaryMatrix(u, 1e-8), rate);
  const auto fits = exponent_table(u);

  nlohmann::json j;
  j["node"] = node;
  j["regressors"] = report.to_json();
  auto& arr = j["exponents"] = nlohmann::json::array();
  for (const auto& f : fits) arr.push_back(f.to_json());
  if (!c.out.empty()) write_text(c.out, j.dump(2) + "\n");
  if (json) {
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  std::cout << "node " << node << " (" << report.qubits << " qubits)\n" << report.table(1e-15) << "\nexponents of (1-p):\n";
  for (const auto& f : fits) {
    std::cout << "  (" << f.j << "," << f.k << ") hamming " << f.expected;
    if (f.defined) std::cout << ", fitted " << f.exponent << " (residual " << f.residual << ")";
    std::cout << "  " << f.status << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dephased tensor-network classifiers"};
  app.require_subcommand(1);
  Common c;
  CheckpointArgs ck;
  int node = -1;
  double analyze_p = 0;
  bool json = false;

  auto* prepare = app.add_subcommand("prepare", "encode and cache a task's splits");
  add_data_flags(prepare, c);
  prepare->add_option("--seed", c.seed);
  prepare->add_option("--out", c.out, "cache directory");

  auto* train = app.add_subcommand("train", "train one network");
  add_data_flags(train, c);
  add_model_flags(train, c, false);
  train->add_option("--out", c.out, "output directory");

  auto* sweep = app.add_subcommand("sweep", "train every (p, k, run) cell");
  add_data_flags(sweep, c);
  add_model_flags(sweep, c, true);
  sweep->add_option("--runs", c.runs)->check(CLI::PositiveNumber);
  sweep->add_option("--workers", c.workers, "concurrent runs")->check(CLI::PositiveNumber);
  sweep->add_option("--out", c.out, "output directory");

  auto* eval = app.add_subcommand("eval", "test accuracy of a checkpoint (density-matrix engine)");
  auto* bayes = app.add_subcommand("bayes", "test accuracy of a checkpoint (probability-vector engine)");
  for (auto* cmd : {eval, bayes}) {
    add_data_flags(cmd, c);
    cmd->add_option("--checkpoint", ck.checkpoint)->required();
  }

  auto* analyze = app.add_subcommand("analyze", "regression coefficients and (1-p) exponents of a node");
  analyze->add_option("--checkpoint", ck.checkpoint)->required();
  analyze->add_option("--node", node, "node index (default: root)");
  auto* p_opt = analyze->add_option("--p", analyze_p, "dephasing probability (default: checkpoint's)");
  analyze->add_option("--out", c.out, "write the JSON report here");
  analyze->add_flag("--json", json, "print JSON instead of tables");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    c.active = app.get_subcommands().front();
    if (*prepare) return cmd_prepare(c);
    if (*train) return cmd_train(c);
    if (*sweep) return cmd_sweep(c);
    if (*eval) return cmd_eval(c, ck, false);
    if (*bayes) return cmd_eval(c, ck, true);
    if (*analyze) return cmd_analyze(c, ck, node, p_opt->count() ? std::optional<double>(analyze_p) : std::nullopt, json);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(ErrorKind::data);
  }
  return 1;
}
