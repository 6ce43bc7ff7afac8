#pragma once

// Experiment plumbing shared by the dtnml tool and the acceptance tests:
// JSON experiment configs, cached splits, single runs, p / k sweeps with
// CSV + SVG output.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtn/dataset.hpp"
#include "dtn/network.hpp"
#include "dtn/training.hpp"

namespace dtn {

/// Everything needed to reproduce a run or a sweep. JSON keys equal the field
/// names; unknown keys are rejected.
struct ExperimentConfig {
  std::string task = "mnist-3v5";  // see task_options()
  std::optional<std::size_t> train_size, validation_size, test_size;
  std::size_t subsample = 0;  // keep only the first n training samples (0 = all)
  std::uint64_t split_seed = 1234;

  ModelKind model = ModelKind::ttn;
  AncillaScheme scheme = AncillaScheme::per_qubit;
  std::vector<int> ancillas = {0};
  std::vector<double> p_grid = {0.0, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0};
  bool dephase_data_layer = true;

  int runs = 5;
  int epochs = 30;
  int batch_size = 250;
  std::uint64_t seed = 1;
  std::optional<double> learning_rate, init_std;  // override the embedded tables
  int threads = 1;  // per run
  int workers = 1;  // concurrent runs in a sweep

  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
};

ExperimentConfig load_config(const std::filesystem::path& path);

/// Split options for the config's task with size overrides applied.
PrepareOptions prepare_options(const ExperimentConfig& cfg);

/// Cache file names: <dir>/<task>.<split>.cache.
std::filesystem::path cache_path(const std::filesystem::path& dir, const std::string& task, const std::string& split);
void write_split_caches(const std::filesystem::path& dir, const std::string& task, const DatasetSplits& splits);
/// Reads the three caches when all exist in `cache_dir`, otherwise prepares from `data_dir`.
DatasetSplits load_splits(const ExperimentConfig& cfg, const std::filesystem::path& data_dir,
                          const std::optional<std::filesystem::path>& cache_dir);

/// Seed of one sweep cell; recorded in the CSV so `train --seed` reproduces it.
std::uint64_t cell_seed(std::uint64_t base, double p, int k, int run);

struct RunResult {
  std::string model, dataset, grouping, scheme;
  double p = 0;
  int k = 0;
  int run = 0;
  std::uint64_t seed = 0;
  double test_accuracy = 0;
  double val_accuracy = 0;
  int epochs = 0;
  double wall_seconds = 0;
  std::string status = "ok";
};

/// Trains one network for (p, k, seed); `net_out` receives the best parameters.
RunResult run_single(const ExperimentConfig& cfg, const DatasetSplits& splits, double p, int k, int run,
                     std::uint64_t seed, Network* net_out = nullptr, TrainReport* report_out = nullptr);

/// Every (p, k, run) cell, `workers` at a time. Rows come back in (k, p, run) order.
std::vector<RunResult> run_sweep(const ExperimentConfig& cfg, const DatasetSplits& splits);

inline constexpr const char* kCsvHeader =
    "model,dataset,grouping,p,k,scheme,run,seed,test_accuracy,val_accuracy,epochs,wall_seconds";

std::string csv_row(const RunResult& r);
void write_results_csv(const std::filesystem::path& path, const std::vector<RunResult>& rows);
std::vector<RunResult> read_results_csv(const std::filesystem::path& path);

struct CellAggregate {
  int k = 0;
  double p = 0;
  int n = 0;  // completed runs
  double mean = 0;
  double stderr_ = 0;  // sample std / sqrt(n); 0 for n < 2
};

/// Per (k, p) over rows with status ok.
std::vector<CellAggregate> aggregate(const std::vector<RunResult>& rows);
void write_aggregate_csv(const std::filesystem::path& path, const std::vector<CellAggregate>& cells);

/// Accuracy vs p, one polyline with error bars per k, dotted line at the (p=0, k=0) mean.
std::string svg_plot(const std::vector<CellAggregate>& cells, const std::string& title);

}  // namespace dtn
