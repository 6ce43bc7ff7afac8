#include "dtn/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "dtn/error.hpp"

namespace dtn {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void data_error(const std::string& what) { throw Error(ErrorKind::data, what); }

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string num(double v) { return std::isnan(v) ? "nan" : fmt("%.17g", v); }

std::string short_num(double v) { return fmt("%g", v); }

}  // namespace

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
  task_options(task);
  if (ancillas.empty()) config_error("ancillas list is empty");
  if (p_grid.empty()) config_error("p grid is empty");
  for (double p : p_grid) check_rate(p);
  for (int k : ancillas)
    if (k < 0) config_error("ancilla count must be >= 0");
  if (runs < 1) config_error("runs must be >= 1");
  if (epochs < 0) config_error("epochs must be >= 0");
  if (batch_size < 1) config_error("batch size must be >= 1");
  if (threads < 1 || workers < 1) config_error("threads and workers must be >= 1");
  if (learning_rate && !(*learning_rate >= 0)) config_error("learning rate must be >= 0");
  if (init_std && !(*init_std >= 0)) config_error("init std must be >= 0");
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["task"] = task;
  if (train_size) j["train_size"] = *train_size;
  if (validation_size) j["validation_size"] = *validation_size;
  if (test_size) j["test_size"] = *test_size;
  j["subsample"] = subsample;
  j["split_seed"] = split_seed;
  j["model"] = to_string(model);
  j["scheme"] = to_string(scheme);
  j["ancillas"] = ancillas;
  j["p_grid"] = p_grid;
  j["dephase_data_layer"] = dephase_data_layer;
  j["runs"] = runs;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["seed"] = seed;
  if (learning_rate) j["learning_rate"] = *learning_rate;
  if (init_std) j["init_std"] = *init_std;
  j["threads"] = threads;
  j["workers"] = workers;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) config_error("config must be a JSON object");
  static const std::set<std::string> known = {
      "task",  "train_size", "validation_size", "test_size", "subsample",     "split_seed", "model",
      "scheme", "ancillas",  "p_grid",          "dephase_data_layer", "runs", "epochs",     "batch_size",
      "seed",  "learning_rate", "init_std",     "threads",   "workers"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) config_error("unknown config key '" + it.key() + "'");

  ExperimentConfig c;
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    auto get_opt = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<typename std::remove_reference_t<decltype(field)>::value_type>();
    };
    get("task", c.task);
    get_opt("train_size", c.train_size);
    get_opt("validation_size", c.validation_size);
    get_opt("test_size", c.test_size);
    get("subsample", c.subsample);
    get("split_seed", c.split_seed);
    if (j.contains("model")) c.model = parse_model_kind(j.at("model").get<std::string>());
    if (j.contains("scheme")) c.scheme = parse_scheme(j.at("scheme").get<std::string>());
    get("ancillas", c.ancillas);
    get("p_grid", c.p_grid);
    get("dephase_data_layer", c.dephase_data_layer);
    get("runs", c.runs);
    get("epochs", c.epochs);
    get("batch_size", c.batch_size);
    get("seed", c.seed);
    get_opt("learning_rate", c.learning_rate);
    get_opt("init_std", c.init_std);
    get("threads", c.threads);
    get("workers", c.workers);
  } catch (const nlohmann::json::exception& e) {
    config_error(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    config_error("config " + path.string() + ": " + e.what());
  }
  return ExperimentConfig::from_json(j);
}

PrepareOptions prepare_options(const ExperimentConfig& cfg) {
  PrepareOptions o = task_options(cfg.task);
  if (cfg.train_size) o.train_size = *cfg.train_size;
  if (cfg.validation_size) o.validation_size = *cfg.validation_size;
  if (cfg.test_size) o.test_size = *cfg.test_size;
  o.seed = cfg.split_seed;
  return o;
}

// ---------------------------------------------------------------------------
// Caches

fs::path cache_path(const fs::path& dir, const std::string& task, const std::string& split) {
  return dir / (task + "." + split + ".cache");
}

void write_split_caches(const fs::path& dir, const std::string& task, const DatasetSplits& splits) {
  fs::create_directories(dir);
  write_cache(cache_path(dir, task, "train"), splits.train);
  write_cache(cache_path(dir, task, "validation"), splits.validation);
  write_cache(cache_path(dir, task, "test"), splits.test);
}

DatasetSplits load_splits(const ExperimentConfig& cfg, const fs::path& data_dir, const std::optional<fs::path>& cache_dir) {
  DatasetSplits s;
  bool cached = false;
  if (cache_dir) {
    cached = true;
    for (const char* split : {"train", "validation", "test"}) cached = cached && fs::exists(cache_path(*cache_dir, cfg.task, split));
  }
  if (cached) {
    s.train = read_cache(cache_path(*cache_dir, cfg.task, "train"));
    s.validation = read_cache(cache_path(*cache_dir, cfg.task, "validation"));
    s.test = read_cache(cache_path(*cache_dir, cfg.task, "test"));
    // size overrides take the leading samples of a larger cache
    auto shrink = [](EncodedDataset& d, const std::optional<std::size_t>& n, const char* split) {
      if (!n || *n == static_cast<std::size_t>(d.size())) return;
      if (*n > static_cast<std::size_t>(d.size()))
        config_error(std::string("cached ") + split + " split has " + std::to_string(d.size()) + " samples, " +
                     std::to_string(*n) + " requested");
      d = d.subset(*n);
    };
    shrink(s.train, cfg.train_size, "train");
    shrink(s.validation, cfg.validation_size, "validation");
    shrink(s.test, cfg.test_size, "test");
  } else {
    if (data_dir.empty()) config_error("no data directory: pass --data-dir or set DTNML_DATA_DIR");
    s = prepare_splits(data_dir, prepare_options(cfg));
  }
  if (cfg.subsample > 0 && cfg.subsample < static_cast<std::size_t>(s.train.size())) s.train = s.train.subset(cfg.subsample);
  return s;
}

// ---------------------------------------------------------------------------
// Runs

std::uint64_t cell_seed(std::uint64_t base, double p, int k, int run) {
  const auto p_milli = static_cast<std::uint64_t>(std::llround(p * 1000.0));
  return base + 1000003ULL * static_cast<std::uint64_t>(run) + 1009ULL * static_cast<std::uint64_t>(k) + p_milli;
}

RunResult run_single(const ExperimentConfig& cfg, const DatasetSplits& splits, double p, int k, int run,
                     std::uint64_t seed, Network* net_out, TrainReport* report_out) {
  const PrepareOptions opts = task_options(cfg.task);
  Network net(build_network(cfg.model, splits.train.feature_count(), k, cfg.scheme));

  const Hyperparams hp = default_hyperparams(opts.dataset, cfg.model, cfg.scheme, k, p, cfg.dephase_data_layer);
  TrainConfig tc;
  tc.learning_rate = cfg.learning_rate.value_or(hp.learning_rate);
  tc.init_std = cfg.init_std.value_or(hp.init_std);
  tc.batch_size = cfg.batch_size;
  tc.epochs = cfg.epochs;
  tc.seed = seed;
  tc.p = p;
  tc.dephase_data_layer = cfg.dephase_data_layer;
  tc.threads = cfg.threads;

  const TrainReport report = train(net, splits, tc);

  RunResult r;
  r.model = to_string(cfg.model);
  r.dataset = opts.dataset;
  r.grouping = opts.grouping;
  r.scheme = to_string(cfg.scheme);
  r.p = p;
  r.k = k;
  r.run = run;
  r.seed = seed;
  r.status = report.status;
  r.test_accuracy = report.diverged ? std::nan("") : report.test_accuracy;
  r.val_accuracy = report.diverged ? std::nan("") : report.best_val_accuracy;
  r.epochs = static_cast<int>(report.epochs.size());
  r.wall_seconds = report.wall_seconds;
  if (net_out) *net_out = std::move(net);
  if (report_out) *report_out = report;
  return r;
}

std::vector<RunResult> run_sweep(const ExperimentConfig& cfg, const DatasetSplits& splits) {
  cfg.validate();
  struct Cell {
    double p;
    int k, run;
  };
  std::vector<Cell> cells;
  for (int k : cfg.ancillas)
    for (double p : cfg.p_grid)
      for (int run = 0; run < cfg.runs; ++run) cells.push_back({p, k, run});

  std::vector<RunResult> out(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) {
      const Cell& c = cells[i];
      try {
        out[i] = run_single(cfg, splits, c.p, c.k, c.run, cell_seed(cfg.seed, c.p, c.k, c.run));
      } catch (...) {
        std::lock_guard lock(log_mutex);
        if (!failure) failure = std::current_exception();
        next = cells.size();
        return;
      }
      std::lock_guard lock(log_mutex);
      std::cerr << "[sweep] k=" << c.k << " p=" << short_num(c.p) << " run=" << c.run << " test=" << num(out[i].test_accuracy)
                << " (" << short_num(out[i].wall_seconds) << " s, " << out[i].status << ")\n";
    }
  };
  {
    std::vector<std::jthread> pool;
    const int workers = std::min<int>(cfg.workers, static_cast<int>(cells.size()));
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

// ---------------------------------------------------------------------------
// CSV

std::string csv_row(const RunResult& r) {
  std::ostringstream s;
  s << r.model << ',' << r.dataset << ',' << r.grouping << ',' << short_num(r.p) << ',' << r.k << ',' << r.scheme << ','
    << r.run << ',' << r.seed << ',' << num(r.test_accuracy) << ',' << num(r.val_accuracy) << ',' << r.epochs << ','
    << fmt("%.3f", r.wall_seconds);
  return s.str();
}

void write_results_csv(const fs::path& path, const std::vector<RunResult>& rows) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) config_error("cannot write " + path.string());
  out << kCsvHeader << '\n';
  for (const auto& r : rows) out << csv_row(r) << '\n';
}

std::vector<RunResult> read_results_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) data_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) data_error(path.string() + ": unexpected CSV header");
  std::vector<RunResult> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 12) data_error(path.string() + ": malformed row '" + line + "'");
    try {
      RunResult r;
      r.model = f[0];
      r.dataset = f[1];
      r.grouping = f[2];
      r.p = std::stod(f[3]);
      r.k = std::stoi(f[4]);
      r.scheme = f[5];
      r.run = std::stoi(f[6]);
      r.seed = std::stoull(f[7]);
      r.test_accuracy = std::stod(f[8]);
      r.val_accuracy = std::stod(f[9]);
      r.epochs = std::stoi(f[10]);
      r.wall_seconds = std::stod(f[11]);
      r.status = std::isnan(r.test_accuracy) ? "diverged" : "ok";
      rows.push_back(r);
    } catch (const std::exception&) {
      data_error(path.string() + ": malformed row '" + line + "'");
    }
  }
  return rows;
}

std::vector<CellAggregate> aggregate(const std::vector<RunResult>& rows) {
  std::map<std::pair<int, double>, std::vector<double>> groups;
  for (const auto& r : rows)
    if (r.status == "ok" && std::isfinite(r.test_accuracy)) groups[{r.k, r.p}].push_back(r.test_accuracy);
  std::vector<CellAggregate> out;
  for (const auto& [key, acc] : groups) {
    CellAggregate c;
    c.k = key.first;
    c.p = key.second;
    c.n = static_cast<int>(acc.size());
    double sum = 0;
    for (double a : acc) sum += a;
    c.mean = sum / c.n;
    if (c.n > 1) {
      double ss = 0;
      for (double a : acc) ss += (a - c.mean) * (a - c.mean);
      c.stderr_ = std::sqrt(ss / (c.n - 1)) / std::sqrt(static_cast<double>(c.n));
    }
    out.push_back(c);
  }
  return out;
}

void write_aggregate_csv(const fs::path& path, const std::vector<CellAggregate>& cells) {
  std::ofstream out(path, std::ios::binary);
  if (!out) config_error("cannot write " + path.string());
  out << "k,p,n,mean,stderr\n";
  for (const auto& c : cells) out << c.k << ',' << short_num(c.p) << ',' << c.n << ',' << num(c.mean) << ',' << num(c.stderr_) << '\n';
}

// ---------------------------------------------------------------------------
// SVG

std::string svg_plot(const std::vector<CellAggregate>& cells, const std::string& title) {
  constexpr double W = 640, H = 420, L = 70, R = 120, T = 40, B = 50;
  double lo = 1, hi = 0;
  for (const auto& c : cells) {
    lo = std::min(lo, c.mean - c.stderr_);
    hi = std::max(hi, c.mean + c.stderr_);
  }
  if (cells.empty()) lo = 0, hi = 1;
  lo = std::max(0.0, std::floor((lo - 0.01) * 50) / 50);
  hi = std::min(1.0, std::ceil((hi + 0.01) * 50) / 50);
  if (hi <= lo) hi = lo + 0.02;
  const auto X = [&](double p) { return L + p * (W - L - R); };
  const auto Y = [&](double a) { return H - B - (a - lo) / (hi - lo) * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double p = i / 5.0;
    s << "<text x=\"" << X(p) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << short_num(p) << "</text>\n";
    const double a = lo + (hi - lo) * i / 5.0;
    s << "<text x=\"" << L - 6 << "\" y=\"" << Y(a) + 4 << "\" text-anchor=\"end\">" << fmt("%.3f", a) << "</text>\n";
  }
  s << "<text x=\"" << X(0.5) << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">dephasing probability p</text>\n";
  s << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << (T + H - B) / 2
    << ")\">test accuracy</text>\n";

  for (const auto& c : cells)
    if (c.k == 0 && c.p == 0.0)
      s << "<line x1=\"" << L << "\" y1=\"" << Y(c.mean) << "\" x2=\"" << W - R << "\" y2=\"" << Y(c.mean)
        << "\" stroke=\"gray\" stroke-dasharray=\"2,3\"/>\n";

  std::map<int, std::vector<CellAggregate>> curves;
  for (const auto& c : cells) curves[c.k].push_back(c);
  int idx = 0;
  for (auto& [k, pts] : curves) {
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.p < b.p; });
    const char* col = colors[idx % 6];
    s << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& c : pts) s << X(c.p) << ',' << Y(c.mean) << ' ';
    s << "\"/>\n";
    for (const auto& c : pts) {
      s << "<circle cx=\"" << X(c.p) << "\" cy=\"" << Y(c.mean) << "\" r=\"3\" fill=\"" << col << "\"/>\n";
      if (c.stderr_ > 0)
        s << "<line x1=\"" << X(c.p) << "\" y1=\"" << Y(c.mean - c.stderr_) << "\" x2=\"" << X(c.p) << "\" y2=\""
          << Y(c.mean + c.stderr_) << "\" stroke=\"" << col << "\"/>\n";
    }
    const double ly = T + 16 + 18 * idx;
    s << "<line x1=\"" << W - R + 12 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 32 << "\" y2=\"" << ly << "\" stroke=\"" << col
      << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << W - R + 38 << "\" y=\"" << ly + 4 << "\">" << k << (k == 1 ? " ancilla" : " ancillas") << "</text>\n";
    ++idx;
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace dtn
