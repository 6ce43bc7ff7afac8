#pragma once

// Loss, batch gradients, Adam, initialization and the train / validate / test loop.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtn/dataset.hpp"
#include "dtn/network.hpp"

namespace dtn {

/// -ln(max(probs[label], 1e-12)).
double cross_entropy(const Prediction& pred, int label);
double mean_cross_entropy(std::span<const Prediction> preds, std::span<const int> labels);

struct TrainConfig {
  double learning_rate = 0.005;
  double init_std = 0.05;
  int batch_size = 250;
  int epochs = 30;
  std::uint64_t seed = 0;
  double p = 0.0;
  bool dephase_data_layer = true;
  int threads = 1;
  bool self_test = true;  // finite-difference check on small networks before training

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double val_accuracy = 0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;  // 0 = initial parameters
  double best_val_accuracy = 0;
  double test_accuracy = 0;
  double wall_seconds = 0;
  std::uint64_t seed = 0;
  std::string engine;  // "density" or "bayes"
  bool diverged = false;
  std::string status = "ok";

  nlohmann::json to_json() const;
};

/// Evaluator used for training: the probability-vector engine when it is exact
/// (p = 1 with a dephased data layer), the density-matrix engine otherwise.
bool uses_bayes_engine(const Network& net);
std::unique_ptr<Model> make_model(const Network& net);

/// Deterministic parallel map-reduce over samples: fixed chunks of
/// kChunk samples summed in order, then a pairwise tree over chunks, so the
/// result does not depend on the thread count.
inline constexpr std::size_t kChunk = 16;

struct BatchGradient {
  double loss = 0;  // mean over the batch
  RVector grad;     // w.r.t. Network::flat()
};

BatchGradient gradients(const Network& net, const EncodedDataset& data, std::span<const Index> batch, int threads = 1);

std::vector<Prediction> predict_all(const Network& net, const EncodedDataset& data, int threads = 1);
double accuracy(const Network& net, const EncodedDataset& data, int threads = 1);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  RVector m, v;
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(RVector& params, const RVector& grad, AdamState& state, double lr);

/// Every packed real of every generator drawn from N(0, std^2).
void init_params(Network& net, double std, std::uint64_t seed);

/// Trains in place; on return `net` holds the best-validation parameters.
TrainReport train(Network& net, const DatasetSplits& data, const TrainConfig& cfg);

/// Largest per-parameter relative error |a - f| / max(|a|, |f|, floor) between
/// analytic and central-difference gradients of one sample's loss.
struct GradientCheck {
  double max_rel_error = 0;
  Index checked = 0;
};

GradientCheck gradient_check(Network& net, const RVector& features, int label, double step = 1e-5,
                             double floor = 1e-4, Index stride = 1);

/// Finite-difference check on TTN m=4 (k = 0, 1) and MERA m=8 (k = 0) at p in {0, 0.5, 1}.
/// Returns the worst relative error.
double gradient_self_test(std::uint64_t seed = 99);

// ---------------------------------------------------------------------------
// Embedded hyperparameter tables (init std, Adam learning rate).

struct Hyperparams {
  double init_std = 0.05;
  double learning_rate = 0.005;
};

/// Tables: "mnist", "kmnist", "fashion" (all wires dephased), "fashion-undephased-data"
/// (data layer kept coherent), "mera-pca". The nearest tabulated p is used and, for
/// the k = 3 row, the nearest tabulated column. nullopt for unknown table or k.
std::optional<Hyperparams> lookup_hyperparams(const std::string& table, int k, double p);

/// Table choice for a task: dataset / model / data-layer dephasing. Per-node
/// networks with a ancillas per node use the per-qubit row k = a / 2.
Hyperparams default_hyperparams(const std::string& dataset, ModelKind model, AncillaScheme scheme, int k, double p,
                                bool dephase_data_layer);

}  // namespace dtn
