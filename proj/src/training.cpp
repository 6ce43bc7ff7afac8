#include "dtn/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "dtn/dephased.hpp"
#include "dtn/error.hpp"

namespace dtn {

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto body = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      if (failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

RVector row(const EncodedDataset& data, Index i) { return data.features.row(i).transpose(); }

}  // namespace

double cross_entropy(const Prediction& pred, int label) {
  if (label != 0 && label != 1) config_error("label must be 0 or 1");
  return -std::log(std::max(pred.probs[label], kProbFloor));
}

double mean_cross_entropy(std::span<const Prediction> preds, std::span<const int> labels) {
  if (preds.size() != labels.size() || preds.empty()) config_error("mean_cross_entropy: size mismatch");
  double sum = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) sum += cross_entropy(preds[i], labels[i]);
  return sum / static_cast<double>(preds.size());
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) config_error("learning rate must be finite and >= 0");
  if (!(init_std >= 0) || !std::isfinite(init_std)) config_error("init std must be finite and >= 0");
  if (batch_size <= 0) config_error("batch size must be positive");
  if (epochs < 0) config_error("epochs must be >= 0");
  if (threads <= 0) config_error("threads must be positive");
  check_rate(p);
}

nlohmann::json TrainReport::to_json() const {
  nlohmann::json j;
  j["status"] = status;
  j["diverged"] = diverged;
  j["engine"] = engine;
  j["seed"] = seed;
  j["best_epoch"] = best_epoch;
  j["best_val_accuracy"] = best_val_accuracy;
  j["test_accuracy"] = test_accuracy;
  j["wall_seconds"] = wall_seconds;
  auto& ep = j["epochs"] = nlohmann::json::array();
  for (const auto& e : epochs) ep.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_accuracy", e.val_accuracy}});
  return j;
}

bool uses_bayes_engine(const Network& net) { return net.p() == 1.0 && net.topology().dephase_data_layer; }

std::unique_ptr<Model> make_model(const Network& net) {
  if (uses_bayes_engine(net)) return std::make_unique<BayesModel>(net);
  return std::make_unique<DensityModel>(net);
}

BatchGradient gradients(const Network& net, const EncodedDataset& data, std::span<const Index> batch, int threads) {
  if (batch.empty()) config_error("empty batch");
  const auto model = make_model(net);
  const std::size_t chunks = (batch.size() + kChunk - 1) / kChunk;
  const std::size_t wave = static_cast<std::size_t>(std::max(threads, 1));

  // Chunks are computed `wave` at a time and folded left in chunk order, so
  // the sum is independent of the thread count while memory stays bounded.
  GradientBuffer total = model->make_buffer();
  double loss = 0;
  std::vector<GradientBuffer> partial(std::min(wave, chunks));
  std::vector<double> partial_loss(partial.size());
  for (std::size_t start = 0; start < chunks; start += wave) {
    const std::size_t count = std::min(wave, chunks - start);
    parallel_for(count, threads, [&](std::size_t w) {
      const std::size_t c = start + w;
      GradientBuffer buf = model->make_buffer();
      double l = 0;
      const std::size_t end = std::min(batch.size(), (c + 1) * kChunk);
      for (std::size_t s = c * kChunk; s < end; ++s) {
        const Index i = batch[s];
        l += model->accumulate(row(data, i), data.labels[static_cast<std::size_t>(i)], buf);
      }
      partial[w] = std::move(buf);
      partial_loss[w] = l;
    });
    for (std::size_t w = 0; w < count; ++w) {
      total.add(partial[w]);
      loss += partial_loss[w];
    }
  }
  const double n = static_cast<double>(batch.size());
  BatchGradient out;
  out.loss = loss / n;
  out.grad = net.pullback(model->to_unitary(total)) / n;
  return out;
}

std::vector<Prediction> predict_all(const Network& net, const EncodedDataset& data, int threads) {
  const auto model = make_model(net);
  std::vector<Prediction> out(static_cast<std::size_t>(data.size()));
  const std::size_t chunks = (out.size() + kChunk - 1) / kChunk;
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t end = std::min(out.size(), (c + 1) * kChunk);
    for (std::size_t s = c * kChunk; s < end; ++s) out[s] = model->predict(row(data, static_cast<Index>(s)));
  });
  return out;
}

double accuracy(const Network& net, const EncodedDataset& data, int threads) {
  if (data.size() == 0) return 0.0;
  const auto preds = predict_all(net, data, threads);
  Index correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i].predicted_class == data.labels[i];
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

void adam_step(RVector& params, const RVector& grad, AdamState& state, double lr) {
  if (grad.size() != params.size()) config_error("adam_step: gradient size mismatch");
  if (state.m.size() != params.size()) {
    state.m = RVector::Zero(params.size());
    state.v = RVector::Zero(params.size());
    state.step = 0;
  }
  ++state.step;
  state.m = state.beta1 * state.m + (1 - state.beta1) * grad;
  state.v = state.beta2 * state.v + (1 - state.beta2) * grad.cwiseAbs2();
  const double c1 = 1 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1 - std::pow(state.beta2, static_cast<double>(state.step));
  params.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.eps);
}

void init_params(Network& net, double std, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  RVector flat(net.flat_size());
  for (Index i = 0; i < flat.size(); ++i) flat[i] = std * normal(rng);
  net.set_flat(flat);
}

TrainReport train(Network& net, const DatasetSplits& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.train.size() == 0) config_error("empty training split");
  if (data.train.feature_count() != net.topology().m) config_error("feature count does not match network width");

  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.self_test) {
    const double err = gradient_self_test();
    if (!(err < 1e-5)) numerical_error("gradient self-test failed, relative error " + std::to_string(err));
  }

  net.set_p(cfg.p);
  net.set_dephase_data_layer(cfg.dephase_data_layer);
  init_params(net, cfg.init_std, cfg.seed);

  TrainReport report;
  report.seed = cfg.seed;
  report.engine = uses_bayes_engine(net) ? "bayes" : "density";

  RVector best = net.flat();
  report.best_epoch = 0;
  report.best_val_accuracy = accuracy(net, data.validation, cfg.threads);

  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Index> order(static_cast<std::size_t>(data.train.size()));
  std::iota(order.begin(), order.end(), Index{0});
  AdamState adam;
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs && !report.diverged; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::span<const Index> batch(order.data() + start, std::min(bs, order.size() - start));
      const BatchGradient g = gradients(net, data.train, batch, cfg.threads);
      if (!std::isfinite(g.loss) || !g.grad.allFinite()) {
        report.diverged = true;
        report.status = "diverged";
        break;
      }
      loss_sum += g.loss * static_cast<double>(batch.size());
      RVector theta = net.flat();
      adam_step(theta, g.grad, adam, cfg.learning_rate);
      if (!theta.allFinite()) {
        report.diverged = true;
        report.status = "diverged";
        break;
      }
      net.set_flat(theta);
    }
    if (report.diverged) break;
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_accuracy = accuracy(net, data.validation, cfg.threads);
    report.epochs.push_back(rec);
    if (rec.val_accuracy > report.best_val_accuracy) {
      report.best_val_accuracy = rec.val_accuracy;
      report.best_epoch = epoch;
      best = net.flat();
    }
  }

  net.set_flat(best);
  report.test_accuracy = accuracy(net, data.test, cfg.threads);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

GradientCheck gradient_check(Network& net, const RVector& features, int label, double step, double floor, Index stride) {
  if (stride <= 0) config_error("stride must be positive");
  const auto loss = [&](const RVector& theta) {
    net.set_flat(theta);
    return cross_entropy(make_model(net)->predict(features), label);
  };
  const RVector theta = net.flat();
  RVector analytic;
  {
    const auto model = make_model(net);
    GradientBuffer buf = model->make_buffer();
    model->accumulate(features, label, buf);
    analytic = net.pullback(model->to_unitary(buf));
  }
  GradientCheck out;
  for (Index i = 0; i < theta.size(); i += stride) {
    RVector plus = theta, minus = theta;
    plus[i] += step;
    minus[i] -= step;
    const double fd = (loss(plus) - loss(minus)) / (2 * step);
    const double denom = std::max({std::abs(fd), std::abs(analytic[i]), floor});
    out.max_rel_error = std::max(out.max_rel_error, std::abs(fd - analytic[i]) / denom);
    ++out.checked;
  }
  net.set_flat(theta);
  return out;
}

double gradient_self_test(std::uint64_t seed) {
  struct Case {
    ModelKind kind;
    int m, k;
  };
  const Case cases[] = {{ModelKind::ttn, 4, 0}, {ModelKind::ttn, 4, 1}, {ModelKind::mera, 8, 0}};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0;
  for (const auto& c : cases) {
    Network net(build_network(c.kind, c.m, c.k, AncillaScheme::per_qubit));
    for (double p : {0.0, 0.5, 1.0}) {
      net.set_p(p);
      init_params(net, 0.5, rng());
      RVector x(c.m);
      for (Index i = 0; i < x.size(); ++i) x[i] = unit(rng);
      worst = std::max(worst, gradient_check(net, x, static_cast<int>(rng() & 1), 1e-5, 1e-4, 3).max_rel_error);
    }
  }
  return worst;
}

}  // namespace dtn
