#include <doctest.h>

#include <algorithm>
#include <bit>
#include <filesystem>
#include <numbers>

#include "dtn/dataset.hpp"
#include "dtn/dephased.hpp"
#include "dtn/network.hpp"
#include "test_util.hpp"

using namespace dtn;
using dtn::testing::random_features;
using dtn::testing::randomize;

namespace {

int count_kind(const NetworkTopology& t, NodeKind kind) {
  int n = 0;
  for (const auto& node : t.nodes) n += node.kind == kind;
  return n;
}

double loss_of(const Network& net, const RVector& x, int label) {
  const auto pred = DensityModel(net).predict(x);
  return -std::log(pred.probs(label));
}

RVector flat_gradient(const Model& model, const Network& net, const RVector& x, int label) {
  auto buffer = model.make_buffer();
  model.accumulate(x, label, buffer);
  return net.pullback(model.to_unitary(buffer));
}

// Oracle: keep every wire of the network in one register, apply each node by
// explicit embedding, and trace everything except the readout at the end.
CMatrix reference_readout(const Network& net, const RVector& x) {
  const auto& t = net.topology();
  const double p = t.p;
  std::vector<int> labels;
  CMatrix rho = CMatrix::Ones(1, 1);
  for (std::size_t w = 0; w < t.wires.size(); ++w) {
    const auto& wire = t.wires[w];
    if (wire.kind == WireKind::internal) continue;
    CMatrix q = CMatrix::Zero(2, 2);
    if (wire.kind == WireKind::ancilla) q(0, 0) = 1.0;
    else q = data_qubit(x(wire.feature), p, t.dephase_data_layer);
    rho = kron(rho, q);
    labels.push_back(static_cast<int>(w));
  }
  const int n = static_cast<int>(labels.size());
  auto damp = [&](const std::vector<int>& positions) {
    Index mask = 0;
    for (int q : positions) mask |= Index{1} << (n - 1 - q);
    for (Index j = 0; j < rho.cols(); ++j)
      for (Index i = 0; i < rho.rows(); ++i) rho(i, j) *= std::pow(1.0 - p, std::popcount(static_cast<std::uint64_t>((i ^ j) & mask)));
  };
  for (std::size_t id = 0; id < t.nodes.size(); ++id) {
    const auto& node = t.nodes[id];
    std::vector<int> target, order;
    for (int w : labels)
      if (std::find(node.inputs.begin(), node.inputs.end(), w) == node.inputs.end()) target.push_back(w);
    target.insert(target.end(), node.inputs.begin(), node.inputs.end());
    for (int w : target) order.push_back(static_cast<int>(std::find(labels.begin(), labels.end(), w) - labels.begin()));
    rho = permute_qubits(rho, order);
    const Index rest = rho.rows() / node.dim();
    const CMatrix v = kron(CMatrix::Identity(rest, rest), net.unitary(static_cast<int>(id)));
    rho = v * rho * v.adjoint();
    labels = target;
    const int base = n - node.qubits();
    std::vector<int> kept_positions;
    for (int q = 0; q < node.qubits(); ++q) {
      const bool kept = q < static_cast<int>(node.kept.size());
      labels[static_cast<std::size_t>(base + q)] = kept ? node.kept[static_cast<std::size_t>(q)] : node.traced[static_cast<std::size_t>(q) - node.kept.size()];
      if (kept) kept_positions.push_back(base + q);
    }
    if (node.kind != NodeKind::root) damp(kept_positions);
  }
  std::vector<int> traced;
  for (int q = 0; q < n; ++q)
    if (labels[static_cast<std::size_t>(q)] != t.readout_wire) traced.push_back(q);
  return partial_trace(rho, traced);
}

}  // namespace

TEST_CASE("ttn builder: node counts, arities and layers") {
  const auto t = build_ttn(8, 0);
  CHECK(t.nodes.size() == 7);
  CHECK(t.tree_layers == 3);
  for (const auto& n : t.nodes) CHECK(n.dim() == 4);
  CHECK(count_kind(t, NodeKind::root) == 1);

  const auto t1 = build_ttn(4, 1);
  CHECK(t1.nodes[0].dim() == 16);
  CHECK(t1.nodes[0].kept.size() == 2);
  CHECK(t1.nodes[0].n_i == 2);
  CHECK(t1.nodes[0].n_a == 2);
  CHECK(t1.nodes[0].n_o == 2);
  CHECK(t1.bond_qubits() == 2);

  const auto t3 = build_ttn(8, 3);
  for (const auto& n : t3.nodes) CHECK(n.dim() == 256);

  for (int m : {4, 8, 16, 64}) {
    const auto t = build_ttn(m, 1);
    CHECK(static_cast<int>(t.nodes.size()) == m - 1);
    std::vector<int> per_layer(static_cast<std::size_t>(t.tree_layers + 1), 0);
    for (const auto& n : t.nodes) ++per_layer[static_cast<std::size_t>(n.layer)];
    for (int l = 1; l <= t.tree_layers; ++l) CHECK(per_layer[static_cast<std::size_t>(l)] == m >> l);
  }
  CHECK_THROWS_AS(build_ttn(6, 0), Error);
  CHECK_THROWS_AS(build_ttn(2, 0), Error);
}

TEST_CASE("ancilla schemes with equal ancilla budget have equal parameter counts") {
  for (int k : {1, 2}) {
    const auto per_qubit = build_ttn(16, k, AncillaScheme::per_qubit);
    const auto per_node = build_ttn(16, 2 * k, AncillaScheme::per_node);
    CHECK(per_qubit.parameter_count() == per_node.parameter_count());
  }
  const auto t = build_ttn(8, 2, AncillaScheme::per_node);
  for (const auto& n : t.nodes) {
    CHECK(n.n_a == 2);
    CHECK(n.n_o == 1);
    CHECK(n.covers_all_channels());
  }
  for (const auto& n : build_ttn(8, 1).nodes) CHECK_FALSE(n.covers_all_channels());
}

TEST_CASE("mera builder: entangler placement") {
  const auto t = build_mera(8, 0);
  int data_level = 0, layer2 = 0;
  for (const auto& n : t.nodes)
    if (n.kind == NodeKind::entangler) (n.layer == 1 ? data_level : layer2) += 1;
  CHECK(data_level == 3);
  CHECK(layer2 == 1);
  CHECK(count_kind(t, NodeKind::tree) + count_kind(t, NodeKind::root) == 7);

  const auto t1 = build_mera(8, 1);
  for (const auto& n : t1.nodes) {
    if (n.kind == NodeKind::entangler && n.layer == 1) CHECK(n.qubits() == 2);
    if (n.kind == NodeKind::entangler && n.layer == 2) CHECK(n.qubits() == 4);
    if (n.kind == NodeKind::tree) CHECK(n.qubits() == 4);
    CHECK(n.inputs.size() == n.kept.size() + n.traced.size());
  }
  CHECK_THROWS_AS(build_mera(4, 0), Error);
  CHECK_THROWS_AS(build_mera(8, 2), Error);
}

TEST_CASE("live-wire scheduler widths") {
  CHECK(live_wire_schedule(build_ttn(64, 0)).max_width <= 4);
  CHECK(live_wire_schedule(build_mera(8, 0)).max_width <= 8);
  CHECK_NOTHROW(live_wire_schedule(build_mera(8, 1), 12));
  CHECK_THROWS_AS(live_wire_schedule(build_ttn(8, 3), 7), Error);
}

TEST_CASE("identity network reads out the kept-path data qubit") {
  Network net(build_ttn(4, 0));
  const RVector x = (RVector(4) << 0.3, 0.8, 0.1, 0.6).finished();
  for (double p : {0.0, 0.4, 1.0}) {
    net.set_p(p);
    const auto pred = forward(net, x);
    const double lambda0 = std::pow(std::sin(0.5 * std::numbers::pi * 0.3), 2);
    CHECK(pred.probs(0) == doctest::Approx(lambda0).epsilon(1e-12));
    CHECK(bayes_forward(net, x).probs(0) == doctest::Approx(lambda0).epsilon(1e-12));
  }
}

TEST_CASE("forward yields a probability vector; p = 0 dephasing is a no-op") {
  std::mt19937_64 rng(11);
  for (auto topo : {build_ttn(8, 1), build_mera(8, 0), build_ttn(8, 2, AncillaScheme::per_node)}) {
    Network net(topo);
    randomize(net, rng);
    const RVector x = random_features(8, rng);
    for (double p : {0.0, 0.3, 1.0}) {
      net.set_p(p);
      const auto pred = forward(net, x);
      CHECK(pred.probs.minCoeff() >= 0.0);
      CHECK(pred.probs.sum() == doctest::Approx(1.0).epsilon(1e-10));
    }
    net.set_p(0.0);
    const auto a = forward(net, x);
    net.set_dephase_data_layer(false);
    const auto b = forward(net, x);
    CHECK((a.probs - b.probs).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("pure product input at p = 0 gives a readout state with purity <= 1") {
  std::mt19937_64 rng(5);
  Network net(build_ttn(8, 0));
  randomize(net, rng);
  const CMatrix rho = DensityModel(net).readout_state(random_features(8, rng));
  CHECK(rho.squaredNorm() <= 1.0 + 1e-12);
}

TEST_CASE("scheduled evaluation equals a whole-register reference") {
  std::mt19937_64 rng(17);
  for (auto topo : {build_ttn(4, 1), build_mera(8, 0), build_ttn(4, 2, AncillaScheme::per_node)}) {
    Network net(topo);
    randomize(net, rng);
    for (bool dephase_data : {true, false}) {
      net.set_p(0.3);
      net.set_dephase_data_layer(dephase_data);
      const RVector x = random_features(topo.m, rng);
      const CMatrix scheduled = DensityModel(net).readout_state(x);
      const CMatrix reference = reference_readout(net, x);
      CHECK((scheduled - reference).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("bayes evaluator equals density evaluator at p = 1") {
  std::mt19937_64 rng(23);
  for (auto topo : {build_ttn(4, 0), build_ttn(8, 1), build_mera(8, 0), build_mera(8, 1),
                    build_ttn(8, 2, AncillaScheme::per_node)}) {
    Network net(topo);
    net.set_p(1.0);
    for (int draw = 0; draw < 5; ++draw) {
      randomize(net, rng);
      const RVector x = random_features(topo.m, rng);
      const auto d = forward(net, x);
      const auto b = bayes_forward(net, x);
      CHECK((d.probs - b.probs).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
}

TEST_CASE("density gradients match central finite differences") {
  std::mt19937_64 rng(31);
  for (auto topo : {build_ttn(4, 0), build_ttn(4, 1), build_mera(8, 0)}) {
    Network net(topo);
    net.set_p(0.35);
    randomize(net, rng, 0.7);
    const RVector x = random_features(topo.m, rng);
    const int label = 1;
    const RVector analytic = flat_gradient(DensityModel(net), net, x, label);

    const RVector theta = net.flat();
    const double h = 1e-5;
    double worst = 0;
    for (Index i = 0; i < theta.size(); i += 7) {
      RVector t = theta;
      t(i) += h;
      net.set_flat(t);
      const double up = loss_of(net, x, label);
      t(i) -= 2 * h;
      net.set_flat(t);
      const double down = loss_of(net, x, label);
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - analytic(i)) / std::max({std::abs(fd), std::abs(analytic(i)), 1e-2}));
    }
    net.set_flat(theta);
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("bayes gradients match central finite differences") {
  std::mt19937_64 rng(37);
  for (auto topo : {build_ttn(8, 1), build_mera(8, 0), build_ttn(8, 2, AncillaScheme::per_node)}) {
    Network net(topo);
    net.set_p(1.0);
    randomize(net, rng, 0.7);
    const RVector x = random_features(topo.m, rng);
    const RVector analytic = flat_gradient(BayesModel(net), net, x, 0);
    CHECK((flat_gradient(DensityModel(net), net, x, 0) - analytic).cwiseAbs().maxCoeff() <= 1e-8);

    const RVector theta = net.flat();
    const double h = 1e-5;
    double worst = 0;
    for (Index i = 0; i < theta.size(); i += 11) {
      RVector t = theta;
      t(i) += h;
      net.set_flat(t);
      const double up = -std::log(bayes_forward(net, x).probs(0));
      t(i) -= 2 * h;
      net.set_flat(t);
      const double down = -std::log(bayes_forward(net, x).probs(0));
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - analytic(i)) / std::max({std::abs(fd), std::abs(analytic(i)), 1e-2}));
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("checkpoint round trip") {
  std::mt19937_64 rng(41);
  Network net(build_ttn(8, 1));
  randomize(net, rng);
  net.set_p(0.4);
  net.set_dephase_data_layer(false);
  const auto path = std::filesystem::temp_directory_path() / "dtn_ckpt_test.bin";
  write_checkpoint(path, net);
  const Network back = read_checkpoint(path);
  CHECK(back.p() == 0.4);
  CHECK_FALSE(back.topology().dephase_data_layer);
  CHECK((back.flat() - net.flat()).cwiseAbs().maxCoeff() == 0.0);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_checkpoint(path), Error);
}
