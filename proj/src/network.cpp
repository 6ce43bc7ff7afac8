#include "dtn/network.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "binary_io.hpp"
#include "dtn/dataset.hpp"

namespace dtn {

std::string to_string(ModelKind kind) { return kind == ModelKind::ttn ? "ttn" : "mera"; }
std::string to_string(AncillaScheme scheme) { return scheme == AncillaScheme::per_qubit ? "per-qubit" : "per-node"; }

ModelKind parse_model_kind(const std::string& s) {
  if (s == "ttn") return ModelKind::ttn;
  if (s == "mera") return ModelKind::mera;
  config_error("unknown model '" + s + "' (expected ttn or mera)");
}

AncillaScheme parse_scheme(const std::string& s) {
  if (s == "per-qubit") return AncillaScheme::per_qubit;
  if (s == "per-node") return AncillaScheme::per_node;
  config_error("unknown ancilla scheme '" + s + "' (expected per-qubit or per-node)");
}

// ---------------------------------------------------------------------------
// Builders

namespace {

int log2_exact(int m) {
  int l = 0;
  while ((1 << l) < m) ++l;
  return l;
}

struct Builder {
  NetworkTopology net;

  int add_wire(WireKind kind, int feature = -1, int producer = -1) {
    net.wires.push_back({kind, feature, producer});
    return static_cast<int>(net.wires.size()) - 1;
  }

  // Adds a node over `inputs` keeping the first `keep` outputs; returns the kept wires.
  std::vector<int> add_node(NodeKind kind, int layer, std::vector<int> inputs, int keep, int ancillas) {
    UnitaryNode node;
    node.kind = kind;
    node.layer = layer;
    node.n_a = ancillas;
    node.n_i = static_cast<int>(inputs.size()) - ancillas;
    node.n_o = keep;
    const int id = static_cast<int>(net.nodes.size());
    for (int q = 0; q < static_cast<int>(inputs.size()); ++q)
      (q < keep ? node.kept : node.traced).push_back(add_wire(WireKind::internal, -1, id));
    node.inputs = std::move(inputs);
    net.nodes.push_back(std::move(node));
    return net.nodes.back().kept;
  }

  std::vector<std::vector<int>> data_bundles(int ancillas_per_qubit) {
    std::vector<std::vector<int>> bundles(static_cast<std::size_t>(net.m));
    for (int i = 0; i < net.m; ++i) bundles[i].push_back(add_wire(WireKind::data, i));
    for (int i = 0; i < net.m; ++i)
      for (int a = 0; a < ancillas_per_qubit; ++a) bundles[i].push_back(add_wire(WireKind::ancilla));
    return bundles;
  }

  // Entanglers on the boundaries between neighbouring pairs of `bonds`.
  void add_entanglers(std::vector<std::vector<int>>& bonds, int layer) {
    for (std::size_t j = 1; j + 1 < bonds.size(); j += 2) {
      std::vector<int> inputs = bonds[j];
      inputs.insert(inputs.end(), bonds[j + 1].begin(), bonds[j + 1].end());
      const int width = static_cast<int>(inputs.size());
      const auto out = add_node(NodeKind::entangler, layer, std::move(inputs), width, 0);
      const auto half = static_cast<std::ptrdiff_t>(bonds[j].size());
      bonds[j].assign(out.begin(), out.begin() + half);
      bonds[j + 1].assign(out.begin() + half, out.end());
    }
  }

  // One coarse-graining layer over `bonds`; returns the next layer's bonds.
  std::vector<std::vector<int>> tree_layer(const std::vector<std::vector<int>>& bonds, int layer, bool root,
                                           int first_layer_ancillas) {
    std::vector<std::vector<int>> next;
    for (std::size_t j = 0; j + 1 < bonds.size(); j += 2) {
      std::vector<int> inputs = bonds[j];
      inputs.insert(inputs.end(), bonds[j + 1].begin(), bonds[j + 1].end());
      int ancillas = 0;
      int keep = 0;
      if (net.scheme == AncillaScheme::per_node) {
        for (int a = 0; a < net.k; ++a) inputs.push_back(add_wire(WireKind::ancilla));
        ancillas = net.k;
        keep = 1;
      } else {
        ancillas = layer == 1 ? first_layer_ancillas : 0;
        keep = static_cast<int>(inputs.size()) / 2;
      }
      if (root) keep = 1;
      next.push_back(add_node(root ? NodeKind::root : NodeKind::tree, layer, std::move(inputs), keep, ancillas));
    }
    return next;
  }
};

void check_features(int m, int minimum) {
  if (m < minimum || !is_power_of_two(m))
    config_error("feature count must be a power of two >= " + std::to_string(minimum) + ", got " + std::to_string(m));
}

}  // namespace

NetworkTopology build_ttn(int m, int k, AncillaScheme scheme) {
  check_features(m, 4);
  if (k < 0) config_error("ancilla count must be non-negative");
  Builder b;
  b.net.kind = ModelKind::ttn;
  b.net.m = m;
  b.net.k = k;
  b.net.scheme = scheme;
  b.net.tree_layers = log2_exact(m);
  auto bonds = b.data_bundles(scheme == AncillaScheme::per_qubit ? k : 0);
  for (int layer = 1; layer <= b.net.tree_layers; ++layer)
    bonds = b.tree_layer(bonds, layer, layer == b.net.tree_layers, 2 * k);
  b.net.readout_wire = bonds.front().front();
  b.net.validate();
  return b.net;
}

NetworkTopology build_mera(int m, int k) {
  check_features(m, 8);
  if (k < 0 || k > 1) config_error("MERA supports 0 or 1 ancilla per data qubit");
  Builder b;
  b.net.kind = ModelKind::mera;
  b.net.m = m;
  b.net.k = k;
  b.net.scheme = AncillaScheme::per_qubit;
  b.net.tree_layers = log2_exact(m);
  auto bonds = b.data_bundles(k);

  // Data-level entanglers act on the data qubits only, before ancillas join.
  std::vector<std::vector<int>> data(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) data[i] = {bonds[i].front()};
  b.add_entanglers(data, 1);
  for (int i = 0; i < m; ++i) bonds[i].front() = data[i].front();

  for (int layer = 1; layer <= b.net.tree_layers; ++layer) {
    if (layer > 1 && layer < b.net.tree_layers) b.add_entanglers(bonds, layer);
    bonds = b.tree_layer(bonds, layer, layer == b.net.tree_layers, 2 * k);
  }
  b.net.readout_wire = bonds.front().front();
  b.net.validate();
  return b.net;
}

NetworkTopology build_network(ModelKind kind, int m, int k, AncillaScheme scheme) {
  if (kind == ModelKind::mera) {
    if (scheme != AncillaScheme::per_qubit) config_error("MERA only supports per-qubit ancillas");
    return build_mera(m, k);
  }
  return build_ttn(m, k, scheme);
}

Index NetworkTopology::parameter_count() const {
  Index total = 0;
  for (const auto& n : nodes) total += n.dim() * n.dim();
  return total;
}

void NetworkTopology::validate() const {
  std::vector<int> consumed(wires.size(), 0);
  for (std::size_t id = 0; id < nodes.size(); ++id) {
    const auto& n = nodes[id];
    if (n.inputs.empty()) config_error("node without inputs");
    if (n.inputs.size() != n.kept.size() + n.traced.size()) config_error("node wire counts do not balance");
    if (n.n_i + n.n_a != n.qubits() || n.n_o != static_cast<int>(n.kept.size()))
      config_error("node arity bookkeeping is inconsistent");
    if (n.kind == NodeKind::entangler && !n.traced.empty()) config_error("entanglers must not trace outputs");
    for (int w : n.inputs) {
      if (w < 0 || w >= static_cast<int>(wires.size())) config_error("node input wire out of range");
      const auto& wire = wires[static_cast<std::size_t>(w)];
      if (wire.kind == WireKind::internal && wire.producer >= static_cast<int>(id))
        config_error("nodes are not in topological order");
      if (++consumed[static_cast<std::size_t>(w)] > 1) config_error("wire consumed twice");
    }
  }
  for (std::size_t w = 0; w < wires.size(); ++w) {
    if (static_cast<int>(w) == readout_wire) continue;
    const auto& wire = wires[w];
    bool traced = false;
    if (wire.kind == WireKind::internal) {
      const auto& t = nodes[static_cast<std::size_t>(wire.producer)].traced;
      traced = std::find(t.begin(), t.end(), static_cast<int>(w)) != t.end();
    }
    if (!traced && consumed[w] != 1) config_error("wire " + std::to_string(w) + " is left dangling");
  }
  if (readout_wire < 0 || consumed[static_cast<std::size_t>(readout_wire)] != 0) config_error("invalid readout wire");
}

// ---------------------------------------------------------------------------
// Scheduler

EvaluationPlan live_wire_schedule(const NetworkTopology& net, int width_cap) {
  EvaluationPlan plan;
  const auto wire_count = net.wires.size();
  std::vector<int> slot_of(wire_count, -1);         // live wires
  std::vector<std::vector<int>> slot_wires;          // per slot, qubit order
  std::vector<bool> slot_grad;                       // slot depends on parameters
  std::vector<bool> available(wire_count, false);
  for (std::size_t w = 0; w < wire_count; ++w) available[w] = net.wires[w].kind != WireKind::internal;
  std::vector<bool> done(net.nodes.size(), false);

  auto new_slot = [&]() {
    slot_wires.emplace_back();
    slot_grad.push_back(false);
    return static_cast<int>(slot_wires.size()) - 1;
  };

  auto merged_width = [&](const UnitaryNode& node) {
    std::vector<int> seen;
    int width = 0;
    for (int w : node.inputs) {
      const int s = slot_of[static_cast<std::size_t>(w)];
      if (s < 0) {
        ++width;
      } else if (std::find(seen.begin(), seen.end(), s) == seen.end()) {
        seen.push_back(s);
        width += static_cast<int>(slot_wires[static_cast<std::size_t>(s)].size());
      }
    }
    return width;
  };

  for (std::size_t emitted = 0; emitted < net.nodes.size(); ++emitted) {
    int best = -1, best_width = 0;
    for (std::size_t id = 0; id < net.nodes.size(); ++id) {
      if (done[id]) continue;
      const auto& node = net.nodes[id];
      const bool ready = std::all_of(node.inputs.begin(), node.inputs.end(),
                                     [&](int w) { return available[static_cast<std::size_t>(w)]; });
      if (!ready) continue;
      const int width = merged_width(node);
      if (best < 0 || width < best_width) {
        best = static_cast<int>(id);
        best_width = width;
      }
    }
    if (best < 0) config_error("topology has no ready node; the wiring is cyclic or incomplete");
    if (best_width > width_cap)
      config_error("evaluation needs a " + std::to_string(best_width) + "-qubit register, above the cap of " +
                   std::to_string(width_cap));
    plan.max_width = std::max(plan.max_width, best_width);
    const auto& node = net.nodes[static_cast<std::size_t>(best)];

    // Load source wires, then merge every register touched into the first one.
    std::vector<int> touched;
    for (int w : node.inputs) {
      auto& s = slot_of[static_cast<std::size_t>(w)];
      if (s < 0) {
        s = new_slot();
        slot_wires[static_cast<std::size_t>(s)] = {w};
        const auto& wire = net.wires[static_cast<std::size_t>(w)];
        PlanStep step{wire.kind == WireKind::data ? StepKind::load_data : StepKind::load_ancilla};
        step.slot = s;
        step.feature = wire.feature;
        plan.steps.push_back(std::move(step));
      }
      if (std::find(touched.begin(), touched.end(), s) == touched.end()) touched.push_back(s);
    }
    const int slot = touched.front();
    for (std::size_t i = 1; i < touched.size(); ++i) {
      const int src = touched[i];
      PlanStep step{StepKind::merge};
      step.slot = slot;
      step.other = src;
      step.grad_slot = slot_grad[static_cast<std::size_t>(slot)];
      step.grad_other = slot_grad[static_cast<std::size_t>(src)];
      plan.steps.push_back(std::move(step));
      auto& dst_wires = slot_wires[static_cast<std::size_t>(slot)];
      for (int w : slot_wires[static_cast<std::size_t>(src)]) {
        dst_wires.push_back(w);
        slot_of[static_cast<std::size_t>(w)] = slot;
      }
      slot_wires[static_cast<std::size_t>(src)].clear();
      slot_grad[static_cast<std::size_t>(slot)] = slot_grad[static_cast<std::size_t>(slot)] || slot_grad[static_cast<std::size_t>(src)];
    }

    // Bring the node inputs to the trailing positions, in node order.
    auto& wires = slot_wires[static_cast<std::size_t>(slot)];
    std::vector<int> target;
    for (int w : wires)
      if (std::find(node.inputs.begin(), node.inputs.end(), w) == node.inputs.end()) target.push_back(w);
    target.insert(target.end(), node.inputs.begin(), node.inputs.end());
    if (target != wires) {
      PlanStep step{StepKind::permute};
      step.slot = slot;
      for (int w : target)
        step.order.push_back(static_cast<int>(std::find(wires.begin(), wires.end(), w) - wires.begin()));
      plan.steps.push_back(std::move(step));
      wires = target;
    }

    PlanStep apply{StepKind::apply};
    apply.slot = slot;
    apply.node = best;
    plan.steps.push_back(std::move(apply));
    slot_grad[static_cast<std::size_t>(slot)] = true;

    const std::size_t keep_from = wires.size() - node.inputs.size();
    for (int w : node.inputs) slot_of[static_cast<std::size_t>(w)] = -1, available[static_cast<std::size_t>(w)] = false;
    wires.resize(keep_from);
    for (int w : node.kept) {
      wires.push_back(w);
      slot_of[static_cast<std::size_t>(w)] = slot;
      available[static_cast<std::size_t>(w)] = true;
    }
    if (!node.traced.empty()) {
      PlanStep step{StepKind::trace};
      step.slot = slot;
      step.count = static_cast<int>(node.traced.size());
      plan.steps.push_back(std::move(step));
    }
    if (node.kind != NodeKind::root) {
      PlanStep step{StepKind::dephase};
      step.slot = slot;
      step.count = static_cast<int>(node.kept.size());
      plan.steps.push_back(std::move(step));
    }
    done[static_cast<std::size_t>(best)] = true;
    plan.node_order.push_back(best);
  }

  const int readout = slot_of[static_cast<std::size_t>(net.readout_wire)];
  if (readout < 0 || slot_wires[static_cast<std::size_t>(readout)].size() != 1)
    config_error("readout register does not reduce to a single qubit");
  PlanStep step{StepKind::readout};
  step.slot = readout;
  plan.steps.push_back(std::move(step));
  plan.readout_slot = readout;
  plan.slots = static_cast<int>(slot_wires.size());
  return plan;
}

// ---------------------------------------------------------------------------
// Parameters

Prediction Prediction::from_probs(double p0, double p1) {
  Prediction out;
  out.probs << std::max(p0, 0.0), std::max(p1, 0.0);
  out.predicted_class = out.probs(1) > out.probs(0) ? 1 : 0;
  return out;
}

Network::Network(NetworkTopology topology, int width_cap) : topology_(std::move(topology)) {
  topology_.validate();
  check_rate(topology_.p);
  plan_ = live_wire_schedule(topology_, width_cap);
  params_.reserve(topology_.nodes.size());
  exps_.reserve(topology_.nodes.size());
  for (const auto& node : topology_.nodes) {
    params_.emplace_back(node.dim());
    exps_.emplace_back(params_.back());
  }
}

void Network::set_p(double p) {
  check_rate(p);
  topology_.p = p;
}

void Network::refresh(int node) { exps_[static_cast<std::size_t>(node)] = HermitianExp(params_[static_cast<std::size_t>(node)]); }

void Network::set_params(std::vector<HermitianParam> params) {
  if (params.size() != params_.size()) config_error("parameter list does not match node count");
  for (std::size_t i = 0; i < params.size(); ++i) set_node(static_cast<int>(i), std::move(params[i]));
}

void Network::set_node(int node, HermitianParam h) {
  if (node < 0 || node >= node_count()) config_error("node index out of range");
  if (h.dim() != topology_.nodes[static_cast<std::size_t>(node)].dim()) config_error("parameter dimension mismatch");
  params_[static_cast<std::size_t>(node)] = std::move(h);
  refresh(node);
}

Index Network::flat_size() const {
  Index total = 0;
  for (const auto& h : params_) total += h.size();
  return total;
}

RVector Network::flat() const {
  RVector out(flat_size());
  Index offset = 0;
  for (const auto& h : params_) {
    out.segment(offset, h.size()) = h.packed();
    offset += h.size();
  }
  return out;
}

void Network::set_flat(const RVector& flat) {
  if (flat.size() != flat_size()) config_error("flat parameter vector has wrong length");
  Index offset = 0;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Index n = params_[i].size();
    params_[i].packed() = flat.segment(offset, n);
    offset += n;
    refresh(static_cast<int>(i));
  }
}

RVector Network::pullback(const std::vector<CMatrix>& grad_u) const {
  if (grad_u.size() != params_.size()) config_error("gradient list does not match node count");
  RVector out(flat_size());
  Index offset = 0;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Index n = params_[i].size();
    out.segment(offset, n) = HermitianParam::pack_gradient(exps_[i].pullback(grad_u[i]));
    offset += n;
  }
  return out;
}

UnitaryGradients zero_gradients(const Network& net) {
  UnitaryGradients out;
  out.reserve(static_cast<std::size_t>(net.node_count()));
  for (const auto& node : net.topology().nodes) out.push_back(CMatrix::Zero(node.dim(), node.dim()));
  return out;
}

void GradientBuffer::add(const GradientBuffer& other) {
  if (other.complex.size() != complex.size() || other.real.size() != real.size())
    config_error("gradient buffers have different layouts");
  for (std::size_t i = 0; i < complex.size(); ++i) complex[i] += other.complex[i];
  for (std::size_t i = 0; i < real.size(); ++i) real[i] += other.real[i];
}

// ---------------------------------------------------------------------------
// Density-matrix evaluation

CMatrix data_qubit(double x, double p, bool dephase) {
  CMatrix rho = feature_density(x).matrix();
  if (dephase) {
    rho(0, 1) *= 1.0 - p;
    rho(1, 0) *= 1.0 - p;
  }
  return rho;
}

namespace {

CMatrix ancilla_qubit() {
  CMatrix rho = CMatrix::Zero(2, 2);
  rho(0, 0) = 1.0;
  return rho;
}

std::vector<int> inverse_order(const std::vector<int>& order) {
  std::vector<int> inv(order.size());
  for (std::size_t q = 0; q < order.size(); ++q) inv[static_cast<std::size_t>(order[q])] = static_cast<int>(q);
  return inv;
}

// Saved operands for the reverse sweep.
struct Tape {
  std::vector<CMatrix> first, second;
};

// Runs the plan; returns the readout state. Records operands when `tape` is set.
CMatrix run_density(const Network& net, const RVector& x, Tape* tape) {
  const auto& topo = net.topology();
  const auto& plan = net.plan();
  if (x.size() != topo.m) config_error("sample has " + std::to_string(x.size()) + " features, network expects " + std::to_string(topo.m));
  std::vector<CMatrix> reg(static_cast<std::size_t>(plan.slots));
  if (tape) {
    tape->first.assign(plan.steps.size(), CMatrix());
    tape->second.assign(plan.steps.size(), CMatrix());
  }
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    const auto& step = plan.steps[i];
    CMatrix& rho = reg[static_cast<std::size_t>(step.slot)];
    switch (step.kind) {
      case StepKind::load_data:
        rho = data_qubit(x(step.feature), topo.p, topo.dephase_data_layer);
        break;
      case StepKind::load_ancilla:
        rho = ancilla_qubit();
        break;
      case StepKind::merge: {
        CMatrix& other = reg[static_cast<std::size_t>(step.other)];
        CMatrix merged = kron(rho, other);
        if (tape) {
          tape->first[i] = std::move(rho);
          tape->second[i] = std::move(other);
        }
        rho = std::move(merged);
        other = CMatrix();
        break;
      }
      case StepKind::permute:
        rho = permute_qubits(rho, step.order);
        break;
      case StepKind::apply: {
        const CMatrix& u = net.unitary(step.node);
        CMatrix y = rho;
        apply_left_trailing(u, y);  // (I (x) U) rho
        CMatrix out = y.adjoint();
        apply_left_trailing(u, out);
        rho = hermitian_part(out);
        if (tape) tape->first[i] = std::move(y);
        break;
      }
      case StepKind::trace:
        rho = trace_trailing(rho, step.count);
        break;
      case StepKind::dephase:
        dephase_trailing(rho, step.count, topo.p);
        break;
      case StepKind::readout:
        break;
    }
  }
  return reg[static_cast<std::size_t>(plan.readout_slot)];
}

// Adjoint of kron(a, b) with respect to each factor.
CMatrix kron_grad_first(const CMatrix& g, const CMatrix& b) {
  const Index da = g.rows() / b.rows(), db = b.rows();
  CMatrix out(da, da);
  const CMatrix bc = b.conjugate();
  for (Index j = 0; j < da; ++j)
    for (Index i = 0; i < da; ++i) out(i, j) = g.block(i * db, j * db, db, db).cwiseProduct(bc).sum();
  return out;
}

CMatrix kron_grad_second(const CMatrix& g, const CMatrix& a) {
  const Index da = a.rows(), db = g.rows() / a.rows();
  CMatrix out = CMatrix::Zero(db, db);
  for (Index j = 0; j < da; ++j)
    for (Index i = 0; i < da; ++i) out += std::conj(a(i, j)) * g.block(i * db, j * db, db, db);
  return out;
}

}  // namespace

CMatrix DensityModel::readout_state(const RVector& features) const { return run_density(net_, features, nullptr); }

Prediction DensityModel::predict(const RVector& features) const {
  const CMatrix rho = readout_state(features);
  return Prediction::from_probs(rho(0, 0).real(), rho(1, 1).real());
}

GradientBuffer DensityModel::make_buffer() const { return {zero_gradients(net_), {}}; }

UnitaryGradients DensityModel::to_unitary(const GradientBuffer& buffer) const { return buffer.complex; }

double DensityModel::accumulate(const RVector& features, int label, GradientBuffer& buffer) const {
  if (label < 0 || label > 1) config_error("label must be 0 or 1");
  const auto& topo = net_.topology();
  const auto& plan = net_.plan();
  Tape tape;
  const CMatrix out = run_density(net_, features, &tape);
  const double prob = out(label, label).real();
  const double loss = -std::log(std::max(prob, kProbFloor));

  std::vector<CMatrix> g(static_cast<std::size_t>(plan.slots));
  for (std::size_t i = plan.steps.size(); i-- > 0;) {
    const auto& step = plan.steps[i];
    CMatrix& gs = g[static_cast<std::size_t>(step.slot)];
    switch (step.kind) {
      case StepKind::readout:
        gs = CMatrix::Zero(2, 2);
        if (prob > kProbFloor) gs(label, label) = -1.0 / prob;
        break;
      case StepKind::dephase:
        dephase_trailing(gs, step.count, topo.p);
        break;
      case StepKind::trace:
        gs = embed_trailing(gs, step.count);
        break;
      case StepKind::apply: {
        const CMatrix& u = net_.unitary(step.node);
        const CMatrix& y = tape.first[i];
        const Index du = u.rows();
        CMatrix& gu = buffer.complex[static_cast<std::size_t>(step.node)];
        for (Index r = 0; r < gs.rows() / du; ++r)
          gu.noalias() += 2.0 * gs.middleRows(r * du, du) * y.middleCols(r * du, du);
        conjugate_trailing(u.adjoint(), gs);
        break;
      }
      case StepKind::permute:
        gs = permute_qubits(gs, inverse_order(step.order));
        break;
      case StepKind::merge: {
        CMatrix& go = g[static_cast<std::size_t>(step.other)];
        if (step.grad_other) go = kron_grad_second(gs, tape.first[i]);
        if (step.grad_slot) gs = kron_grad_first(gs, tape.second[i]);
        else gs = CMatrix();
        break;
      }
      case StepKind::load_data:
      case StepKind::load_ancilla:
        break;
    }
  }
  return loss;
}

Prediction forward(const Network& net, const RVector& features) { return DensityModel(net).predict(features); }

// ---------------------------------------------------------------------------
// Checkpoints

namespace {
constexpr char kCheckpointMagic[8] = {'D', 'T', 'N', 'C', 'K', 'P', 'T', '1'};
}

void write_checkpoint(const std::filesystem::path& path, const Network& net) {
  using detail::put_le;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::data, "cannot write checkpoint " + path.string());
  const auto& t = net.topology();
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.kind));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.m));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.k));
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.scheme));
  put_le<double>(out, t.p);
  put_le<std::uint8_t>(out, t.dephase_data_layer ? 1 : 0);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.node_count()));
  for (const auto& h : net.params())
    for (Index i = 0; i < h.size(); ++i) put_le<double>(out, h.packed()(i));
  if (!out) throw Error(ErrorKind::data, "write failed for " + path.string());
}

Network read_checkpoint(const std::filesystem::path& path) {
  using detail::get_le;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::data, "cannot open checkpoint " + path.string());
  char magic[sizeof kCheckpointMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw Error(ErrorKind::data, "bad checkpoint magic in " + path.string());
  const auto kind = get_le<std::uint8_t>(in, path);
  const auto m = get_le<std::uint32_t>(in, path);
  const auto k = get_le<std::uint32_t>(in, path);
  const auto scheme = get_le<std::uint8_t>(in, path);
  const auto p = get_le<double>(in, path);
  const auto dephase_data = get_le<std::uint8_t>(in, path);
  const auto nodes = get_le<std::uint32_t>(in, path);
  if (kind > 1 || scheme > 1 || m > 4096 || k > 16) throw Error(ErrorKind::data, "corrupt checkpoint header in " + path.string());

  NetworkTopology topo = build_network(static_cast<ModelKind>(kind), static_cast<int>(m), static_cast<int>(k),
                                       static_cast<AncillaScheme>(scheme));
  topo.p = p;
  topo.dephase_data_layer = dephase_data != 0;
  Network net(std::move(topo));
  if (static_cast<int>(nodes) != net.node_count()) throw Error(ErrorKind::data, "checkpoint node count mismatch");
  std::vector<HermitianParam> params;
  for (const auto& node : net.topology().nodes) {
    RVector packed(node.dim() * node.dim());
    for (Index i = 0; i < packed.size(); ++i) packed(i) = get_le<double>(in, path);
    params.emplace_back(node.dim(), std::move(packed));
  }
  net.set_params(std::move(params));
  return net;
}

}  // namespace dtn
