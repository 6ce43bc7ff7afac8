#include "dtn/dephased.hpp"

#include "dtn/dataset.hpp"

#include <cmath>
#include <numbers>
#include <functional>
#include <random>

namespace dtn {

double StochasticNode::column_sum_error() const {
  if (matrix.size() == 0) return 0.0;
  return (matrix.colwise().sum().array() - 1.0).abs().maxCoeff();
}

RMatrix to_unitary_stochastic(const UnitaryMatrix& u) {
  if (!is_unitary(u.matrix(), 1e-10)) config_error("to_unitary_stochastic: input is not unitary");
  return u.matrix().cwiseAbs2();
}

StochasticNode to_singly_stochastic(const UnitaryMatrix& u, std::span<const int> traced_qubits) {
  const RMatrix m = to_unitary_stochastic(u);
  const int n = u.qubits();
  std::vector<bool> traced(static_cast<std::size_t>(n), false);
  for (int q : traced_qubits) {
    if (q < 0 || q >= n || traced[q]) config_error("invalid traced qubit set");
    traced[q] = true;
  }
  const int kept = n - static_cast<int>(traced_qubits.size());
  if (kept < 1) config_error("singly stochastic reduction needs at least one kept qubit");
  StochasticNode out;
  out.matrix = RMatrix::Zero(Index{1} << kept, m.cols());
  for (Index i = 0; i < m.rows(); ++i) {
    Index b = 0;
    for (int q = 0; q < n; ++q)
      if (!traced[q]) b = (b << 1) | ((i >> (n - 1 - q)) & 1);
    out.matrix.row(b) += m.row(i);
  }
  return out;
}

// ---------------------------------------------------------------------------

BayesModel::BayesModel(const Network& net) : net_(net) {
  const auto& nodes = net.topology().nodes;
  m_.reserve(nodes.size());
  s_.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    m_.push_back(net.unitary(static_cast<int>(i)).cwiseAbs2());
    const int traced = static_cast<int>(nodes[i].traced.size());
    if (traced == 0) {
      s_.emplace_back();
      continue;
    }
    // Traced outputs are the least significant qubits: sum row blocks.
    const Index dt = Index{1} << traced;
    const Index dk = m_.back().rows() / dt;
    RMatrix s = RMatrix::Zero(dk, m_.back().cols());
    for (Index b = 0; b < dk; ++b) s.row(b) = m_.back().middleRows(b * dt, dt).colwise().sum();
    s_.push_back(std::move(s));
  }
}

namespace {

RVector data_probs(double x) {
  const Eigen::Vector2d f = encode_feature(x);
  return f.cwiseAbs2();
}

// y = (I (x) a) x for `a` acting on the trailing qubits of x (rectangular allowed).
RVector apply_trailing(const RMatrix& a, const RVector& x) {
  const Index cols = x.size() / a.cols();
  Eigen::Map<const RMatrix> view(x.data(), a.cols(), cols);
  RVector y(a.rows() * cols);
  Eigen::Map<RMatrix>(y.data(), a.rows(), cols).noalias() = a * view;
  return y;
}

RVector apply_trailing_transpose(const RMatrix& a, const RVector& g) {
  const Index cols = g.size() / a.rows();
  Eigen::Map<const RMatrix> view(g.data(), a.rows(), cols);
  RVector out(a.cols() * cols);
  Eigen::Map<RMatrix>(out.data(), a.cols(), cols).noalias() = a.transpose() * view;
  return out;
}

std::vector<int> inverse(const std::vector<int>& order) {
  std::vector<int> inv(order.size());
  for (std::size_t q = 0; q < order.size(); ++q) inv[static_cast<std::size_t>(order[q])] = static_cast<int>(q);
  return inv;
}

struct BayesTape {
  std::vector<RVector> first, second;
};

bool fused_trace(const EvaluationPlan& plan, std::size_t i) {
  return i + 1 < plan.steps.size() && plan.steps[i + 1].kind == StepKind::trace && plan.steps[i + 1].slot == plan.steps[i].slot;
}

}  // namespace

ProbVector BayesModel::readout(const RVector& x) const {
  const auto& topo = net_.topology();
  const auto& plan = net_.plan();
  if (x.size() != topo.m) config_error("sample has wrong feature count");
  std::vector<RVector> reg(static_cast<std::size_t>(plan.slots));
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    const auto& step = plan.steps[i];
    RVector& v = reg[static_cast<std::size_t>(step.slot)];
    switch (step.kind) {
      case StepKind::load_data: v = data_probs(x(step.feature)); break;
      case StepKind::load_ancilla: v = RVector::Unit(2, 0); break;
      case StepKind::merge: {
        RVector& o = reg[static_cast<std::size_t>(step.other)];
        v = kron(v, o);
        o = RVector();
        break;
      }
      case StepKind::permute: v = permute_qubits(v, step.order); break;
      case StepKind::apply:
        if (fused_trace(plan, i)) {
          v = apply_trailing(s_[static_cast<std::size_t>(step.node)], v);
          ++i;
        } else {
          v = apply_trailing(m_[static_cast<std::size_t>(step.node)], v);
        }
        break;
      case StepKind::trace: {
        const Index dt = Index{1} << step.count;
        v = Eigen::Map<const RMatrix>(v.data(), dt, v.size() / dt).colwise().sum().transpose();
        break;
      }
      case StepKind::dephase:
      case StepKind::readout:
        break;
    }
  }
  return {reg[static_cast<std::size_t>(plan.readout_slot)]};
}

Prediction BayesModel::predict(const RVector& features) const {
  const RVector p = readout(features).entries;
  return Prediction::from_probs(p(0), p(1));
}

// The buffer holds dL/dS for tree nodes (dL/dM for entanglers); the chain rule
// through |U|^2 is applied once per batch in to_unitary.
GradientBuffer BayesModel::make_buffer() const {
  GradientBuffer out;
  out.real.reserve(m_.size());
  for (std::size_t i = 0; i < m_.size(); ++i) {
    const RMatrix& a = s_[i].size() ? s_[i] : m_[i];
    out.real.push_back(RMatrix::Zero(a.rows(), a.cols()));
  }
  return out;
}

UnitaryGradients BayesModel::to_unitary(const GradientBuffer& buffer) const {
  UnitaryGradients out;
  out.reserve(m_.size());
  for (std::size_t i = 0; i < m_.size(); ++i) {
    const RMatrix& ga = buffer.real[i];
    RMatrix gm(m_[i].rows(), m_[i].cols());
    const Index dt = m_[i].rows() / ga.rows();
    for (Index b = 0; b < ga.rows(); ++b) gm.middleRows(b * dt, dt).rowwise() = ga.row(b);
    out.push_back(2.0 * gm.cast<Complex>().cwiseProduct(net_.unitary(static_cast<int>(i))));
  }
  return out;
}

double BayesModel::accumulate(const RVector& x, int label, GradientBuffer& buffer) const {
  if (label < 0 || label > 1) config_error("label must be 0 or 1");
  const auto& topo = net_.topology();
  const auto& plan = net_.plan();
  if (x.size() != topo.m) config_error("sample has wrong feature count");
  BayesTape tape;
  tape.first.resize(plan.steps.size());
  tape.second.resize(plan.steps.size());
  std::vector<RVector> reg(static_cast<std::size_t>(plan.slots));
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    const auto& step = plan.steps[i];
    RVector& v = reg[static_cast<std::size_t>(step.slot)];
    switch (step.kind) {
      case StepKind::load_data: v = data_probs(x(step.feature)); break;
      case StepKind::load_ancilla: v = RVector::Unit(2, 0); break;
      case StepKind::merge: {
        RVector& o = reg[static_cast<std::size_t>(step.other)];
        RVector merged = kron(v, o);
        tape.first[i] = std::move(v);
        tape.second[i] = std::move(o);
        v = std::move(merged);
        o = RVector();
        break;
      }
      case StepKind::permute: v = permute_qubits(v, step.order); break;
      case StepKind::apply: {
        tape.first[i] = v;
        const auto& a = fused_trace(plan, i) ? s_[static_cast<std::size_t>(step.node)] : m_[static_cast<std::size_t>(step.node)];
        v = apply_trailing(a, v);
        if (fused_trace(plan, i)) ++i;
        break;
      }
      case StepKind::trace: {
        const Index dt = Index{1} << step.count;
        v = Eigen::Map<const RMatrix>(v.data(), dt, v.size() / dt).colwise().sum().transpose();
        break;
      }
      case StepKind::dephase:
      case StepKind::readout:
        break;
    }
  }
  const RVector& out = reg[static_cast<std::size_t>(plan.readout_slot)];
  const double prob = out(label);
  const double loss = -std::log(std::max(prob, kProbFloor));

  std::vector<RVector> g(static_cast<std::size_t>(plan.slots));
  for (std::size_t i = plan.steps.size(); i-- > 0;) {
    const auto& step = plan.steps[i];
    RVector& gs = g[static_cast<std::size_t>(step.slot)];
    switch (step.kind) {
      case StepKind::readout:
        gs = RVector::Zero(2);
        if (prob > kProbFloor) gs(label) = -1.0 / prob;
        break;
      case StepKind::trace: {
        // A trace fused into the preceding apply is handled there.
        if (i > 0 && plan.steps[i - 1].kind == StepKind::apply && plan.steps[i - 1].slot == step.slot) break;
        const Index dt = Index{1} << step.count;
        RVector up(gs.size() * dt);
        for (Index c = 0; c < gs.size(); ++c) up.segment(c * dt, dt).setConstant(gs(c));
        gs = std::move(up);
        break;
      }
      case StepKind::apply: {
        const auto node = static_cast<std::size_t>(step.node);
        const bool fused = fused_trace(plan, i);
        const RMatrix& a = fused ? s_[node] : m_[node];
        const RVector& xin = tape.first[i];
        const Index cols = xin.size() / a.cols();
        Eigen::Map<const RMatrix> xv(xin.data(), a.cols(), cols);
        Eigen::Map<const RMatrix> gv(gs.data(), a.rows(), cols);
        buffer.real[node].noalias() += gv * xv.transpose();
        gs = apply_trailing_transpose(a, gs);
        break;
      }
      case StepKind::permute: gs = permute_qubits(gs, inverse(step.order)); break;
      case StepKind::merge: {
        const RVector& a = tape.first[i];
        const RVector& b = tape.second[i];
        Eigen::Map<const RMatrix> gm(gs.data(), b.size(), a.size());  // (j, i) = g_{i*db + j}
        if (step.grad_other) g[static_cast<std::size_t>(step.other)] = gm * a;
        if (step.grad_slot) gs = gm.transpose() * b;
        else gs = RVector();
        break;
      }
      case StepKind::dephase:
      case StepKind::load_data:
      case StepKind::load_ancilla:
        break;
    }
  }
  return loss;
}

Prediction bayes_forward(const Network& net, const RVector& features) { return BayesModel(net).predict(features); }

// ---------------------------------------------------------------------------

namespace {

CMatrix permutation_unitary(int qubits, const std::function<Index(Index)>& map) {
  const Index dim = Index{1} << qubits;
  CMatrix u = CMatrix::Zero(dim, dim);
  for (Index j = 0; j < dim; ++j) u(map(j), j) = 1.0;
  return u;
}

CMatrix haar_unitary(Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  CMatrix z(dim, dim);
  for (Index j = 0; j < dim; ++j)
    for (Index i = 0; i < dim; ++i) z(i, j) = Complex(normal(rng), normal(rng));
  Eigen::HouseholderQR<CMatrix> qr(z);
  CMatrix q = qr.householderQ();
  const CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index i = 0; i < dim; ++i) q.col(i) *= std::polar(1.0, std::arg(r(i, i)));
  return q;
}

}  // namespace

StinespringReport stinespring_witness(int grid, long random_samples, std::uint64_t seed) {
  StinespringReport rep;
  rep.target = RMatrix::Zero(2, 4);
  rep.target.row(0).setOnes();
  rep.reset_target = RMatrix::Zero(2, 2);
  rep.reset_target.row(0).setOnes();

  // One qubit, no ancilla: M = |U|^2 has unit row sums, so some input reaches |1>
  // with probability >= 1/2. Scan U(2) up to global phase.
  double best = 1.0;
  for (int a = 0; a <= grid; ++a) {
    const double theta = 0.5 * std::numbers::pi * a / grid;
    for (int b = 0; b < grid; ++b)
      for (int c = 0; c < grid; ++c) {
        const double beta = 2 * std::numbers::pi * b / grid, gamma = 2 * std::numbers::pi * c / grid;
        CMatrix u(2, 2);
        u << std::polar(std::cos(theta), beta), std::polar(std::sin(theta), gamma),
            -std::polar(std::sin(theta), -gamma), std::polar(std::cos(theta), -beta);
        const RMatrix m = u.cwiseAbs2();
        best = std::min(best, m.row(1).maxCoeff());
        ++rep.one_qubit_grid_points;
      }
  }
  rep.one_qubit_min_residual = best;

  // Two data qubits, no ancilla, one output kept.
  std::mt19937_64 rng(seed);
  const int traced_one[] = {1};
  best = 1.0;
  for (long s = 0; s < random_samples; ++s) {
    const auto sn = to_singly_stochastic(UnitaryMatrix::unchecked(haar_unitary(4, rng)), traced_one);
    best = std::min(best, sn.matrix.row(1).maxCoeff());
  }
  rep.no_ancilla_samples = random_samples;
  rep.no_ancilla_min_residual = best;

  // Data qubit + ancilla |0>: SWAP moves the ancilla's |0> onto the kept wire.
  const CMatrix swap = permutation_unitary(2, [](Index j) { return ((j & 1) << 1) | (j >> 1); });
  const auto reset = to_singly_stochastic(UnitaryMatrix(swap), traced_one);
  rep.reset_realized.resize(2, 2);
  rep.reset_realized << reset.matrix.col(0), reset.matrix.col(2);  // ancilla = 0 columns
  rep.reset_error = (rep.reset_realized - rep.reset_target).cwiseAbs().maxCoeff();

  // Two data qubits + ancilla |0>: |x y a> -> |a x y>, keep the first qubit.
  const CMatrix cycle = permutation_unitary(3, [](Index j) { return ((j & 1) << 2) | (j >> 1); });
  const int traced_two[] = {1, 2};
  const auto full = to_singly_stochastic(UnitaryMatrix(cycle), traced_two);
  rep.realized.resize(2, 4);
  for (Index xy = 0; xy < 4; ++xy) rep.realized.col(xy) = full.matrix.col(xy << 1);
  rep.realized_error = (rep.realized - rep.target).cwiseAbs().maxCoeff();
  return rep;
}

}  // namespace dtn
