#pragma once

// The fully dephased limit. With every wire dephased, a node only ever sees
// diagonal states, so it acts on probability vectors through M = |U|^2, or
// through the column-stochastic S = sum over traced outputs of M when part of
// its output is discarded. The network becomes a feed-forward Bayesian network:
// each register holds a joint distribution, merged registers multiply, and
// every node applies a conditional probability table.

#include "dtn/network.hpp"

namespace dtn {

/// Fully dephased image of one node: rows = kept output basis, columns = input basis.
struct StochasticNode {
  RMatrix matrix;

  /// Max deviation of any column sum from 1.
  double column_sum_error() const;
};

struct ProbVector {
  RVector entries;

  int width() const { return qubit_count(entries.size()); }
  double normalization_error() const { return std::abs(entries.sum() - 1.0); }
};

/// M_ij = |U_ij|^2 (doubly stochastic). Throws on a non-unitary input.
RMatrix to_unitary_stochastic(const UnitaryMatrix& u);

/// S_{b j} = sum_a |U_{(a, b) j}|^2 where a runs over the traced output qubits
/// and b over the remaining ones (in register order).
StochasticNode to_singly_stochastic(const UnitaryMatrix& u, std::span<const int> traced_qubits);

/// Probability-vector evaluator over the same plan as DensityModel. Equal to
/// the density evaluator at p = 1 with a dephased data layer.
class BayesModel final : public Model {
 public:
  explicit BayesModel(const Network& net);
  Prediction predict(const RVector& features) const override;
  GradientBuffer make_buffer() const override;
  double accumulate(const RVector& features, int label, GradientBuffer& buffer) const override;
  UnitaryGradients to_unitary(const GradientBuffer& buffer) const override;
  /// Distribution over the readout qubit.
  ProbVector readout(const RVector& features) const;

 private:
  const Network& net_;
  std::vector<RMatrix> m_;  // |U|^2 per node
  std::vector<RMatrix> s_;  // traced-out marginal per tree node (empty for entanglers)
};

Prediction bayes_forward(const Network& net, const RVector& features);

/// Machine-checkable facts about realizing deterministic resets with and without ancillas.
struct StinespringReport {
  RMatrix target;                  // 2 x 4: every two-qubit basis input -> |0>
  RMatrix realized;                // same map from a 3-qubit permutation (one ancilla)
  double realized_error = 0;       // max |realized - target|
  RMatrix reset_target;            // 2 x 2 single-qubit reset
  RMatrix reset_realized;          // from SWAP on data + ancilla, ancilla traced
  double reset_error = 0;
  double one_qubit_min_residual = 0;  // min over a U(2) grid of max_j P(out = 1 | in = j)
  long one_qubit_grid_points = 0;
  double no_ancilla_min_residual = 0;  // same for the 2x4 target with 2-qubit unitaries, no ancilla
  long no_ancilla_samples = 0;

  bool one_qubit_infeasible(double threshold = 0.1) const { return one_qubit_min_residual > threshold; }
  bool ancilla_realizes(double tol = 1e-12) const { return realized_error <= tol && reset_error <= tol; }
};

StinespringReport stinespring_witness(int grid = 64, long random_samples = 20000, std::uint64_t seed = 7);

}  // namespace dtn
