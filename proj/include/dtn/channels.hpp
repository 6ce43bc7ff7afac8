#pragma once

// Local dephasing in the computational basis.

#include <vector>

#include "dtn/tensor_core.hpp"

namespace dtn {

/// Dephasing at rate p applied independently to each of `qubits` qubits.
/// Single-qubit Kraus pair: K0 = sqrt(1 - p/2) I, K1 = sqrt(p/2) Z.
struct DephasingChannel {
  double p = 0.0;
  int qubits = 1;

  DephasingChannel(double rate, int qubit_count);

  static CMatrix pauli_z();
  /// The two single-qubit Kraus operators {K0, K1}.
  std::vector<CMatrix> single_qubit_kraus() const;
  /// All 2^qubits tensor products K_{i1} (x) ... (x) K_{im}.
  std::vector<CMatrix> kraus_operators() const;
  /// sum_i K_i^dagger K_i (identity for a valid channel).
  CMatrix completeness() const;
};

void check_rate(double p);

/// Off-diagonals of a single qubit multiplied by (1 - p).
DensityMatrix dephase_single(const DensityMatrix& rho, double p);

/// Entry (i, j) multiplied by (1 - p)^hamming(i, j).
DensityMatrix dephase_local(const DensityMatrix& rho, double p);

/// Diagonal part only (the p = 1 channel).
DensityMatrix full_dephase(const DensityMatrix& rho);

/// Reference evaluation as an explicit Kraus sum over all 2^m products.
DensityMatrix dephase_kraus_sum(const DensityMatrix& rho, double p);

/// In-place Hamming damping restricted to the `count` trailing qubits. Self-adjoint,
/// so the same call transports gradients backwards.
void dephase_trailing(CMatrix& rho, int count, double p);

}  // namespace dtn
