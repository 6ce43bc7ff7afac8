#pragma once

// Regression structure of a dephased node: each output diagonal entry
// rho'_ii is linear in every input entry rho_jk, with coefficient
// U_ij conj(U_ik) (1 - p)^hamming(j, k).

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtn/network.hpp"

namespace dtn {

int hamming(Index a, Index b);

struct RegressorTerm {
  Index j = 0, k = 0;  // input entry rho_jk
  Complex coefficient;
  int exponent = 0;  // power of (1 - p)
};

struct RegressorReport {
  int qubits = 0;
  double p = 0;
  /// rows[i] lists all dim^2 input entries for output diagonal i, (j, k) row-major.
  std::vector<std::vector<RegressorTerm>> rows;

  const RegressorTerm& term(Index i, Index j, Index k) const;
  /// rho'_ii = sum_{jk} coefficient * rho_jk.
  RVector reconstruct(const CMatrix& rho) const;
  nlohmann::json to_json() const;
  /// One line per (i, j, k) with |coefficient| above `hide_below`.
  std::string table(double hide_below = 0.0) const;
};

/// Coefficients of rho'_ii = diag(U D_p(rho) U^dagger) with D_p local dephasing of every input qubit.
RegressorReport regressor_coefficients(const UnitaryMatrix& u, double p);

/// Coefficient of rho_jk in rho'_ii, measured by pushing the matrix unit
/// E_jk through dephase-then-conjugate.
Complex pipeline_coefficient(const CMatrix& u, double p, Index i, Index j, Index k);

struct ExponentFit {
  Index i = 0, j = 0, k = 0;
  bool defined = false;  // false when the p = 0 coefficient vanishes
  int exponent = -1;     // fitted integer power of (1 - p)
  int expected = -1;     // hamming(j, k)
  double residual = 0;   // max |c(p) - c(0)(1-p)^exponent| over the fit points
  std::string status;

  nlohmann::json to_json() const;
};

inline constexpr double kFitPoints[] = {0.25, 0.5, 0.75};

/// Fits the exponent of (1 - p) for entry (j, k) of output i, from the
/// pipeline coefficient at p = 0 and kFitPoints. `i` defaults to the output
/// with the largest |c(0)|.
ExponentFit suppression_exponent_fit(const CMatrix& u, Index j, Index k, std::optional<Index> i = std::nullopt);
ExponentFit suppression_exponent_fit(const Network& net, int node, Index j, Index k, std::optional<Index> i = std::nullopt);

/// Exponent table for every (j, k) of one node.
std::vector<ExponentFit> exponent_table(const CMatrix& u);

/// Diagonal update of a data register with and without full input dephasing.
struct LambdaDemo {
  RVector input;     // lambda (diagonal of the product state)
  RVector coherent;  // diag(U rho U^dagger)
  RVector dephased;  // diag(U diag(rho) U^dagger)
  RVector lost;      // coherent - dephased
  std::vector<double> cross_terms;  // sqrt(lambda0 lambda1) per feature

  nlohmann::json to_json() const;
};

/// `features` holds one value per qubit of `u` (1 or more).
LambdaDemo lambda_update_demo(const RVector& features, const UnitaryMatrix& u);

}  // namespace dtn
