#pragma once

// Dense complex linear algebra over qubit registers.
//
// Qubit ordering: qubit 0 is the most significant bit of a basis index, so in
// kron(a, b) the qubits of `a` come first. Every module uses this convention.

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "dtn/error.hpp"

namespace dtn {

template <typename RealScalar>
struct Types {
  using Real = RealScalar;
  using Complex = std::complex<RealScalar>;
  using Matrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;
  using RealMatrix = Eigen::Matrix<RealScalar, Eigen::Dynamic, Eigen::Dynamic>;
  using RealVector = Eigen::Matrix<RealScalar, Eigen::Dynamic, 1>;
};

using Complex = Types<double>::Complex;
using CMatrix = Types<double>::Matrix;
using CVector = Types<double>::Vector;
using RMatrix = Types<double>::RealMatrix;
using RVector = Types<double>::RealVector;
using Index = Eigen::Index;

inline constexpr Complex kI{0.0, 1.0};

/// log2 of a power-of-two dimension; throws on anything else.
int qubit_count(Index dim);

inline bool is_power_of_two(Index n) { return n > 0 && (n & (n - 1)) == 0; }

// ---------------------------------------------------------------------------
// Kronecker product

template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic> kron(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Result = Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Index br = b.rows(), bc = b.cols();
  Result out(a.rows() * br, a.cols() * bc);
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i) out.block(i * br, j * bc, br, bc) = a(i, j) * b;
  return out;
}

// ---------------------------------------------------------------------------
// Raw register kernels. These work on plain matrices and are what the network
// evaluators call in their inner loops; the typed wrappers below validate.

/// x <- (I (x) u) x, where u acts on the trailing (least significant) qubits.
void apply_left_trailing(const CMatrix& u, CMatrix& x);

/// rho <- (I (x) u) rho (I (x) u)^dagger, re-symmetrized.
void conjugate_trailing(const CMatrix& u, CMatrix& rho);

/// Partial trace over the `count` trailing qubits.
CMatrix trace_trailing(const CMatrix& rho, int count);

/// Adjoint of trace_trailing: g (x) I.
CMatrix embed_trailing(const CMatrix& g, int count);

/// Partial trace over an arbitrary qubit set (indices into the register).
CMatrix partial_trace(const CMatrix& rho, std::span<const int> traced_qubits);

/// Reorder qubits: qubit q of the result is qubit order[q] of the input.
CMatrix permute_qubits(const CMatrix& rho, std::span<const int> order);
CVector permute_qubits(const CVector& psi, std::span<const int> order);
RVector permute_qubits(const RVector& probs, std::span<const int> order);

/// (x + x^dagger) / 2
CMatrix hermitian_part(const CMatrix& x);

double max_abs(const CMatrix& x);

// ---------------------------------------------------------------------------
// Domain types

/// Hermitian, unit-trace state of a qubit register.
class DensityMatrix {
 public:
  DensityMatrix() = default;
  /// Validates dimension, Hermiticity and trace (both within `tol`).
  explicit DensityMatrix(CMatrix rho, double tol = 1e-10);
  static DensityMatrix unchecked(CMatrix rho);
  static DensityMatrix pure(const CVector& psi);

  const CMatrix& matrix() const { return rho_; }
  Index dim() const { return rho_.rows(); }
  int qubits() const { return qubit_count(rho_.rows()); }
  Complex operator()(Index i, Index j) const { return rho_(i, j); }
  Complex trace() const { return rho_.trace(); }
  RVector diagonal() const { return rho_.diagonal().real(); }

  /// Smallest eigenvalue >= -tol. Costs an eigendecomposition; test use.
  bool is_positive(double tol = 1e-9) const;

 private:
  CMatrix rho_;
};

class UnitaryMatrix {
 public:
  UnitaryMatrix() = default;
  /// Validates U^dagger U = I within `tol`.
  explicit UnitaryMatrix(CMatrix u, double tol = 1e-10);
  static UnitaryMatrix unchecked(CMatrix u);
  static UnitaryMatrix identity(Index dim);

  const CMatrix& matrix() const { return u_; }
  Index dim() const { return u_.rows(); }
  int qubits() const { return qubit_count(u_.rows()); }
  Complex operator()(Index i, Index j) const { return u_(i, j); }
  UnitaryMatrix adjoint() const { return unchecked(u_.adjoint()); }

 private:
  CMatrix u_;
};

/// Generator H of a node unitary U = exp(iH). Stored as dim^2 reals: the real
/// diagonal, then (re, im) of the strict upper triangle in row-major order.
/// Hermitian by construction.
class HermitianParam {
 public:
  HermitianParam() = default;
  explicit HermitianParam(Index dim) : dim_(dim), packed_(RVector::Zero(dim * dim)) {}
  HermitianParam(Index dim, RVector packed);
  /// Packs the Hermitian part of `h`.
  static HermitianParam from_matrix(const CMatrix& h);

  Index dim() const { return dim_; }
  Index size() const { return packed_.size(); }
  const RVector& packed() const { return packed_; }
  RVector& packed() { return packed_; }
  CMatrix matrix() const;

  /// Packs a Hermitian matrix gradient G (dL = Re tr(G^dagger dH)) into the
  /// gradient with respect to the packed real coordinates.
  static RVector pack_gradient(const CMatrix& g);

 private:
  Index dim_ = 0;
  RVector packed_;
};

/// Eigendecomposition of H reused for exp(iH), its directional derivative and
/// the adjoint of that derivative (used by backpropagation).
class HermitianExp {
 public:
  explicit HermitianExp(const CMatrix& h);
  explicit HermitianExp(const HermitianParam& h) : HermitianExp(h.matrix()) {}

  const CMatrix& unitary() const { return u_; }
  const RVector& eigenvalues() const { return lambda_; }
  const CMatrix& eigenvectors() const { return v_; }

  /// dU along a Hermitian direction (divided-difference formula).
  CMatrix directional(const CMatrix& direction) const;
  /// Given dL = Re tr(G^dagger dU), returns the Hermitian gradient w.r.t. H.
  CMatrix pullback(const CMatrix& grad_u) const;

 private:
  CMatrix v_;
  RVector lambda_;
  CMatrix u_;
  CMatrix phi_;  // phi(lambda_a, lambda_b)
};

// ---------------------------------------------------------------------------
// Operations on typed values

DensityMatrix apply_unitary(const DensityMatrix& rho, const UnitaryMatrix& u);
DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const int> traced_qubits);
UnitaryMatrix hermitian_expm(const HermitianParam& h);
CMatrix expm_grad(const HermitianParam& h, const CMatrix& direction);
double purity(const DensityMatrix& rho);

template <typename Derived>
bool is_hermitian(const Eigen::MatrixBase<Derived>& x, double tol) {
  return x.rows() == x.cols() && (x - x.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

template <typename Derived>
bool is_unitary(const Eigen::MatrixBase<Derived>& u, double tol) {
  if (u.rows() != u.cols()) return false;
  const auto eye = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>::Identity(u.rows(), u.cols());
  return (u.adjoint() * u - eye).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace dtn
