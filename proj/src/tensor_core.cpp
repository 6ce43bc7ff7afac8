#include "dtn/tensor_core.hpp"

#include <cmath>
#include <string>

namespace dtn {

int qubit_count(Index dim) {
  if (!is_power_of_two(dim)) config_error("dimension " + std::to_string(dim) + " is not a power of two");
  int n = 0;
  while ((Index{1} << n) < dim) ++n;
  return n;
}

void apply_left_trailing(const CMatrix& u, CMatrix& x) {
  const Index du = u.rows();
  if (x.rows() % du != 0) config_error("unitary does not divide register dimension");
  Eigen::Map<CMatrix> view(x.data(), du, x.size() / du);
  view = u * view;
}

void conjugate_trailing(const CMatrix& u, CMatrix& rho) {
  apply_left_trailing(u, rho);
  CMatrix y = rho.adjoint();
  apply_left_trailing(u, y);
  rho = hermitian_part(y);
}

CMatrix trace_trailing(const CMatrix& rho, int count) {
  const Index da = Index{1} << count;
  const Index db = rho.rows() / da;
  CMatrix out = CMatrix::Zero(db, db);
  for (Index bc = 0; bc < db; ++bc)
    for (Index a = 0; a < da; ++a)
      for (Index br = 0; br < db; ++br) out(br, bc) += rho(br * da + a, bc * da + a);
  return out;
}

CMatrix embed_trailing(const CMatrix& g, int count) {
  const Index da = Index{1} << count;
  const Index db = g.rows();
  CMatrix out = CMatrix::Zero(db * da, db * da);
  for (Index bc = 0; bc < db; ++bc)
    for (Index a = 0; a < da; ++a)
      for (Index br = 0; br < db; ++br) out(br * da + a, bc * da + a) = g(br, bc);
  return out;
}

namespace {

// Basis index of the full register given the kept-qubit index `kept` and the
// traced-qubit index `traced`, each enumerated most-significant-first.
struct SplitIndexer {
  int n;
  std::vector<int> kept_bits, traced_bits;  // bit positions, most significant first

  SplitIndexer(int qubits, std::span<const int> traced) : n(qubits) {
    std::vector<bool> is_traced(static_cast<std::size_t>(qubits), false);
    for (int q : traced) {
      if (q < 0 || q >= qubits) config_error("traced qubit index out of range");
      if (is_traced[q]) config_error("traced qubit listed twice");
      is_traced[q] = true;
    }
    for (int q = 0; q < qubits; ++q) (is_traced[q] ? traced_bits : kept_bits).push_back(qubits - 1 - q);
  }

  static Index scatter(Index value, const std::vector<int>& bits) {
    Index out = 0;
    const int w = static_cast<int>(bits.size());
    for (int i = 0; i < w; ++i)
      if ((value >> (w - 1 - i)) & 1) out |= Index{1} << bits[i];
    return out;
  }
};

std::vector<Index> permutation_map(int n, std::span<const int> order) {
  if (static_cast<int>(order.size()) != n) config_error("permutation length does not match qubit count");
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (int q : order) {
    if (q < 0 || q >= n || seen[q]) config_error("invalid qubit permutation");
    seen[q] = true;
  }
  const Index dim = Index{1} << n;
  std::vector<Index> map(static_cast<std::size_t>(dim));
  for (Index x = 0; x < dim; ++x) {
    Index y = 0;
    for (int q = 0; q < n; ++q)
      if ((x >> (n - 1 - q)) & 1) y |= Index{1} << (n - 1 - order[q]);
    map[x] = y;
  }
  return map;
}

}  // namespace

CMatrix partial_trace(const CMatrix& rho, std::span<const int> traced_qubits) {
  const int n = qubit_count(rho.rows());
  SplitIndexer idx(n, traced_qubits);
  if (idx.kept_bits.empty()) config_error("partial trace would leave no qubits");
  const Index dk = Index{1} << idx.kept_bits.size();
  const Index dt = Index{1} << idx.traced_bits.size();
  std::vector<Index> kept(dk), traced(dt);
  for (Index i = 0; i < dk; ++i) kept[i] = SplitIndexer::scatter(i, idx.kept_bits);
  for (Index t = 0; t < dt; ++t) traced[t] = SplitIndexer::scatter(t, idx.traced_bits);
  CMatrix out = CMatrix::Zero(dk, dk);
  for (Index j = 0; j < dk; ++j)
    for (Index i = 0; i < dk; ++i) {
      Complex s = 0;
      for (Index t = 0; t < dt; ++t) s += rho(kept[i] | traced[t], kept[j] | traced[t]);
      out(i, j) = s;
    }
  return out;
}

CMatrix permute_qubits(const CMatrix& rho, std::span<const int> order) {
  const auto map = permutation_map(qubit_count(rho.rows()), order);
  const Index dim = rho.rows();
  CMatrix out(dim, dim);
  for (Index j = 0; j < dim; ++j)
    for (Index i = 0; i < dim; ++i) out(i, j) = rho(map[i], map[j]);
  return out;
}

CVector permute_qubits(const CVector& psi, std::span<const int> order) {
  const auto map = permutation_map(qubit_count(psi.size()), order);
  CVector out(psi.size());
  for (Index i = 0; i < psi.size(); ++i) out(i) = psi(map[i]);
  return out;
}

RVector permute_qubits(const RVector& probs, std::span<const int> order) {
  const auto map = permutation_map(qubit_count(probs.size()), order);
  RVector out(probs.size());
  for (Index i = 0; i < probs.size(); ++i) out(i) = probs(map[i]);
  return out;
}

CMatrix hermitian_part(const CMatrix& x) { return 0.5 * (x + x.adjoint()); }

double max_abs(const CMatrix& x) { return x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff(); }

// ---------------------------------------------------------------------------

DensityMatrix::DensityMatrix(CMatrix rho, double tol) : rho_(std::move(rho)) {
  if (rho_.rows() != rho_.cols()) config_error("density matrix must be square");
  qubit_count(rho_.rows());
  if (!rho_.allFinite()) numerical_error("density matrix has non-finite entries");
  if (!is_hermitian(rho_, tol)) config_error("density matrix is not Hermitian");
  if (std::abs(rho_.trace() - Complex(1.0)) > tol) config_error("density matrix trace is not 1");
}

DensityMatrix DensityMatrix::unchecked(CMatrix rho) {
  DensityMatrix out;
  out.rho_ = std::move(rho);
  return out;
}

DensityMatrix DensityMatrix::pure(const CVector& psi) { return DensityMatrix(psi * psi.adjoint() / psi.squaredNorm()); }

bool DensityMatrix::is_positive(double tol) const {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(rho_, Eigen::EigenvaluesOnly);
  return es.info() == Eigen::Success && es.eigenvalues().minCoeff() >= -tol;
}

UnitaryMatrix::UnitaryMatrix(CMatrix u, double tol) : u_(std::move(u)) {
  if (u_.rows() != u_.cols()) config_error("unitary must be square");
  if (!u_.allFinite()) numerical_error("unitary has non-finite entries");
  if (!is_unitary(u_, tol)) config_error("matrix is not unitary");
}

UnitaryMatrix UnitaryMatrix::unchecked(CMatrix u) {
  UnitaryMatrix out;
  out.u_ = std::move(u);
  return out;
}

UnitaryMatrix UnitaryMatrix::identity(Index dim) { return unchecked(CMatrix::Identity(dim, dim)); }

HermitianParam::HermitianParam(Index dim, RVector packed) : dim_(dim), packed_(std::move(packed)) {
  if (packed_.size() != dim * dim) config_error("packed Hermitian parameter has wrong length");
}

HermitianParam HermitianParam::from_matrix(const CMatrix& h) {
  const Index n = h.rows();
  HermitianParam out(n);
  const CMatrix hh = hermitian_part(h);
  Index k = 0;
  for (Index a = 0; a < n; ++a) out.packed_(k++) = hh(a, a).real();
  for (Index a = 0; a < n; ++a)
    for (Index b = a + 1; b < n; ++b) {
      out.packed_(k++) = hh(a, b).real();
      out.packed_(k++) = hh(a, b).imag();
    }
  return out;
}

CMatrix HermitianParam::matrix() const {
  CMatrix h(dim_, dim_);
  Index k = 0;
  for (Index a = 0; a < dim_; ++a) h(a, a) = packed_(k++);
  for (Index a = 0; a < dim_; ++a)
    for (Index b = a + 1; b < dim_; ++b) {
      const Complex z(packed_(k), packed_(k + 1));
      k += 2;
      h(a, b) = z;
      h(b, a) = std::conj(z);
    }
  return h;
}

RVector HermitianParam::pack_gradient(const CMatrix& g) {
  const Index n = g.rows();
  RVector out(n * n);
  Index k = 0;
  for (Index a = 0; a < n; ++a) out(k++) = g(a, a).real();
  for (Index a = 0; a < n; ++a)
    for (Index b = a + 1; b < n; ++b) {
      const Complex z = 0.5 * (g(a, b) + std::conj(g(b, a)));
      out(k++) = 2.0 * z.real();
      out(k++) = 2.0 * z.imag();
    }
  return out;
}

HermitianExp::HermitianExp(const CMatrix& h) {
  if (!h.allFinite()) numerical_error("Hermitian generator has non-finite entries");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  if (es.info() != Eigen::Success) numerical_error("eigensolver failed on Hermitian generator");
  v_ = es.eigenvectors();
  lambda_ = es.eigenvalues();
  const Index n = h.rows();
  CVector phase(n);
  for (Index a = 0; a < n; ++a) phase(a) = std::exp(kI * lambda_(a));
  u_ = v_ * phase.asDiagonal() * v_.adjoint();
  // (e^{ix} - e^{iy}) / (i(x - y)) = e^{i(x+y)/2} sin((x-y)/2) / ((x-y)/2)
  phi_.resize(n, n);
  for (Index b = 0; b < n; ++b)
    for (Index a = 0; a < n; ++a) {
      const double d = lambda_(a) - lambda_(b);
      if (std::abs(d) < 1e-12) {
        phi_(a, b) = phase(a);
      } else {
        const double half = 0.5 * d;
        phi_(a, b) = std::exp(kI * (0.5 * (lambda_(a) + lambda_(b)))) * (std::sin(half) / half);
      }
    }
}

CMatrix HermitianExp::directional(const CMatrix& direction) const {
  const CMatrix e = v_.adjoint() * direction * v_;
  return v_ * (kI * e.cwiseProduct(phi_)) * v_.adjoint();
}

CMatrix HermitianExp::pullback(const CMatrix& grad_u) const {
  const CMatrix g = v_.adjoint() * grad_u * v_;
  const CMatrix x = (-kI * phi_.conjugate()).cwiseProduct(g);
  return hermitian_part(v_ * x * v_.adjoint());
}

// ---------------------------------------------------------------------------

DensityMatrix apply_unitary(const DensityMatrix& rho, const UnitaryMatrix& u) {
  if (rho.dim() != u.dim()) config_error("apply_unitary: dimension mismatch");
  CMatrix out = rho.matrix();
  conjugate_trailing(u.matrix(), out);
  return DensityMatrix::unchecked(std::move(out));
}

DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const int> traced_qubits) {
  return DensityMatrix::unchecked(partial_trace(rho.matrix(), traced_qubits));
}

UnitaryMatrix hermitian_expm(const HermitianParam& h) { return UnitaryMatrix::unchecked(HermitianExp(h).unitary()); }

CMatrix expm_grad(const HermitianParam& h, const CMatrix& direction) {
  if (direction.rows() != h.dim() || direction.cols() != h.dim()) config_error("expm_grad: dimension mismatch");
  if (!is_hermitian(direction, 1e-12 * std::max(1.0, max_abs(direction))))
    config_error("expm_grad: direction is not Hermitian");
  return HermitianExp(h).directional(direction);
}

double purity(const DensityMatrix& rho) { return rho.matrix().squaredNorm(); }

}  // namespace dtn
