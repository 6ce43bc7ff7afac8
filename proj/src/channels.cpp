#include "dtn/channels.hpp"

#include <bit>
#include <cmath>

namespace dtn {

void check_rate(double p) {
  if (!(p >= 0.0 && p <= 1.0)) config_error("dephasing rate must lie in [0, 1]");
}

DephasingChannel::DephasingChannel(double rate, int qubit_count) : p(rate), qubits(qubit_count) {
  check_rate(p);
  if (qubits < 1) config_error("dephasing channel needs at least one qubit");
}

CMatrix DephasingChannel::pauli_z() {
  CMatrix z = CMatrix::Zero(2, 2);
  z(0, 0) = 1.0;
  z(1, 1) = -1.0;
  return z;
}

std::vector<CMatrix> DephasingChannel::single_qubit_kraus() const {
  return {std::sqrt(1.0 - 0.5 * p) * CMatrix::Identity(2, 2), std::sqrt(0.5 * p) * pauli_z()};
}

std::vector<CMatrix> DephasingChannel::kraus_operators() const {
  const auto single = single_qubit_kraus();
  std::vector<CMatrix> ops{CMatrix::Identity(1, 1)};
  for (int q = 0; q < qubits; ++q) {
    std::vector<CMatrix> next;
    next.reserve(ops.size() * 2);
    for (const auto& k : ops)
      for (const auto& s : single) next.push_back(kron(k, s));
    ops = std::move(next);
  }
  return ops;
}

CMatrix DephasingChannel::completeness() const {
  const Index dim = Index{1} << qubits;
  CMatrix sum = CMatrix::Zero(dim, dim);
  for (const auto& k : kraus_operators()) sum += k.adjoint() * k;
  return sum;
}

DensityMatrix dephase_single(const DensityMatrix& rho, double p) {
  check_rate(p);
  if (rho.dim() != 2) config_error("dephase_single expects a single qubit");
  CMatrix out = rho.matrix();
  out(0, 1) *= 1.0 - p;
  out(1, 0) *= 1.0 - p;
  return DensityMatrix::unchecked(std::move(out));
}

void dephase_trailing(CMatrix& rho, int count, double p) {
  if (p == 0.0 || count == 0) return;
  const Index mask = (Index{1} << count) - 1;
  std::vector<double> damping(static_cast<std::size_t>(count) + 1);
  for (int h = 0; h <= count; ++h) damping[h] = std::pow(1.0 - p, h);
  const Index dim = rho.rows();
  for (Index j = 0; j < dim; ++j)
    for (Index i = 0; i < dim; ++i) {
      const int h = std::popcount(static_cast<std::uint64_t>((i ^ j) & mask));
      if (h != 0) rho(i, j) *= damping[h];
    }
}

DensityMatrix dephase_local(const DensityMatrix& rho, double p) {
  check_rate(p);
  CMatrix out = rho.matrix();
  dephase_trailing(out, rho.qubits(), p);
  return DensityMatrix::unchecked(std::move(out));
}

DensityMatrix full_dephase(const DensityMatrix& rho) {
  CMatrix out = CMatrix::Zero(rho.dim(), rho.dim());
  out.diagonal() = rho.matrix().diagonal();
  return DensityMatrix::unchecked(std::move(out));
}

DensityMatrix dephase_kraus_sum(const DensityMatrix& rho, double p) {
  DephasingChannel channel(p, rho.qubits());
  CMatrix out = CMatrix::Zero(rho.dim(), rho.dim());
  for (const auto& k : channel.kraus_operators()) out += k * rho.matrix() * k.adjoint();
  return DensityMatrix::unchecked(std::move(out));
}

}  // namespace dtn
