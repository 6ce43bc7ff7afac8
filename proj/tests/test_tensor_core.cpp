#include <doctest.h>

#include <bit>
#include <numbers>
#include <vector>

#include "dtn/error.hpp"
#include "dtn/tensor_core.hpp"
#include "test_util.hpp"

using namespace dtn;
using dtn::testing::random_density;
using dtn::testing::random_hermitian;
using dtn::testing::random_unitary;

namespace {

int bit(Index x, int q, int n) { return static_cast<int>((x >> (n - 1 - q)) & 1); }

// Oracle: exp(A) by scaling and squaring of a truncated Taylor series.
CMatrix taylor_expm(const CMatrix& a) {
  int s = 0;
  double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  while (norm > 0.1) norm /= 2, ++s;
  const CMatrix x = a / std::pow(2.0, s);
  CMatrix term = CMatrix::Identity(a.rows(), a.cols()), sum = term;
  for (int k = 1; k < 30; ++k) {
    term = term * x / static_cast<double>(k);
    sum += term;
  }
  for (int i = 0; i < s; ++i) sum = sum * sum;
  return sum;
}

}  // namespace

TEST_CASE("kron places the first factor on the leading qubits") {
  std::mt19937_64 rng(1);
  const CMatrix a = dtn::testing::random_complex(2, 2, rng);
  const CMatrix b = dtn::testing::random_complex(4, 4, rng);
  const CMatrix k = kron(a, b);
  REQUIRE(k.rows() == 8);
  for (Index i = 0; i < 8; ++i)
    for (Index j = 0; j < 8; ++j) {
      // vectorized and scalar complex products may round differently
      const Complex ref = a(i / 4, j / 4) * b(i % 4, j % 4);
      CHECK(std::abs(k(i, j) - ref) <= 1e-15 * std::max(1.0, std::abs(ref)));
    }
}

TEST_CASE("qubit_count rejects non powers of two") {
  CHECK(qubit_count(1) == 0);
  CHECK(qubit_count(16) == 4);
  CHECK_THROWS_AS(qubit_count(6), Error);
}

TEST_CASE("trailing-qubit kernels agree with explicit embeddings") {
  std::mt19937_64 rng(2);
  const CMatrix rho = random_density(16, rng);
  const CMatrix u = random_unitary(4, rng);
  const CMatrix full = kron(CMatrix::Identity(4, 4), u);

  CMatrix x = rho;
  apply_left_trailing(u, x);
  CHECK(max_abs(x - full * rho) < 1e-13);

  CMatrix y = rho;
  conjugate_trailing(u, y);
  CHECK(max_abs(y - full * rho * full.adjoint()) < 1e-13);

  const CMatrix t = trace_trailing(rho, 2);
  CMatrix ref = CMatrix::Zero(4, 4);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j)
      for (Index e = 0; e < 4; ++e) ref(i, j) += rho(4 * i + e, 4 * j + e);
  CHECK(max_abs(t - ref) < 1e-15);

  // embed_trailing is the adjoint of trace_trailing: <g, Tr(rho)> = <g (x) I, rho>.
  const CMatrix g = dtn::testing::random_complex(4, 4, rng);
  const Complex lhs = (g.adjoint() * t).trace();
  const Complex rhs = (embed_trailing(g, 2).adjoint() * rho).trace();
  CHECK(std::abs(lhs - rhs) < 1e-13);
}

TEST_CASE("partial trace over arbitrary qubits matches the index-sum definition") {
  std::mt19937_64 rng(3);
  const int n = 4;
  const CMatrix rho = random_density(16, rng);
  const std::vector<int> traced = {0, 2};
  const CMatrix got = partial_trace(rho, traced);
  CMatrix ref = CMatrix::Zero(4, 4);
  for (Index i = 0; i < 16; ++i)
    for (Index j = 0; j < 16; ++j) {
      if (bit(i, 0, n) != bit(j, 0, n) || bit(i, 2, n) != bit(j, 2, n)) continue;
      ref(2 * bit(i, 1, n) + bit(i, 3, n), 2 * bit(j, 1, n) + bit(j, 3, n)) += rho(i, j);
    }
  CHECK(max_abs(got - ref) < 1e-15);
  CHECK(std::abs(got.trace() - 1.0) < 1e-12);
}

TEST_CASE("permute_qubits relabels basis bits") {
  std::mt19937_64 rng(4);
  const int n = 3;
  const CMatrix rho = random_density(8, rng);
  const std::vector<int> order = {2, 0, 1};
  const CMatrix got = permute_qubits(rho, order);
  auto map = [&](Index x) {
    Index y = 0;
    for (int q = 0; q < n; ++q) y |= Index{bit(x, order[static_cast<std::size_t>(q)], n)} << (n - 1 - q);
    return y;
  };
  for (Index i = 0; i < 8; ++i)
    for (Index j = 0; j < 8; ++j) CHECK(got(map(i), map(j)) == rho(i, j));

  RVector probs = rho.diagonal().real();
  const RVector pp = permute_qubits(probs, order);
  for (Index i = 0; i < 8; ++i) CHECK(pp(map(i)) == probs(i));
}

TEST_CASE("HermitianParam packing round trip and gradient packing") {
  std::mt19937_64 rng(5);
  const CMatrix h = random_hermitian(4, rng);
  const HermitianParam p = HermitianParam::from_matrix(h);
  CHECK(p.size() == 16);
  CHECK(max_abs(p.matrix() - h) < 1e-15);
  CHECK(is_hermitian(p.matrix(), 0.0));

  // d/dtheta of Re tr(G^dagger H(theta)) equals pack_gradient(G).
  const CMatrix g = random_hermitian(4, rng);
  const RVector packed = HermitianParam::pack_gradient(g);
  for (Index i = 0; i < p.size(); ++i) {
    RVector e = RVector::Zero(p.size());
    e(i) = 1.0;
    const double dir = (g.adjoint() * HermitianParam(4, e).matrix()).trace().real();
    CHECK(std::abs(dir - packed(i)) < 1e-13);
  }
}

TEST_CASE("hermitian_expm is unitary and matches a Taylor-series oracle") {
  std::mt19937_64 rng(6);
  for (Index d : {2, 4, 8, 16}) {
    const CMatrix h = random_hermitian(d, rng);
    const UnitaryMatrix u = hermitian_expm(HermitianParam::from_matrix(h));
    CHECK(is_unitary(u.matrix(), 1e-12));
    CHECK(max_abs(u.matrix() - taylor_expm(kI * h)) < 1e-11);
  }
  CHECK(max_abs(hermitian_expm(HermitianParam(4)).matrix() - CMatrix::Identity(4, 4)) == 0.0);
}

TEST_CASE("expm_grad and HermitianExp::pullback match finite differences") {
  std::mt19937_64 rng(7);
  const CMatrix h = random_hermitian(4, rng);
  const CMatrix dir = random_hermitian(4, rng);
  const HermitianParam hp = HermitianParam::from_matrix(h);
  const double eps = 1e-6;
  const CMatrix fd = (taylor_expm(kI * (h + eps * dir)) - taylor_expm(kI * (h - eps * dir))) / (2 * eps);
  CHECK(max_abs(expm_grad(hp, dir) - fd) < 1e-8);

  // Adjoint identity: Re tr(G^dagger dU[D]) = Re tr(pullback(G)^dagger D).
  const HermitianExp ex(h);
  const CMatrix g = dtn::testing::random_complex(4, 4, rng);
  const double lhs = (g.adjoint() * ex.directional(dir)).trace().real();
  const double rhs = (ex.pullback(g).adjoint() * dir).trace().real();
  CHECK(std::abs(lhs - rhs) < 1e-12);
  CHECK(is_hermitian(ex.pullback(g), 1e-12));
}

TEST_CASE("global phase of H leaves the conjugation invariant") {
  std::mt19937_64 rng(8);
  const CMatrix h = random_hermitian(4, rng);
  const CMatrix rho = random_density(4, rng);
  const CMatrix shifted = h + 0.37 * CMatrix::Identity(4, 4);
  const DensityMatrix a = apply_unitary(DensityMatrix(rho), hermitian_expm(HermitianParam::from_matrix(h)));
  const DensityMatrix b = apply_unitary(DensityMatrix(rho), hermitian_expm(HermitianParam::from_matrix(shifted)));
  CHECK(max_abs(a.matrix() - b.matrix()) < 1e-12);

  // so the gradient of any conjugation loss along I vanishes
  const HermitianExp ex(h);
  const CMatrix g = dtn::testing::random_complex(4, 4, rng);
  const CMatrix u = ex.unitary();
  // L(U) = Re tr(G^dagger U rho U^dagger); dL/dU = 2 G U rho for Hermitian G, use it generically:
  const CMatrix gh = 0.5 * (g + g.adjoint());
  const CMatrix grad_u = 2.0 * gh * u * rho;
  CHECK(std::abs(ex.pullback(grad_u).trace()) < 1e-12);
}

TEST_CASE("typed values validate their invariants") {
  CHECK_THROWS_AS(DensityMatrix(CMatrix::Identity(2, 2)), Error);  // trace 2
  CMatrix bad = CMatrix::Identity(2, 2) * 0.5;
  bad(0, 1) = 0.3;
  CHECK_THROWS_AS(DensityMatrix{bad}, Error);  // not Hermitian
  CHECK_THROWS_AS(UnitaryMatrix(CMatrix::Identity(2, 2) * 2.0), Error);
  CHECK_THROWS_AS(DensityMatrix(CMatrix::Identity(3, 3) / 3.0), Error);  // not 2^n

  CVector plus(2);
  plus << 1.0 / std::numbers::sqrt2, 1.0 / std::numbers::sqrt2;
  const DensityMatrix pure = DensityMatrix::pure(plus);
  CHECK(std::abs(purity(pure) - 1.0) < 1e-15);
  CHECK(std::abs(purity(DensityMatrix(CMatrix::Identity(4, 4) / 4.0)) - 0.25) < 1e-15);
}
