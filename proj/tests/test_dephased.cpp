#include <doctest.h>

#include <vector>

#include "dtn/dataset.hpp"
#include "dtn/dephased.hpp"
#include "dtn/error.hpp"
#include "test_util.hpp"

using namespace dtn;
using dtn::testing::random_unitary;

TEST_CASE("|U|^2 is doubly stochastic") {
  std::mt19937_64 rng(1);
  for (Index d : {2, 4, 8, 16}) {
    const RMatrix m = to_unitary_stochastic(UnitaryMatrix(random_unitary(d, rng)));
    CHECK((m.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK((m.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK(m.minCoeff() >= 0.0);
  }
  CHECK_THROWS_AS(to_unitary_stochastic(UnitaryMatrix::unchecked(CMatrix::Ones(2, 2))), Error);
}

TEST_CASE("tracing outputs gives a column-stochastic conditional table") {
  std::mt19937_64 rng(2);
  const CMatrix u = random_unitary(8, rng);
  const std::vector<int> traced = {1};
  const StochasticNode s = to_singly_stochastic(UnitaryMatrix(u), traced);
  REQUIRE(s.matrix.rows() == 4);
  REQUIRE(s.matrix.cols() == 8);
  CHECK(s.column_sum_error() < 1e-12);
  // oracle: S_{b j} = sum over the traced bit of |U_{out, j}|^2
  for (Index j = 0; j < 8; ++j)
    for (Index b = 0; b < 4; ++b) {
      const Index hi = (b >> 1) & 1, lo = b & 1;
      double ref = 0;
      for (Index a = 0; a < 2; ++a) ref += std::norm(u((hi << 2) | (a << 1) | lo, j));
      CHECK(std::abs(s.matrix(b, j) - ref) < 1e-14);
    }
}

TEST_CASE("a node acting on diagonal input only sees |U|^2") {
  std::mt19937_64 rng(3);
  const CMatrix u = random_unitary(4, rng);
  RVector probs(4);
  probs << 0.1, 0.2, 0.3, 0.4;
  const CMatrix rho = probs.cast<Complex>().asDiagonal();
  const RVector lhs = (u * rho * u.adjoint()).diagonal().real();
  const RVector rhs = to_unitary_stochastic(UnitaryMatrix(u)) * probs;
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("bayes readout is a normalized distribution") {
  std::mt19937_64 rng(4);
  Network net(build_ttn(8, 1));
  net.set_p(1.0);
  dtn::testing::randomize(net, rng);
  const BayesModel model(net);
  const ProbVector pv = model.readout(dtn::testing::random_features(8, rng));
  CHECK(pv.width() == 1);
  CHECK(pv.normalization_error() < 1e-12);
  CHECK(pv.entries.minCoeff() >= 0.0);
}

TEST_CASE("stinespring witness: resets need an ancilla") {
  const StinespringReport r = stinespring_witness(32, 5000, 11);
  RMatrix target(2, 4);
  target << 1, 1, 1, 1, 0, 0, 0, 0;
  CHECK(r.target == target);
  CHECK(r.realized_error < 1e-12);
  CHECK(r.reset_error < 1e-12);
  CHECK(r.ancilla_realizes());
  CHECK(r.one_qubit_min_residual > 0.1);
  CHECK(r.one_qubit_infeasible());
  CHECK(r.one_qubit_grid_points >= 32 * 32);
  CHECK(r.no_ancilla_min_residual > 0.1);
}
