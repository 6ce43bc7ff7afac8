#include <doctest.h>

#include <bit>
#include <numbers>

#include "dtn/analysis.hpp"
#include "dtn/channels.hpp"
#include "dtn/dataset.hpp"
#include "test_util.hpp"

using namespace dtn;
using dtn::testing::random_density;
using dtn::testing::random_unitary;

TEST_CASE("identity node: output 0 regresses only on rho_00") {
  const RegressorReport r = regressor_coefficients(UnitaryMatrix::identity(4), 0.3);
  for (Index j = 0; j < 4; ++j)
    for (Index k = 0; k < 4; ++k) CHECK(r.term(0, j, k).coefficient == Complex(j == 0 && k == 0 ? 1.0 : 0.0));
}

TEST_CASE("regressor exponents are Hamming distances") {
  std::mt19937_64 rng(1);
  const RegressorReport r = regressor_coefficients(UnitaryMatrix(random_unitary(4, rng)), 0.5);
  for (Index i = 0; i < 4; ++i) {
    CHECK(r.term(i, 3, 0).exponent == 2);
    CHECK(r.term(i, 2, 1).exponent == 2);
    for (auto [j, k] : {std::pair{1, 0}, {2, 0}, {3, 1}, {3, 2}}) CHECK(r.term(i, j, k).exponent == 1);
    CHECK(r.term(i, 2, 2).exponent == 0);
  }
  CHECK(r.table().find("(1-p)^e") != std::string::npos);
  CHECK(r.to_json()["outputs"].size() == 4);
}

TEST_CASE("report reconstruction equals the dephase-then-conjugate pipeline") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> unit(0, 1);
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    const Index d = t % 3 == 0 ? 8 : 4;
    const CMatrix u = random_unitary(d, rng);
    const DensityMatrix rho(random_density(d, rng));
    const double p = unit(rng);
    const RVector got = regressor_coefficients(UnitaryMatrix(u), p).reconstruct(rho.matrix());
    const RVector ref = apply_unitary(dephase_local(rho, p), UnitaryMatrix(u)).diagonal();
    worst = std::max(worst, (got - ref).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("fitted suppression exponents") {
  std::mt19937_64 rng(3);
  const CMatrix u = random_unitary(4, rng);
  for (Index j = 0; j < 4; ++j)
    for (Index k = 0; k < 4; ++k) {
      const ExponentFit f = suppression_exponent_fit(u, j, k);
      REQUIRE(f.defined);
      CHECK(f.exponent == std::popcount(static_cast<unsigned>(j ^ k)));
      CHECK(f.exponent == f.expected);
      CHECK(f.residual < 1e-10);
    }
  CHECK(suppression_exponent_fit(u, 3, 0).exponent == 2);
  CHECK(suppression_exponent_fit(u, 1, 0).exponent == 1);
  CHECK(suppression_exponent_fit(u, 2, 2).exponent == 0);

  const CMatrix u3 = random_unitary(8, rng);
  for (auto [j, k] : {std::pair{7, 0}, {5, 2}, {6, 4}, {1, 1}, {3, 4}}) {
    const ExponentFit f = suppression_exponent_fit(u3, j, k);
    CHECK(f.exponent == std::popcount(static_cast<unsigned>(j ^ k)));
    CHECK(f.residual < 1e-10);
  }
}

TEST_CASE("a vanishing coefficient leaves the exponent undefined") {
  const ExponentFit f = suppression_exponent_fit(CMatrix::Identity(4, 4), 1, 0);
  CHECK_FALSE(f.defined);
  CHECK(f.expected == 1);
  CHECK(f.status.find("undefined") != std::string::npos);
  CHECK(exponent_table(CMatrix::Identity(4, 4)).size() == 16);
}

TEST_CASE("network-node overload") {
  Network net(build_ttn(4, 0));
  std::mt19937_64 rng(4);
  dtn::testing::randomize(net, rng);
  const ExponentFit f = suppression_exponent_fit(net, 0, 3, 0);
  CHECK(f.exponent == 2);
}

TEST_CASE("lambda update: coherent vs dephased input") {
  CMatrix h(2, 2);
  h << 1, 1, 1, -1;
  h /= std::numbers::sqrt2;
  const UnitaryMatrix had(h);

  RVector x(1);
  x << 0.0;
  LambdaDemo d = lambda_update_demo(x, had);
  CHECK((d.coherent - d.dephased).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(d.cross_terms[0] == 0.0);

  x << 0.5;
  d = lambda_update_demo(x, had);
  CHECK(std::abs(d.coherent(0) - 1.0) < 1e-15);
  CHECK(std::abs(d.dephased(0) - 0.5) < 1e-15);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0, 1);
  for (int t = 0; t < 50; ++t) {
    const CMatrix u = random_unitary(2, rng);
    x << unit(rng);
    d = lambda_update_demo(x, UnitaryMatrix(u));
    const Eigen::Vector2d f = encode_feature(x(0));
    const double cross = f(0) * f(1);
    CHECK(std::abs(d.cross_terms[0] - cross) < 1e-15);
    CHECK(std::abs(d.lost(0) - 2 * cross * (u(0, 0) * std::conj(u(0, 1))).real()) < 1e-14);
  }

  RVector x2(2);
  x2 << 0.3, 0.8;
  d = lambda_update_demo(x2, UnitaryMatrix(random_unitary(4, rng)));
  CHECK(d.input.size() == 4);
  CHECK(std::abs(d.coherent.sum() - 1.0) < 1e-14);
  CHECK(std::abs(d.dephased.sum() - 1.0) < 1e-14);
  CHECK(d.to_json()["cross_terms"].size() == 2);
}
