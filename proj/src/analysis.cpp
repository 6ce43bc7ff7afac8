#include "dtn/analysis.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "dtn/channels.hpp"
#include "dtn/dataset.hpp"
#include "dtn/error.hpp"

namespace dtn {

namespace {

constexpr double kZeroCoefficient = 1e-14;
constexpr double kFitTolerance = 1e-10;

nlohmann::json complex_json(Complex c) { return {c.real(), c.imag()}; }

nlohmann::json vector_json(const RVector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

int hamming(Index a, Index b) { return std::popcount(static_cast<std::uint64_t>(a ^ b)); }

const RegressorTerm& RegressorReport::term(Index i, Index j, Index k) const {
  const Index d = Index{1} << qubits;
  if (i < 0 || i >= d || j < 0 || j >= d || k < 0 || k >= d) config_error("regressor index out of range");
  return rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j * d + k)];
}

RVector RegressorReport::reconstruct(const CMatrix& rho) const {
  const Index d = Index{1} << qubits;
  if (rho.rows() != d || rho.cols() != d) config_error("reconstruct: dimension mismatch");
  RVector out(d);
  for (Index i = 0; i < d; ++i) {
    Complex sum = 0;
    for (const auto& t : rows[static_cast<std::size_t>(i)]) sum += t.coefficient * rho(t.j, t.k);
    out[i] = sum.real();
  }
  return out;
}

nlohmann::json RegressorReport::to_json() const {
  nlohmann::json j;
  j["qubits"] = qubits;
  j["p"] = p;
  auto& out = j["outputs"] = nlohmann::json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : rows[i])
      terms.push_back({{"j", t.j}, {"k", t.k}, {"coefficient", complex_json(t.coefficient)}, {"exponent", t.exponent}});
    out.push_back({{"i", i}, {"terms", terms}});
  }
  return j;
}

std::string RegressorReport::table(double hide_below) const {
  std::ostringstream s;
  char line[160];
  std::snprintf(line, sizeof line, "p = %g\n%4s %4s %4s %24s %24s %9s\n", p, "i", "j", "k", "Re(coef)", "Im(coef)", "(1-p)^e");
  s << line;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (const auto& t : rows[i]) {
      if (std::abs(t.coefficient) <= hide_below) continue;
      std::snprintf(line, sizeof line, "%4zu %4ld %4ld %24.16e %24.16e %9d\n", i, static_cast<long>(t.j), static_cast<long>(t.k),
                    t.coefficient.real(), t.coefficient.imag(), t.exponent);
      s << line;
    }
  return s.str();
}

RegressorReport regressor_coefficients(const UnitaryMatrix& u, double p) {
  check_rate(p);
  const CMatrix& U = u.matrix();
  const Index d = U.rows();
  RegressorReport r;
  r.qubits = u.qubits();
  r.p = p;
  r.rows.resize(static_cast<std::size_t>(d));
  for (Index i = 0; i < d; ++i) {
    auto& row = r.rows[static_cast<std::size_t>(i)];
    row.reserve(static_cast<std::size_t>(d * d));
    for (Index j = 0; j < d; ++j)
      for (Index k = 0; k < d; ++k) {
        const int e = hamming(j, k);
        row.push_back({j, k, U(i, j) * std::conj(U(i, k)) * std::pow(1.0 - p, e), e});
      }
  }
  return r;
}

Complex pipeline_coefficient(const CMatrix& u, double p, Index i, Index j, Index k) {
  const Index d = u.rows();
  CMatrix e = CMatrix::Zero(d, d);
  e(j, k) = 1.0;
  dephase_trailing(e, qubit_count(d), p);
  return (u * e * u.adjoint())(i, i);
}

nlohmann::json ExponentFit::to_json() const {
  nlohmann::json j{{"i", i}, {"j", this->j}, {"k", k}, {"defined", defined}, {"expected", expected}, {"status", status}};
  if (defined) {
    j["exponent"] = exponent;
    j["residual"] = residual;
  }
  return j;
}

ExponentFit suppression_exponent_fit(const CMatrix& u, Index j, Index k, std::optional<Index> i) {
  const Index d = u.rows();
  if (!is_power_of_two(d) || u.cols() != d) config_error("suppression_exponent_fit: square 2^n matrix required");
  if (j < 0 || j >= d || k < 0 || k >= d || (i && (*i < 0 || *i >= d))) config_error("suppression_exponent_fit: index out of range");

  ExponentFit f;
  f.j = j;
  f.k = k;
  f.expected = hamming(j, k);
  if (i) {
    f.i = *i;
  } else {
    double best = -1;
    for (Index r = 0; r < d; ++r) {
      const double mag = std::abs(u(r, j)) * std::abs(u(r, k));
      if (mag > best) best = mag, f.i = r;
    }
  }

  const Complex c0 = pipeline_coefficient(u, 0.0, f.i, j, k);
  if (std::abs(c0) < kZeroCoefficient) {
    f.status = "undefined: zero coefficient at p = 0";
    return f;
  }
  double sum = 0;
  for (double p : kFitPoints) sum += std::log(std::abs(pipeline_coefficient(u, p, f.i, j, k) / c0)) / std::log(1.0 - p);
  f.exponent = static_cast<int>(std::lround(sum / std::size(kFitPoints)));
  f.defined = true;
  for (double p : kFitPoints) {
    const Complex predicted = c0 * std::pow(1.0 - p, f.exponent);
    f.residual = std::max(f.residual, std::abs(pipeline_coefficient(u, p, f.i, j, k) - predicted));
  }
  f.status = f.residual < kFitTolerance ? "ok" : "poor fit";
  return f;
}

ExponentFit suppression_exponent_fit(const Network& net, int node, Index j, Index k, std::optional<Index> i) {
  if (node < 0 || node >= net.node_count()) config_error("node index out of range");
  return suppression_exponent_fit(net.unitary(node), j, k, i);
}

std::vector<ExponentFit> exponent_table(const CMatrix& u) {
  std::vector<ExponentFit> out;
  for (Index j = 0; j < u.rows(); ++j)
    for (Index k = 0; k < u.rows(); ++k) out.push_back(suppression_exponent_fit(u, j, k));
  return out;
}

nlohmann::json LambdaDemo::to_json() const {
  return {{"input", vector_json(input)},       {"coherent", vector_json(coherent)}, {"dephased", vector_json(dephased)},
          {"lost", vector_json(lost)},         {"cross_terms", cross_terms}};
}

LambdaDemo lambda_update_demo(const RVector& features, const UnitaryMatrix& u) {
  if (features.size() != u.qubits()) config_error("lambda_update_demo: one feature per qubit of U required");
  CMatrix rho = CMatrix::Ones(1, 1);
  LambdaDemo demo;
  for (Index q = 0; q < features.size(); ++q) {
    const DensityMatrix f = feature_density(features[q]);
    rho = kron(rho, f.matrix());
    demo.cross_terms.push_back(std::sqrt(f(0, 0).real() * f(1, 1).real()));
  }
  const CMatrix& U = u.matrix();
  demo.input = rho.diagonal().real();
  demo.coherent = (U * rho * U.adjoint()).diagonal().real();
  const CMatrix diag = demo.input.cast<Complex>().asDiagonal();
  demo.dephased = (U * diag * U.adjoint()).diagonal().real();
  demo.lost = demo.coherent - demo.dephased;
  return demo;
}

}  // namespace dtn
