#pragma once

#include <random>

#include "dtn/network.hpp"

namespace dtn::testing {

inline CMatrix random_complex(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  CMatrix z(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) z(i, j) = Complex(n(rng), n(rng));
  return z;
}

inline CMatrix random_hermitian(Index dim, std::mt19937_64& rng, double scale = 1.0) {
  const CMatrix z = random_complex(dim, dim, rng);
  return scale * 0.5 * (z + z.adjoint());
}

/// Haar unitary via QR with phase fix.
inline CMatrix random_unitary(Index dim, std::mt19937_64& rng) {
  Eigen::HouseholderQR<CMatrix> qr(random_complex(dim, dim, rng));
  CMatrix q = qr.householderQ();
  const CMatrix r = qr.matrixQR();
  for (Index i = 0; i < dim; ++i) q.col(i) *= std::polar(1.0, std::arg(r(i, i)));
  return q;
}

/// Full-rank random state: normalized Wishart sample.
inline CMatrix random_density(Index dim, std::mt19937_64& rng) {
  const CMatrix z = random_complex(dim, dim, rng);
  CMatrix rho = z * z.adjoint();
  rho /= rho.trace().real();
  return 0.5 * (rho + rho.adjoint());
}

inline RVector random_features(int m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RVector x(m);
  for (int i = 0; i < m; ++i) x(i) = u(rng);
  return x;
}

inline void randomize(Network& net, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  RVector flat(net.flat_size());
  for (Index i = 0; i < flat.size(); ++i) flat(i) = n(rng);
  net.set_flat(flat);
}

}  // namespace dtn::testing
