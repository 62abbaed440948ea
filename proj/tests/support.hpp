#pragma once

#include <doctest.h>

#include <vector>

#include "ifmm/kernel.hpp"
#include "ifmm/types.hpp"

namespace ifmm::test {

inline double rel_err(const Matrix& a, const Matrix& b) {
  const double nb = b.norm();
  return nb > 0 ? (a - b).norm() / nb : (a - b).norm();
}

inline Matrix gaussian(Index m, Index n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix M(m, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i) M(i, j) = rng.normal();
  return M;
}

inline double spectral_norm(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(M);
  return svd.singularValues()(0);
}

inline double orthonormality_residual(const Matrix& Q) {
  if (Q.cols() == 0) return 0.0;
  return (Q.transpose() * Q - Matrix::Identity(Q.cols(), Q.cols())).cwiseAbs().maxCoeff();
}

// Points at the centers of a full g x g x g grid of cells in [-1, 1]^3.
inline std::vector<Point3> grid_centers(int g) {
  std::vector<Point3> pts;
  for (int k = 0; k < g; ++k)
    for (int j = 0; j < g; ++j)
      for (int i = 0; i < g; ++i) {
        auto c = [g](int t) { return -1.0 + (2.0 * t + 1.0) / g; };
        pts.push_back({c(i), c(j), c(k), static_cast<std::int64_t>(pts.size())});
      }
  // Pin the bounding box to [-1, 1]^3.
  pts.push_back({-1, -1, -1, static_cast<std::int64_t>(pts.size())});
  pts.push_back({1, 1, 1, static_cast<std::int64_t>(pts.size())});
  return pts;
}

}  // namespace ifmm::test
