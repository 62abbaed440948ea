#include "ifmm/lowrank.hpp"

#include <algorithm>

#include "ifmm/kernel.hpp"

namespace ifmm {

namespace {

Matrix thin_q(const Matrix& Y) {
  const Index cols = std::min(Y.rows(), Y.cols());
  Eigen::HouseholderQR<Matrix> qr(Y);
  return qr.householderQ() * Matrix::Identity(Y.rows(), cols);
}

Index count_above(const Vector& s, double threshold) {
  Index k = 0;
  while (k < s.size() && s(k) > threshold) ++k;
  return k;
}

LowRankFactor truncate(const Matrix& U, const Vector& s, const Matrix& V, Index k) {
  LowRankFactor f;
  f.U = U.leftCols(k);
  f.sigma = s.head(k);
  f.V = V.leftCols(k);
  return f;
}

}  // namespace

LowRankFactor LowRankFactor::empty(Index m, Index n) {
  LowRankFactor f;
  f.U = Matrix(m, 0);
  f.sigma = Vector(0);
  f.V = Matrix(n, 0);
  return f;
}

LowRankFactor truncated_svd(const Matrix& M, double abs_threshold) {
  if (M.size() == 0) return LowRankFactor::empty(M.rows(), M.cols());
  Eigen::BDCSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  return truncate(svd.matrixU(), s, svd.matrixV(), count_above(s, abs_threshold));
}

LowRankFactor randomized_svd(const BlockApply& apply, const BlockApply& apply_t, Index m,
                             Index n, double abs_threshold, const RandomizedSvdOptions& options) {
  if (m == 0 || n == 0) return LowRankFactor::empty(m, n);
  const Index full = std::min(m, n);
  const Index cap = options.max_rank < 0 ? full : std::min(full, options.max_rank);
  Index k = std::max<Index>(1, std::min(options.initial_rank, cap));
  Rng rng(options.seed);
  for (;;) {
    const Index ell = std::min(k + options.oversample, full);
    Matrix omega(n, ell);
    for (Index j = 0; j < ell; ++j)
      for (Index i = 0; i < n; ++i) omega(i, j) = rng.normal();
    Matrix Q = thin_q(apply(omega));
    for (int it = 0; it < options.power_iters; ++it) {
      Matrix Qt = thin_q(apply_t(Q));
      Q = thin_q(apply(Qt));
    }
    const Matrix Bt = apply_t(Q);  // n x ell = (Q^T M)^T
    Eigen::BDCSVD<Matrix> svd(Bt, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const Index found = count_above(s, abs_threshold);
    if (found < k || ell == full || k >= cap) {
      const Index keep = std::min(found, cap);
      return truncate(Q * svd.matrixV(), s, svd.matrixU(), keep);
    }
    k = std::min(2 * k, cap);
  }
}

LowRankFactor randomized_svd(const Matrix& M, double abs_threshold,
                             const RandomizedSvdOptions& options) {
  return randomized_svd([&M](const Matrix& X) -> Matrix { return M * X; },
                        [&M](const Matrix& X) -> Matrix { return M.transpose() * X; }, M.rows(),
                        M.cols(), abs_threshold, options);
}

LowRankFactor aca_svd(const Matrix& M, double abs_threshold, Index min_rank) {
  const Index m = M.rows(), n = M.cols();
  if (m == 0 || n == 0) return LowRankFactor::empty(m, n);
  Matrix R = M;
  std::vector<Vector> us, vs;
  const Index full = std::min(m, n);
  while (static_cast<Index>(us.size()) < full) {
    Index pi = 0, pj = 0;
    const double pivot = R.cwiseAbs().maxCoeff(&pi, &pj);
    const bool wanted = static_cast<Index>(us.size()) < min_rank;
    if (pivot == 0.0 || (pivot <= abs_threshold && !wanted)) break;
    Vector u = R.col(pj);
    Vector v = R.row(pi).transpose() / R(pi, pj);
    R.noalias() -= u * v.transpose();
    us.push_back(std::move(u));
    vs.push_back(std::move(v));
  }
  const auto k = static_cast<Index>(us.size());
  if (k == 0) return LowRankFactor::empty(m, n);
  Matrix Ua(m, k), Va(n, k);
  for (Index c = 0; c < k; ++c) {
    Ua.col(c) = us[c];
    Va.col(c) = vs[c];
  }
  Eigen::HouseholderQR<Matrix> qu(Ua), qv(Va);
  const Matrix Q1 = qu.householderQ() * Matrix::Identity(m, k);
  const Matrix Q2 = qv.householderQ() * Matrix::Identity(n, k);
  const Matrix R1 = qu.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  const Matrix R2 = qv.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<Matrix> svd(R1 * R2.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  Index keep = std::max(count_above(s, abs_threshold), std::min(min_rank, k));
  // Exact zeros carry no direction; they are left to the caller's padding.
  while (keep > 0 && s(keep - 1) == 0.0) --keep;
  return truncate(Q1 * svd.matrixU(), s, Q2 * svd.matrixV(), keep);
}

Index rank_from_reference(const std::vector<double>& sigmas, double epsilon, double sigma0_ref) {
  const double threshold = epsilon * sigma0_ref;
  Index k = 0;
  while (k < static_cast<Index>(sigmas.size()) && sigmas[k] > threshold) ++k;
  return k;
}

Index rank_from_reference(const Vector& sigmas, double epsilon, double sigma0_ref) {
  return count_above(sigmas, epsilon * sigma0_ref);
}

Matrix orthonormal_complement(const Matrix& Q, Index extra) {
  const Index m = Q.rows(), k = Q.cols();
  if (extra <= 0) return Matrix(m, 0);
  if (k + extra > m) throw InputError("orthonormal_complement: not enough room");
  if (k == 0) return Matrix::Identity(m, extra);
  Eigen::HouseholderQR<Matrix> qr(Q);
  const Matrix full = qr.householderQ();
  return full.middleCols(k, extra);
}

BasisUpdate weighted_basis_union(const Matrix& old_basis, const Vector& old_weights,
                                 const Matrix& fill_basis, const Vector& fill_weights,
                                 double abs_threshold, Index min_rank, double pad_weight) {
  const Index m = old_basis.rows();
  if (fill_basis.rows() != m) throw InputError("weighted_basis_union: row mismatch");
  if (old_basis.cols() != old_weights.size() || fill_basis.cols() != fill_weights.size())
    throw InputError("weighted_basis_union: weight count mismatch");
  if ((old_weights.size() && old_weights.minCoeff() <= 0.0) ||
      (fill_weights.size() && fill_weights.minCoeff() <= 0.0))
    throw InputError("weighted_basis_union: weights must be positive");
  min_rank = std::min(min_rank, m);

  const Index r = old_basis.cols(), f = fill_basis.cols();
  Matrix C(m, r + f);
  C.leftCols(r) = old_basis * old_weights.asDiagonal();
  C.rightCols(f) = fill_basis * fill_weights.asDiagonal();
  LowRankFactor lr = aca_svd(C, abs_threshold, min_rank);

  BasisUpdate out;
  Index k = lr.rank();
  double floor = pad_weight > 0.0 ? pad_weight : abs_threshold;
  if (!(floor > 0.0)) {
    const double top = lr.rank() ? lr.sigma(0) : 1.0;
    floor = 1e-16 * top;
  }
  if (k < min_rank) {
    out.basis.resize(m, min_rank);
    out.basis.leftCols(k) = lr.U;
    out.basis.rightCols(min_rank - k) = orthonormal_complement(lr.U, min_rank - k);
    out.weights = Vector::Constant(min_rank, floor);
    out.weights.head(k) = lr.sigma;
    k = min_rank;
  } else {
    out.basis = std::move(lr.U);
    out.weights = std::move(lr.sigma);
  }
  out.weights = out.weights.cwiseMax(floor);
  // Coefficients by orthogonal projection, so that weights * phi * diag(1/old_w)
  // is the old map and the analogous fill map.
  const Matrix proj = out.basis.transpose() * C;
  out.phi = out.weights.cwiseInverse().asDiagonal() * proj;
  out.old_map = out.basis.transpose() * old_basis;
  out.fill_map = out.basis.transpose() * fill_basis;
  return out;
}

LowRankFactor compress_block(const Matrix& M, double abs_threshold, Index rsvd_cutoff) {
  // sigma_1 <= ||M||_F, so this is the same rank-0 decision without an SVD.
  if (M.norm() <= abs_threshold) return LowRankFactor::empty(M.rows(), M.cols());
  if (std::min(M.rows(), M.cols()) > rsvd_cutoff) return randomized_svd(M, abs_threshold);
  return truncated_svd(M, abs_threshold);
}

}  // namespace ifmm
