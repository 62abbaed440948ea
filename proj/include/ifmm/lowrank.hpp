#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ifmm/types.hpp"

namespace ifmm {

// M ~= U * diag(sigma) * V^T with orthonormal U, V and non-increasing sigma > 0.
struct LowRankFactor {
  Matrix U;
  Vector sigma;
  Matrix V;

  Index rank() const { return sigma.size(); }
  Index rows() const { return U.rows(); }
  Index cols() const { return V.rows(); }
  Matrix dense() const { return U * sigma.asDiagonal() * V.transpose(); }
  static LowRankFactor empty(Index m, Index n);
};

// Result of merging a weighted basis with a weighted fill-in basis.
struct BasisUpdate {
  Matrix basis;     // orthonormal, m x k
  Vector weights;   // k new singular-value weights
  Matrix phi;       // k x (r + f): basis * diag(weights) * phi ~= [old*Sold | fill*Sfill]
  Matrix old_map;   // k x r: basis * old_map ~= old basis
  Matrix fill_map;  // k x f: basis * fill_map ~= fill basis
};

// Retains exactly the triplets with sigma > abs_threshold.
LowRankFactor truncated_svd(const Matrix& M, double abs_threshold);

using BlockApply = std::function<Matrix(const Matrix&)>;

struct RandomizedSvdOptions {
  int oversample = 10;
  int power_iters = 2;
  Index initial_rank = 8;
  // Caps the adaptive search; -1 means min(m, n).
  Index max_rank = -1;
  std::uint64_t seed = 0x5eed5eedULL;
};

// Adaptive randomized SVD: apply(X) = M X, apply_t(X) = M^T X.
LowRankFactor randomized_svd(const BlockApply& apply, const BlockApply& apply_t, Index m,
                             Index n, double abs_threshold,
                             const RandomizedSvdOptions& options = {});
LowRankFactor randomized_svd(const Matrix& M, double abs_threshold,
                             const RandomizedSvdOptions& options = {});

// Fully pivoted ACA stopped when the largest remaining entry is <= abs_threshold
// (or continued to min_rank while the residual is nonzero), then QR-QR-SVD
// recompression truncated at the same threshold.
LowRankFactor aca_svd(const Matrix& M, double abs_threshold, Index min_rank = 0);

// min{k : sigma_{k+1} <= epsilon * sigma0_ref}, capped at the list length.
Index rank_from_reference(const std::vector<double>& sigmas, double epsilon, double sigma0_ref);
Index rank_from_reference(const Vector& sigmas, double epsilon, double sigma0_ref);

// Union of [old * diag(old_w) | fill * diag(fill_w)]. The result keeps at least
// min_rank columns; if the union has lower rank it is padded with an orthonormal
// complement at weight pad_weight (defaults to the threshold).
BasisUpdate weighted_basis_union(const Matrix& old_basis, const Vector& old_weights,
                                 const Matrix& fill_basis, const Vector& fill_weights,
                                 double abs_threshold, Index min_rank = 0,
                                 double pad_weight = 0.0);

// Fill-in compression: randomized SVD above `rsvd_cutoff` in min(m, n), truncated SVD otherwise.
LowRankFactor compress_block(const Matrix& M, double abs_threshold, Index rsvd_cutoff = 64);

// Orthonormal columns completing `Q` (m x k) to m x target columns.
Matrix orthonormal_complement(const Matrix& Q, Index extra);

}  // namespace ifmm
