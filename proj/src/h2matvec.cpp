#include "ifmm/h2.hpp"

namespace ifmm {

namespace {

Vector apply_h2(const H2Operators& ops, const Vector& x, bool parallel) {
  if (x.size() != ops.dofs()) throw InputError("h2_matvec: size mismatch");
  const int L = ops.depth();
  const auto& tree = ops.hierarchy->tree;
  const auto nleaf = static_cast<Index>(ops.near.size());
  Vector y = Vector::Zero(x.size());

  std::vector<std::vector<Vector>> up(L + 1), down(L + 1);
  if (L >= 2) {
    for (int l = 2; l <= L; ++l) {
      up[l].resize(ops.levels[l].rank.size());
      down[l].resize(ops.levels[l].rank.size());
    }
    const auto& leaf = ops.levels[L];
#pragma omp parallel for schedule(static) if (parallel)
    for (Index i = 0; i < nleaf; ++i) {
      const Index off = ops.leaf_offset[i], len = ops.leaf_offset[i + 1] - off;
      up[L][i] = leaf.V[i].transpose() * x.segment(off, len);
    }
    for (int l = L - 1; l >= 2; --l) {
      const auto count = static_cast<Index>(up[l].size());
#pragma omp parallel for schedule(static) if (parallel)
      for (Index p = 0; p < count; ++p) {
        Vector acc = Vector::Zero(ops.levels[l].rank[p]);
        for (int c : tree.levels[l][p].children)
          acc.noalias() += ops.levels[l + 1].transfer_V[c].transpose() * up[l + 1][c];
        up[l][p] = std::move(acc);
      }
    }
    for (int l = 2; l <= L; ++l) {
      const auto& lev = ops.levels[l];
      const auto count = static_cast<Index>(up[l].size());
#pragma omp parallel for schedule(dynamic) if (parallel)
      for (Index i = 0; i < count; ++i) {
        Vector acc = Vector::Zero(lev.rank[i]);
        for (const auto& [q, K] : lev.coupling[i]) acc.noalias() += K * up[l][q];
        if (l > 2) acc.noalias() += lev.transfer_U[i] * down[l - 1][tree.levels[l][i].parent];
        down[l][i] = std::move(acc);
      }
    }
  }
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (Index i = 0; i < nleaf; ++i) {
    const Index off = ops.leaf_offset[i], len = ops.leaf_offset[i + 1] - off;
    Vector acc = Vector::Zero(len);
    for (const auto& [j, S] : ops.near[i])
      acc.noalias() += S * x.segment(ops.leaf_offset[j], ops.leaf_offset[j + 1] - ops.leaf_offset[j]);
    if (L >= 2) acc.noalias() += ops.levels[L].U[i] * down[L][i];
    y.segment(off, len) = acc;
  }
  return y;
}

}  // namespace

Vector h2_matvec(const H2Operators& ops, const Vector& x) { return apply_h2(ops, x, true); }

Vector h2_matvec_serial(const H2Operators& ops, const Vector& x) {
  return apply_h2(ops, x, false);
}

Vector h2_matvec_input_order(const H2Operators& ops, const Vector& x) {
  const auto& perm = ops.hierarchy->permutation;
  return from_tree_order(h2_matvec(ops, to_tree_order(x, perm, ops.block_dim)), perm,
                         ops.block_dim);
}

Matrix h2_dense(const H2Operators& ops) {
  const Index n = ops.dofs();
  Matrix A(n, n);
  Vector e = Vector::Zero(n);
  for (Index j = 0; j < n; ++j) {
    e(j) = 1.0;
    A.col(j) = h2_matvec_serial(ops, e);
    e(j) = 0.0;
  }
  return A;
}

}  // namespace ifmm
