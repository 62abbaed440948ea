#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <unordered_map>

#include "ifmm/h2.hpp"

namespace ifmm {

namespace {

struct Reduced {
  Matrix basis;   // orthonormal columns
  Matrix coeffs;  // rank x grid: diag(sigma) * W^T
};

Reduced rank_reveal(const Matrix& M, double rel_eps) {
  Eigen::BDCSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cut = s.size() ? std::max(rel_eps, 1e-13) * s(0) : 0.0;
  Index k = 0;
  while (k < s.size() && s(k) > cut) ++k;
  Reduced r;
  r.basis = svd.matrixU().leftCols(k);
  r.coeffs = s.head(k).asDiagonal() * svd.matrixV().leftCols(k).transpose();
  return r;
}

// Kronecker expansion of a scalar interpolation matrix by I_bd.
Matrix expand(const Matrix& M, int bd) {
  if (bd == 1) return M;
  Matrix out = Matrix::Zero(M.rows() * bd, M.cols() * bd);
  for (Index j = 0; j < M.cols(); ++j)
    for (Index i = 0; i < M.rows(); ++i)
      for (int c = 0; c < bd; ++c) out(i * bd + c, j * bd + c) = M(i, j);
  return out;
}

std::vector<Point3> cell_grid(const Cluster& c, const std::vector<double>& nodes) {
  const auto n = static_cast<int>(nodes.size());
  std::vector<Point3> grid;
  grid.reserve(n * n * n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int e = 0; e < n; ++e)
        grid.push_back({c.center.x + c.half_width * nodes[a], c.center.y + c.half_width * nodes[b],
                        c.center.z + c.half_width * nodes[e], -1});
  return grid;
}

// Interpolation matrix from a cell's Chebyshev grid to arbitrary points.
Matrix interpolation(const Cluster& c, const Point3* pts, Index count,
                     const std::vector<double>& nodes) {
  const auto n = static_cast<int>(nodes.size());
  Matrix S(count, n * n * n);
  std::vector<double> wx(n), wy(n), wz(n);
  for (Index p = 0; p < count; ++p) {
    chebyshev_weights(n, (pts[p].x - c.center.x) / c.half_width, nodes, wx.data());
    chebyshev_weights(n, (pts[p].y - c.center.y) / c.half_width, nodes, wy.data());
    chebyshev_weights(n, (pts[p].z - c.center.z) / c.half_width, nodes, wz.data());
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int e = 0; e < n; ++e) S(p, (a * n + b) * n + e) = wx[a] * wy[b] * wz[e];
  }
  return S;
}

const Matrix* find_block(const BlockList& list, int key) {
  auto it = std::lower_bound(list.begin(), list.end(), key,
                             [](const auto& entry, int k) { return entry.first < k; });
  return (it != list.end() && it->first == key) ? &it->second : nullptr;
}

int offset_key(const Cluster& a, const Cluster& b) {
  return static_cast<int>(((b.cell[0] - a.cell[0] + 3) * 7 + (b.cell[1] - a.cell[1] + 3)) * 7 +
                          (b.cell[2] - a.cell[2] + 3));
}

}  // namespace

std::shared_ptr<const Hierarchy> make_hierarchy(const std::vector<Point3>& points,
                                                const TreeOptions& options) {
  auto h = std::make_shared<Hierarchy>();
  auto built = build_octree(points, options);
  h->tree = std::move(built.tree);
  h->permutation = std::move(built.permutation);
  h->topology = compute_topology(h->tree);
  return h;
}

std::vector<double> chebyshev_nodes(int n) {
  if (n < 1) throw InputError("chebyshev_nodes: n must be >= 1");
  std::vector<double> nodes(n);
  for (int k = 0; k < n; ++k) nodes[k] = std::cos((2.0 * k + 1.0) * std::numbers::pi / (2.0 * n));
  return nodes;
}

void chebyshev_weights(int n, double x, const std::vector<double>& nodes, double* out) {
  for (int k = 0; k < n; ++k) out[k] = 1.0 / n;
  if (n == 1) return;
  double t0 = 1.0, t1 = x;
  std::vector<double> p0(n, 1.0), p1(nodes.begin(), nodes.end());
  for (int j = 1; j < n; ++j) {
    for (int k = 0; k < n; ++k) out[k] += 2.0 / n * t1 * p1[k];
    const double t2 = 2.0 * x * t1 - t0;
    t0 = t1;
    t1 = t2;
    for (int k = 0; k < n; ++k) {
      const double q = 2.0 * nodes[k] * p1[k] - p0[k];
      p0[k] = p1[k];
      p1[k] = q;
    }
  }
}

Index H2Operators::max_rank() const {
  Index r = 0;
  for (std::size_t l = 2; l < levels.size(); ++l)
    for (Index k : levels[l].rank) r = std::max(r, k);
  return r;
}

double H2Operators::mean_rank() const {
  double sum = 0.0;
  Index count = 0;
  for (std::size_t l = 2; l < levels.size(); ++l)
    for (Index k : levels[l].rank) {
      sum += static_cast<double>(k);
      ++count;
    }
  return count ? sum / static_cast<double>(count) : 0.0;
}

H2Operators chebyshev_operators(std::shared_ptr<const Hierarchy> hierarchy, const Kernel& kernel,
                                const ChebyshevOptions& options) {
  if (options.nodes < 1) throw InputError("chebyshev_operators: n must be >= 1");
  const Octree& tree = hierarchy->tree;
  const ClusterTopology& topo = hierarchy->topology;
  const int L = tree.depth;
  const int bd = kernel.block_dim();

  H2Operators ops;
  ops.hierarchy = hierarchy;
  ops.block_dim = bd;
  ops.cheb_nodes = options.nodes;
  ops.basis_epsilon = options.basis_epsilon;
  ops.levels.resize(L + 1);

  const auto& leaves = tree.levels[L];
  const auto nleaf = static_cast<Index>(leaves.size());
  ops.leaf_offset.resize(nleaf + 1, 0);
  for (Index i = 0; i < nleaf; ++i) ops.leaf_offset[i + 1] = ops.leaf_offset[i] + leaves[i].size() * bd;

  // Near field.
  ops.near.resize(nleaf);
#pragma omp parallel for schedule(dynamic)
  for (Index i = 0; i < nleaf; ++i) {
    const auto& ci = leaves[i];
    for (int j : topo.neighbors[L][i]) {
      const auto& cj = leaves[j];
      ops.near[i].emplace_back(j, kernel.block(&tree.points[ci.point_begin], ci.size(),
                                               &tree.points[cj.point_begin], cj.size()));
    }
  }
  if (L < 2) return ops;

  const auto nodes = chebyshev_nodes(options.nodes);
  const int n3 = options.nodes * options.nodes * options.nodes;

  // Bottom-up orthonormalization; coeffs map each basis onto its cell's grid values.
  std::vector<std::vector<Matrix>> coeffs(L + 1);
  {
    auto& lev = ops.levels[L];
    lev.rank.resize(nleaf);
    lev.U.resize(nleaf);
    coeffs[L].resize(nleaf);
#pragma omp parallel for schedule(dynamic)
    for (Index i = 0; i < nleaf; ++i) {
      const auto& c = leaves[i];
      Matrix S = expand(interpolation(c, &tree.points[c.point_begin], c.size(), nodes), bd);
      Reduced r = rank_reveal(S, options.basis_epsilon);
      lev.rank[i] = r.basis.cols();
      lev.U[i] = std::move(r.basis);
      coeffs[L][i] = std::move(r.coeffs);
    }
    lev.V = lev.U;
  }
  for (int l = L - 1; l >= 2; --l) {
    const auto& level = tree.levels[l];
    auto& lev = ops.levels[l];
    auto& child_lev = ops.levels[l + 1];
    const auto count = static_cast<Index>(level.size());
    lev.rank.resize(count);
    coeffs[l].resize(count);
    child_lev.transfer_U.resize(tree.levels[l + 1].size());
#pragma omp parallel for schedule(dynamic)
    for (Index p = 0; p < count; ++p) {
      const auto& cp = level[p];
      Index rows = 0;
      for (int c : cp.children) rows += child_lev.rank[c];
      Matrix G(rows, n3 * bd);
      Index at = 0;
      for (int c : cp.children) {
        const auto& cc = tree.levels[l + 1][c];
        const auto grid = cell_grid(cc, nodes);
        const Matrix T = expand(interpolation(cp, grid.data(), n3, nodes), bd);
        G.middleRows(at, child_lev.rank[c]) = coeffs[l + 1][c] * T;
        at += child_lev.rank[c];
      }
      Reduced r = rank_reveal(G, options.basis_epsilon);
      lev.rank[p] = r.basis.cols();
      at = 0;
      for (int c : cp.children) {
        child_lev.transfer_U[c] = r.basis.middleRows(at, child_lev.rank[c]);
        at += child_lev.rank[c];
      }
      coeffs[l][p] = std::move(r.coeffs);
    }
    child_lev.transfer_V = child_lev.transfer_U;
  }

  // Far-field couplings; grid-to-grid kernel blocks depend only on the cell offset.
  for (int l = 2; l <= L; ++l) {
    const auto& level = tree.levels[l];
    const auto count = static_cast<Index>(level.size());
    auto& lev = ops.levels[l];
    lev.coupling.resize(count);
    std::unordered_map<int, Matrix> cache;
    for (Index i = 0; i < count; ++i)
      for (int q : topo.interactions[l][i]) {
        const int key = offset_key(level[i], level[q]);
        if (cache.count(key)) continue;
        const auto gi = cell_grid(level[i], nodes);
        const auto gq = cell_grid(level[q], nodes);
        cache.emplace(key, kernel.block(gi.data(), n3, gq.data(), n3));
      }
#pragma omp parallel for schedule(dynamic)
    for (Index i = 0; i < count; ++i) {
      const Matrix left = coeffs[l][i];
      for (int q : topo.interactions[l][i]) {
        const Matrix& kc = cache.at(offset_key(level[i], level[q]));
        lev.coupling[i].emplace_back(q, left * kc * coeffs[l][q].transpose());
      }
    }
    lev.weight_U.assign(count, Vector());
    lev.weight_V.assign(count, Vector());
    for (Index i = 0; i < count; ++i) {
      lev.weight_U[i] = Vector::Ones(lev.rank[i]);
      lev.weight_V[i] = Vector::Ones(lev.rank[i]);
    }
  }
  return ops;
}

void initialize_weights(H2Operators& ops, const WeightOptions& options) {
  const int L = ops.depth();
  if (L < 2) return;
  const Octree& tree = ops.hierarchy->tree;
  std::vector<std::vector<Matrix>> QU(L + 1), QV(L + 1);

  auto sample = [&](const Matrix& G, int l, Index i, std::uint64_t salt) -> Matrix {
    if (options.mode == WeightMode::rigorous || G.cols() <= options.sample_columns) return G;
    Rng rng(options.seed ^ (salt * 0x9e3779b97f4a7c15ULL) ^ (static_cast<std::uint64_t>(l) << 48) ^
            static_cast<std::uint64_t>(i));
    std::vector<Index> idx(G.cols());
    std::iota(idx.begin(), idx.end(), 0);
    const Index s = options.sample_columns;
    for (Index k = 0; k < s; ++k) {
      const Index pick = k + static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(G.cols() - k));
      std::swap(idx[k], idx[pick]);
    }
    const double scale = std::sqrt(static_cast<double>(G.cols()) / static_cast<double>(s));
    Matrix out(G.rows(), s);
    for (Index k = 0; k < s; ++k) out.col(k) = scale * G.col(idx[k]);
    return out;
  };

  auto decompose = [](const Matrix& G, Index r, Matrix& Q, Vector& w) {
    if (G.cols() == 0 || r == 0) {
      Q = Matrix::Identity(r, r);
      w = Vector::Ones(r);
      return;
    }
    Eigen::BDCSVD<Matrix> svd(G, Eigen::ComputeFullU);
    Q = svd.matrixU();
    w = Vector::Zero(r);
    w.head(svd.singularValues().size()) = svd.singularValues();
    if (w(0) == 0.0) {
      Q = Matrix::Identity(r, r);
      w = Vector::Ones(r);
      return;
    }
    w = w.cwiseMax(1e-14 * w(0));
  };

  for (int l = 2; l <= L; ++l) {
    auto& lev = ops.levels[l];
    const auto count = static_cast<Index>(lev.rank.size());
    QU[l].resize(count);
    QV[l].resize(count);
#pragma omp parallel for schedule(dynamic)
    for (Index i = 0; i < count; ++i) {
      const Index r = lev.rank[i];
      const int parent = tree.levels[l][i].parent;
      Index cols = 0;
      for (const auto& [q, K] : lev.coupling[i]) cols += K.cols();
      if (l > 2) cols += ops.levels[l - 1].rank[parent];
      Matrix GU(r, cols), GV(r, cols);
      Index at = 0;
      for (const auto& [q, K] : lev.coupling[i]) {
        GU.middleCols(at, K.cols()) = K;
        const Matrix* back = find_block(lev.coupling[q], static_cast<int>(i));
        GV.middleCols(at, K.cols()) = back->transpose();
        at += K.cols();
      }
      if (l > 2) {
        const auto& up = ops.levels[l - 1];
        GU.rightCols(up.rank[parent]) =
            lev.transfer_U[i] * QU[l - 1][parent] * up.weight_U[parent].asDiagonal();
        GV.rightCols(up.rank[parent]) =
            lev.transfer_V[i] * QV[l - 1][parent] * up.weight_V[parent].asDiagonal();
      }
      decompose(sample(GU, l, i, 1), r, QU[l][i], lev.weight_U[i]);
      decompose(sample(GV, l, i, 2), r, QV[l][i], lev.weight_V[i]);
    }
  }

  // Apply the rotations everywhere the bases appear.
  for (int l = 2; l <= L; ++l) {
    auto& lev = ops.levels[l];
    const auto count = static_cast<Index>(lev.rank.size());
    for (Index i = 0; i < count; ++i) {
      for (auto& [q, K] : lev.coupling[i]) K = QU[l][i].transpose() * K * QV[l][q];
      if (l > 2) {
        const int parent = tree.levels[l][i].parent;
        lev.transfer_U[i] = QU[l][i].transpose() * lev.transfer_U[i] * QU[l - 1][parent];
        lev.transfer_V[i] = QV[l][i].transpose() * lev.transfer_V[i] * QV[l - 1][parent];
      }
      if (l == L) {
        lev.U[i] = lev.U[i] * QU[l][i];
        lev.V[i] = lev.V[i] * QV[l][i];
      }
    }
  }
}

}  // namespace ifmm
