#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "ifmm/kernel.hpp"
#include "ifmm/tree.hpp"

namespace ifmm {

// Tree, topology and point permutation shared by operators, graph and factorization.
struct Hierarchy {
  Octree tree;
  ClusterTopology topology;
  std::vector<std::int64_t> permutation;

  int depth() const { return tree.depth; }
  std::int64_t num_points() const { return tree.num_points(); }
};

std::shared_ptr<const Hierarchy> make_hierarchy(const std::vector<Point3>& points,
                                                const TreeOptions& options);

using BlockList = std::vector<std::pair<int, Matrix>>;

struct H2Level {
  std::vector<Index> rank;
  // Leaf level only: point-space bases, rows = points * block_dim.
  std::vector<Matrix> U, V;
  // Levels > 2: child-to-parent transfer blocks, rank x parent rank.
  std::vector<Matrix> transfer_U, transfer_V;
  // K(i, q) for q in the interaction list, sorted by q.
  std::vector<BlockList> coupling;
  std::vector<Vector> weight_U, weight_V;
};

struct H2Operators {
  std::shared_ptr<const Hierarchy> hierarchy;
  int block_dim = 1;
  int cheb_nodes = 0;
  double basis_epsilon = 0.0;
  std::vector<H2Level> levels;  // indexed by tree level; bases exist for levels >= 2
  std::vector<BlockList> near;  // leaf S(i, j) for j in the neighbor list
  std::vector<Index> leaf_offset;  // first dof of each leaf in tree order

  int depth() const { return hierarchy->depth(); }
  Index dofs() const { return static_cast<Index>(hierarchy->num_points()) * block_dim; }
  bool has_far_field() const { return depth() >= 2; }
  Index max_rank() const;
  double mean_rank() const;
};

struct ChebyshevOptions {
  int nodes = 4;
  // Relative threshold for the rank-revealing SVD of the interpolation bases.
  double basis_epsilon = 1e-3;
};

// Chebyshev points of the first kind on [-1, 1].
std::vector<double> chebyshev_nodes(int n);
// Interpolation weights S_n(x, node_k) for every node k.
void chebyshev_weights(int n, double x, const std::vector<double>& nodes, double* out);

H2Operators chebyshev_operators(std::shared_ptr<const Hierarchy> hierarchy, const Kernel& kernel,
                                const ChebyshevOptions& options);

enum class WeightMode { rigorous, sampled };

struct WeightOptions {
  WeightMode mode = WeightMode::rigorous;
  Index sample_columns = 64;
  std::uint64_t seed = 17;
};

// Rotates every basis to the singular vectors of its outgoing (incoming) far-field
// couplings and stores the singular values as basis weights.
void initialize_weights(H2Operators& ops, const WeightOptions& options = {});

// y = A_H2 x (tree order). The parallel version splits each pass over clusters.
Vector h2_matvec(const H2Operators& ops, const Vector& x);
Vector h2_matvec_serial(const H2Operators& ops, const Vector& x);
// Original input ordering.
Vector h2_matvec_input_order(const H2Operators& ops, const Vector& x);

// Dense H2 matrix in tree order (small problems only).
Matrix h2_dense(const H2Operators& ops);

}  // namespace ifmm
