#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "ifmm/types.hpp"

namespace ifmm {

struct TreeOptions {
  int leaf_target = 100;
  int min_depth = 2;
  int max_depth = 16;
  // Forces the depth, bypassing the population rule (0 gives a single leaf).
  std::optional<int> fixed_depth;
};

struct Cluster {
  int level = 0;
  int index = 0;                       // position within its level (Morton order)
  std::array<std::int64_t, 3> cell{};  // integer cell coordinates at this level
  std::uint64_t morton = 0;
  Point3 center;
  double half_width = 0.0;
  std::int64_t point_begin = 0;  // slice of the permuted point array
  std::int64_t point_end = 0;
  std::vector<int> children;  // indices into level + 1
  int parent = -1;            // index into level - 1

  std::int64_t size() const { return point_end - point_begin; }
};

struct Octree {
  int depth = 0;
  Point3 root_center;
  double root_half_width = 0.0;
  std::vector<std::vector<Cluster>> levels;  // levels[l], non-empty clusters only
  std::vector<Point3> points;                // permuted: grouped by leaf

  const std::vector<Cluster>& leaves() const { return levels.back(); }
  std::int64_t num_points() const { return static_cast<std::int64_t>(points.size()); }
};

struct ClusterTopology {
  // Indexed [level][cluster]; neighbor lists include self and are sorted.
  std::vector<std::vector<std::vector<int>>> neighbors;
  std::vector<std::vector<std::vector<int>>> interactions;
  std::vector<std::vector<std::vector<int>>> children;
};

struct OctreeBuild {
  Octree tree;
  // permutation[k] = input index of the k-th point in tree order.
  std::vector<std::int64_t> permutation;
};

std::uint64_t morton_encode(std::int64_t ix, std::int64_t iy, std::int64_t iz);

OctreeBuild build_octree(const std::vector<Point3>& points, const TreeOptions& options);
OctreeBuild build_octree(const std::vector<Point3>& points, int leaf_target);

ClusterTopology compute_topology(const Octree& tree);

// Chebyshev distance between the integer cells of two same-level clusters.
std::int64_t cell_distance(const Cluster& a, const Cluster& b);

// Reorders a per-point block vector into tree order and back.
Vector to_tree_order(const Vector& v, const std::vector<std::int64_t>& permutation, int block_dim);
Vector from_tree_order(const Vector& v, const std::vector<std::int64_t>& permutation,
                       int block_dim);

}  // namespace ifmm
