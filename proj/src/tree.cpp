#include "ifmm/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace ifmm {

namespace {

std::uint64_t spread_bits(std::uint64_t v) {
  v &= 0x1fffff;
  v = (v | v << 32) & 0x1f00000000ffffULL;
  v = (v | v << 16) & 0x1f0000ff0000ffULL;
  v = (v | v << 8) & 0x100f00f00f00f00fULL;
  v = (v | v << 4) & 0x10c30c30c30c30c3ULL;
  v = (v | v << 2) & 0x1249249249249249ULL;
  return v;
}

std::uint64_t compact_bits(std::uint64_t v) {
  v &= 0x1249249249249249ULL;
  v = (v ^ (v >> 2)) & 0x10c30c30c30c30c3ULL;
  v = (v ^ (v >> 4)) & 0x100f00f00f00f00fULL;
  v = (v ^ (v >> 8)) & 0x1f0000ff0000ffULL;
  v = (v ^ (v >> 16)) & 0x1f00000000ffffULL;
  v = (v ^ (v >> 32)) & 0x1fffff;
  return v;
}

// Cell index along one axis; boundary points fall into the lower cell.
std::int64_t axis_cell(double x, double lo, double width, std::int64_t cells) {
  const double t = (x - lo) / width * static_cast<double>(cells);
  auto c = static_cast<std::int64_t>(std::ceil(t)) - 1;
  return std::clamp<std::int64_t>(c, 0, cells - 1);
}

struct Box {
  Point3 center;
  double half_width;
};

Box bounding_cube(const std::vector<Point3>& points) {
  double lo[3] = {points[0].x, points[0].y, points[0].z};
  double hi[3] = {lo[0], lo[1], lo[2]};
  for (const auto& p : points) {
    const double c[3] = {p.x, p.y, p.z};
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], c[a]);
      hi[a] = std::max(hi[a], c[a]);
    }
  }
  double extent = 0.0;
  for (int a = 0; a < 3; ++a) extent = std::max(extent, hi[a] - lo[a]);
  if (!(extent > 0.0)) throw InputError("degenerate geometry: all points coincide");
  Box box;
  box.center = {0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2]), -1};
  box.half_width = 0.5 * extent;
  return box;
}

std::vector<std::uint64_t> leaf_codes(const std::vector<Point3>& points, const Box& box,
                                      int depth) {
  const std::int64_t cells = std::int64_t{1} << depth;
  const double width = 2.0 * box.half_width;
  const double lo[3] = {box.center.x - box.half_width, box.center.y - box.half_width,
                        box.center.z - box.half_width};
  std::vector<std::uint64_t> codes(points.size());
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto& p = points[k];
    codes[k] = morton_encode(axis_cell(p.x, lo[0], width, cells),
                             axis_cell(p.y, lo[1], width, cells),
                             axis_cell(p.z, lo[2], width, cells));
  }
  return codes;
}

std::int64_t count_distinct(std::vector<std::uint64_t> codes) {
  std::sort(codes.begin(), codes.end());
  return std::unique(codes.begin(), codes.end()) - codes.begin();
}

}  // namespace

std::uint64_t morton_encode(std::int64_t ix, std::int64_t iy, std::int64_t iz) {
  return spread_bits(static_cast<std::uint64_t>(ix)) |
         spread_bits(static_cast<std::uint64_t>(iy)) << 1 |
         spread_bits(static_cast<std::uint64_t>(iz)) << 2;
}

OctreeBuild build_octree(const std::vector<Point3>& points, int leaf_target) {
  TreeOptions options;
  options.leaf_target = leaf_target;
  return build_octree(points, options);
}

OctreeBuild build_octree(const std::vector<Point3>& input, const TreeOptions& options) {
  if (input.empty()) throw InputError("build_octree: empty point set");
  if (options.leaf_target < 1) throw InputError("build_octree: leaf_target must be >= 1");
  const Box box = bounding_cube(input);
  const auto n = static_cast<std::int64_t>(input.size());

  int depth = 0;
  std::vector<std::uint64_t> codes;
  if (options.fixed_depth) {
    depth = *options.fixed_depth;
    if (depth < 0 || depth > 20) throw InputError("build_octree: fixed depth out of range");
    codes = leaf_codes(input, box, depth);
  } else {
    for (depth = options.min_depth;; ++depth) {
      codes = leaf_codes(input, box, depth);
      const double mean = static_cast<double>(n) / static_cast<double>(count_distinct(codes));
      if (mean <= options.leaf_target || depth >= options.max_depth) break;
    }
  }

  OctreeBuild out;
  out.permutation.resize(n);
  std::iota(out.permutation.begin(), out.permutation.end(), 0);
  std::stable_sort(out.permutation.begin(), out.permutation.end(),
                   [&](std::int64_t a, std::int64_t b) { return codes[a] < codes[b]; });

  Octree& tree = out.tree;
  tree.depth = depth;
  tree.root_center = box.center;
  tree.root_half_width = box.half_width;
  tree.points.resize(n);
  for (std::int64_t k = 0; k < n; ++k) tree.points[k] = input[out.permutation[k]];
  tree.levels.resize(depth + 1);

  // Leaves: runs of equal codes in the sorted order.
  auto& leaves = tree.levels[depth];
  for (std::int64_t k = 0; k < n;) {
    std::int64_t e = k;
    const std::uint64_t code = codes[out.permutation[k]];
    while (e < n && codes[out.permutation[e]] == code) ++e;
    Cluster c;
    c.level = depth;
    c.morton = code;
    c.point_begin = k;
    c.point_end = e;
    leaves.push_back(c);
    k = e;
  }
  // Coarser levels group contiguous runs of children with the same parent code.
  for (int l = depth - 1; l >= 0; --l) {
    auto& fine = tree.levels[l + 1];
    auto& coarse = tree.levels[l];
    for (std::size_t k = 0; k < fine.size();) {
      std::size_t e = k;
      const std::uint64_t code = fine[k].morton >> 3;
      Cluster c;
      c.level = l;
      c.morton = code;
      c.point_begin = fine[k].point_begin;
      while (e < fine.size() && (fine[e].morton >> 3) == code) {
        c.children.push_back(static_cast<int>(e));
        fine[e].parent = static_cast<int>(coarse.size());
        ++e;
      }
      c.point_end = fine[e - 1].point_end;
      coarse.push_back(c);
      k = e;
    }
  }
  for (int l = 0; l <= depth; ++l) {
    const double h = box.half_width / static_cast<double>(std::int64_t{1} << l);
    const double lo[3] = {box.center.x - box.half_width, box.center.y - box.half_width,
                          box.center.z - box.half_width};
    auto& level = tree.levels[l];
    for (std::size_t i = 0; i < level.size(); ++i) {
      auto& c = level[i];
      c.index = static_cast<int>(i);
      c.half_width = h;
      for (int a = 0; a < 3; ++a) c.cell[a] = static_cast<std::int64_t>(compact_bits(c.morton >> a));
      c.center = {lo[0] + (2.0 * c.cell[0] + 1.0) * h, lo[1] + (2.0 * c.cell[1] + 1.0) * h,
                  lo[2] + (2.0 * c.cell[2] + 1.0) * h, -1};
    }
  }
  return out;
}

std::int64_t cell_distance(const Cluster& a, const Cluster& b) {
  std::int64_t d = 0;
  for (int k = 0; k < 3; ++k) d = std::max(d, std::abs(a.cell[k] - b.cell[k]));
  return d;
}

ClusterTopology compute_topology(const Octree& tree) {
  const int levels = static_cast<int>(tree.levels.size());
  ClusterTopology topo;
  topo.neighbors.resize(levels);
  topo.interactions.resize(levels);
  topo.children.resize(levels);
  for (int l = 0; l < levels; ++l) {
    const auto& level = tree.levels[l];
    const std::int64_t cells = std::int64_t{1} << l;
    std::unordered_map<std::uint64_t, int> lookup;
    lookup.reserve(level.size() * 2);
    for (const auto& c : level) lookup.emplace(c.morton, c.index);

    auto& nbrs = topo.neighbors[l];
    auto& inter = topo.interactions[l];
    nbrs.resize(level.size());
    inter.resize(level.size());
    topo.children[l].resize(level.size());
    for (const auto& c : level) {
      topo.children[l][c.index] = c.children;
      for (int dx = -1; dx <= 1; ++dx)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dz = -1; dz <= 1; ++dz) {
            const std::int64_t x = c.cell[0] + dx, y = c.cell[1] + dy, z = c.cell[2] + dz;
            if (x < 0 || y < 0 || z < 0 || x >= cells || y >= cells || z >= cells) continue;
            auto it = lookup.find(morton_encode(x, y, z));
            if (it != lookup.end()) nbrs[c.index].push_back(it->second);
          }
      std::sort(nbrs[c.index].begin(), nbrs[c.index].end());
      if (l == 0) continue;
      for (int pn : topo.neighbors[l - 1][c.parent]) {
        for (int q : tree.levels[l - 1][pn].children) {
          if (cell_distance(c, level[q]) > 1) inter[c.index].push_back(q);
        }
      }
      std::sort(inter[c.index].begin(), inter[c.index].end());
    }
  }
  return topo;
}

Vector to_tree_order(const Vector& v, const std::vector<std::int64_t>& permutation,
                     int block_dim) {
  const auto n = static_cast<Index>(permutation.size());
  if (v.size() != n * block_dim) throw InputError("to_tree_order: size mismatch");
  Vector out(v.size());
  for (Index k = 0; k < n; ++k)
    out.segment(k * block_dim, block_dim) = v.segment(permutation[k] * block_dim, block_dim);
  return out;
}

Vector from_tree_order(const Vector& v, const std::vector<std::int64_t>& permutation,
                       int block_dim) {
  const auto n = static_cast<Index>(permutation.size());
  if (v.size() != n * block_dim) throw InputError("from_tree_order: size mismatch");
  Vector out(v.size());
  for (Index k = 0; k < n; ++k)
    out.segment(permutation[k] * block_dim, block_dim) = v.segment(k * block_dim, block_dim);
  return out;
}

}  // namespace ifmm
