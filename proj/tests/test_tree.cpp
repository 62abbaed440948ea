#include <algorithm>
#include <set>

#include "ifmm/tree.hpp"
#include "support.hpp"

using namespace ifmm;

namespace {

bool contains(const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); }

int find_cell(const Octree& t, int level, std::int64_t x, std::int64_t y, std::int64_t z) {
  const auto& lv = t.levels[level];
  for (const auto& c : lv)
    if (c.cell[0] == x && c.cell[1] == y && c.cell[2] == z) return c.index;
  return -1;
}

void check_topology(const Octree& t, const ClusterTopology& top) {
  for (int l = 0; l <= t.depth; ++l) {
    const auto& lv = t.levels[l];
    for (const auto& ci : lv) {
      const auto& N = top.neighbors[l][ci.index];
      const auto& I = top.interactions[l][ci.index];
      CHECK(contains(N, ci.index));
      CHECK(N.size() <= 27);
      CHECK(I.size() <= 189);
      CHECK(std::is_sorted(N.begin(), N.end()));
      for (int j : I) CHECK_FALSE(contains(N, j));
      for (int j : N) CHECK(contains(top.neighbors[l][j], ci.index));
      for (int j : I) CHECK(contains(top.interactions[l][j], ci.index));
      // N u I = children of the parent's neighbors.
      if (l > 0) {
        std::set<int> expect;
        for (int pn : top.neighbors[l - 1][ci.parent])
          for (int ch : t.levels[l - 1][pn].children) expect.insert(ch);
        std::set<int> got(N.begin(), N.end());
        got.insert(I.begin(), I.end());
        CHECK(got == expect);
      }
      // Exactly one classification per same-level pair.
      for (const auto& cj : lv) {
        const bool n = contains(N, cj.index);
        const bool in = contains(I, cj.index);
        const bool coarser = l > 0 && !contains(top.neighbors[l - 1][ci.parent], cj.parent);
        CHECK(int(n) + int(in) + int(coarser) == 1);
        CHECK(n == (cell_distance(ci, cj) <= 1));
      }
    }
  }
}

}  // namespace

TEST_CASE("tree: minimum depth 2 is enforced for small inputs") {
  auto pts = test::grid_centers(4);
  while (pts.size() < 100) pts.push_back({0.01 * double(pts.size() % 7), 0.02, -0.03, std::int64_t(pts.size())});
  REQUIRE(pts.size() == 100);
  auto b = build_octree(pts, 100);
  CHECK(b.tree.depth == 2);
  CHECK(b.tree.leaves().size() == 64);
}

TEST_CASE("tree: cube corners get one leaf each and empty cells are pruned") {
  std::vector<Point3> pts;
  for (int k = 0; k < 8; ++k)
    pts.push_back({(k & 1) ? 1.0 : -1.0, (k & 2) ? 1.0 : -1.0, (k & 4) ? 1.0 : -1.0, k});
  auto b = build_octree(pts, 1);
  CHECK(b.tree.depth == 2);
  REQUIRE(b.tree.leaves().size() == 8);
  for (const auto& leaf : b.tree.leaves()) CHECK(leaf.size() == 1);
}

TEST_CASE("tree: depth rule on a 1e5-point cube") {
  const auto s = cube_uniform(100000, 11);
  auto b = build_octree(s.points, 100);
  // Mean population at depth 3 is about 195 > 100, at depth 4 about 24.
  CHECK(b.tree.depth == 4);
  CHECK(b.tree.leaves().size() == 4096);
}

TEST_CASE("tree: coincident points are rejected") {
  std::vector<Point3> pts(5, Point3{0.3, 0.3, 0.3, 0});
  for (int k = 0; k < 5; ++k) pts[k].global_index = k;
  CHECK_THROWS_AS(build_octree(pts, 2), InputError);
  CHECK_THROWS_AS(build_octree(std::vector<Point3>{}, 2), InputError);
}

TEST_CASE("tree: boundary points fall into the lower cell") {
  std::vector<Point3> pts = {{-1, -1, -1, 0}, {1, 1, 1, 1}, {0, 0, 0, 2}};
  TreeOptions opt;
  opt.fixed_depth = 1;
  opt.min_depth = 0;
  auto b = build_octree(pts, opt);
  for (const auto& c : b.tree.leaves())
    for (auto k = c.point_begin; k < c.point_end; ++k)
      if (b.tree.points[k].global_index == 2) {
        CHECK(c.cell[0] == 0);
        CHECK(c.cell[1] == 0);
        CHECK(c.cell[2] == 0);
      }
}

TEST_CASE("tree: level-1 cells are all mutually adjacent") {
  auto b = build_octree(test::grid_centers(4), 100);
  auto top = compute_topology(b.tree);
  REQUIRE(b.tree.levels[1].size() == 8);
  for (int i = 0; i < 8; ++i) {
    CHECK(top.neighbors[1][i].size() == 8);
    CHECK(top.interactions[1][i].empty());
  }
}

TEST_CASE("tree: corner cluster of a full 4x4x4 grid") {
  auto b = build_octree(test::grid_centers(4), 100);
  auto top = compute_topology(b.tree);
  const int c = find_cell(b.tree, 2, 0, 0, 0);
  REQUIRE(c >= 0);
  CHECK(top.neighbors[2][c].size() == 8);
  CHECK(top.interactions[2][c].size() == 56);
}

TEST_CASE("tree: interior cluster reaches 27 neighbors and 189 interactions") {
  TreeOptions opt;
  opt.fixed_depth = 3;
  auto b = build_octree(test::grid_centers(8), opt);
  auto top = compute_topology(b.tree);
  const int c = find_cell(b.tree, 3, 3, 3, 3);
  REQUIRE(c >= 0);
  CHECK(top.neighbors[3][c].size() == 27);
  CHECK(top.interactions[3][c].size() == 189);
}

TEST_CASE("tree: structural invariants and exhaustive pair classification up to depth 3") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (int depth : {2, 3}) {
      const auto s = seed == 3 ? sphere_surface(700, seed) : cube_uniform(300 * int(seed), seed);
      TreeOptions opt;
      opt.fixed_depth = depth;
      auto b = build_octree(s.points, opt);
      const auto& t = b.tree;
      CAPTURE(seed);
      CAPTURE(depth);
      // Each input point in exactly one leaf.
      std::vector<int> seen(s.points.size(), 0);
      for (const auto& leaf : t.leaves()) {
        CHECK(leaf.size() > 0);
        for (auto k = leaf.point_begin; k < leaf.point_end; ++k) ++seen[t.points[k].global_index];
      }
      CHECK(std::all_of(seen.begin(), seen.end(), [](int v) { return v == 1; }));
      // Parents own the union of their children; widths halve per level.
      for (int l = 0; l < t.depth; ++l)
        for (const auto& p : t.levels[l]) {
          std::int64_t lo = p.point_end, hi = p.point_begin, total = 0;
          for (int ch : p.children) {
            const auto& c = t.levels[l + 1][ch];
            CHECK(c.parent == p.index);
            lo = std::min(lo, c.point_begin);
            hi = std::max(hi, c.point_end);
            total += c.size();
          }
          CHECK(lo == p.point_begin);
          CHECK(hi == p.point_end);
          CHECK(total == p.size());
        }
      for (int l = 0; l <= t.depth; ++l)
        for (const auto& c : t.levels[l])
          CHECK(c.half_width == doctest::Approx(t.root_half_width / double(1 << l)));
      check_topology(t, compute_topology(t));
    }
  }
}

TEST_CASE("tree: permutation round trip") {
  const auto s = cube_uniform(500, 4);
  auto b = build_octree(s.points, 20);
  std::vector<std::int64_t> sorted = b.permutation;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t k = 0; k < sorted.size(); ++k) CHECK(sorted[k] == std::int64_t(k));
  for (int bd : {1, 3}) {
    const Vector v = test::gaussian(500 * bd, 1, 9);
    const Vector t = to_tree_order(v, b.permutation, bd);
    CHECK(from_tree_order(t, b.permutation, bd) == v);
    for (std::size_t k = 0; k < 500; ++k)
      CHECK(t(Index(k) * bd) == v(b.permutation[k] * bd));
  }
}

TEST_CASE("tree: morton interleaving") {
  CHECK(morton_encode(0, 0, 0) == 0);
  CHECK(morton_encode(1, 0, 0) == 1);
  CHECK(morton_encode(0, 1, 0) == 2);
  CHECK(morton_encode(0, 0, 1) == 4);
  CHECK(morton_encode(3, 3, 3) == 63);
}
