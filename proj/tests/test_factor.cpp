#include <algorithm>
#include <cmath>

#include "ifmm/factor.hpp"
#include "ifmm/refcheck.hpp"
#include "support.hpp"

using namespace ifmm;
using test::rel_err;

namespace {

std::shared_ptr<const Hierarchy> hierarchy_of(const std::vector<Point3>& pts, int leaf, int depth = -1) {
  TreeOptions t;
  t.leaf_target = leaf;
  if (depth >= 0) {
    t.fixed_depth = depth;
    t.min_depth = std::min(depth, 2);
  }
  return make_hierarchy(pts, t);
}

H2Operators weighted_ops(const std::shared_ptr<const Hierarchy>& h, const Kernel& k, int n,
                         double basis_eps) {
  ChebyshevOptions co;
  co.nodes = n;
  co.basis_epsilon = basis_eps;
  H2Operators ops = chebyshev_operators(h, k, co);
  initialize_weights(ops);
  return ops;
}

// X-node part of the solution of the active extended system, scattered by leaf.
Vector leaf_solution(const ExtendedGraph& g, const std::vector<Index>& leaf_offset, Index dofs,
                     std::vector<bool>* present = nullptr) {
  const NodeLayout layout = active_layout(g);
  const Vector sol = graph_dense(g, layout).partialPivLu().solve(graph_rhs(g, layout));
  Vector x = Vector::Zero(dofs);
  if (present) present->assign(leaf_offset.size() - 1, false);
  for (const auto& n : layout.nodes)
    if (n.level == g.leaf_level && n.kind == NodeKind::X) {
      x.segment(leaf_offset[n.cluster], n.size) = sol.segment(n.offset, n.size);
      if (present) (*present)[n.cluster] = true;
    }
  return x;
}

void check_pattern(const ExtendedGraph& g, int l) {
  CHECK(g.edge_count == g.count_edges());
  const auto& cs = g.levels[l].clusters;
  for (int i = 0; i < int(cs.size()); ++i) {
    for (const auto& [q, B] : cs[i].xx) CHECK(g.adjacent(l, i, q));
    for (const auto& [q, B] : cs[i].xy) CHECK(g.adjacent(l, i, q));
    for (const auto& [q, B] : cs[i].yx) CHECK(g.adjacent(l, i, q));
  }
}

int find_cell(const Octree& t, int level, int x, int y, int z) {
  for (const auto& c : t.levels[level])
    if (c.cell[0] == x && c.cell[1] == y && c.cell[2] == z) return c.index;
  return -1;
}

}  // namespace

TEST_CASE("factor: tiny epsilon reproduces the H2 solve") {
  struct Case {
    const char* name;
    Scene scene;
    Kernel kernel;
    int leaf;
    int depth;
  };
  std::vector<Case> cases;
  cases.push_back({"cube depth 2", cube_uniform(400, 1), benchmark_kernel(1e-2), 10, 2});
  cases.push_back({"cube depth 3", cube_uniform(600, 2), benchmark_kernel(1e-2), 5, 3});
  cases.push_back({"sphere depth 3", sphere_surface(800, 3), benchmark_kernel(1e-2), 10, 3});
  cases.push_back({"rpy depth 2", sphere_surface(200, 4), rpy_kernel(0.01), 5, 2});
  for (const auto& c : cases) {
    CAPTURE(c.name);
    auto h = hierarchy_of(c.scene.points, c.leaf, c.depth);
    const H2Operators ops = weighted_ops(h, c.kernel, 3, 1e-14);
    const Index n = ops.dofs();
    const Vector b = test::gaussian(n, 1, 7);
    FactorOptions fo;
    fo.epsilon = 1e-14;
    const IFMMFactorization f = factorize(assemble_extended_graph(ops, b), fo);
    const Vector x = f.solve_tree_order(b);
    const Vector expect = h2_dense(ops).partialPivLu().solve(b);
    CHECK(rel_err(x, expect) < 1e-8);
    CHECK(rel_err(f.replay_top_rhs(b), f.top_rhs()) < 1e-12);
  }
}

TEST_CASE("factor: epsilon 1e-3 with n = 4 solves the true system") {
  const Scene s = cube_uniform(2000, 5);
  const Kernel k = benchmark_kernel(1e-3);
  auto h = hierarchy_of(s.points, 100);
  const H2Operators ops = weighted_ops(h, k, 4, 1e-3);
  const Matrix A = ref::assemble_matrix(s.points, k);
  const Vector x_true = ref::random_solution(2000, 3);
  const Vector b = A * x_true;
  FactorOptions fo;
  fo.epsilon = 1e-3;
  const Vector b_tree = to_tree_order(b, h->permutation, 1);
  const IFMMFactorization f = factorize(assemble_extended_graph(ops, b_tree), fo);
  const Vector x = f.solve(b);
  CHECK(rel_err(A * x, b) <= 1e-3);
  CHECK(rel_err(x, x_true) <= 1e-2);
  CHECK(f.sigma0() > 0.0);
  CHECK(f.stats().peak_edges >= f.stats().cluster_count);
}

TEST_CASE("factor: single leaf is an exact dense solve") {
  const Scene s = cube_uniform(60, 9);
  const Kernel k = benchmark_kernel(0.05);
  auto h = hierarchy_of(s.points, 100, 0);
  REQUIRE(h->depth() == 0);
  ChebyshevOptions co;
  const H2Operators ops = chebyshev_operators(h, k, co);
  const Matrix A = ref::assemble_matrix(s.points, k);
  const Vector b = test::gaussian(60, 1, 2);
  const IFMMFactorization f =
      factorize(assemble_extended_graph(ops, to_tree_order(b, h->permutation, 1)), FactorOptions{});
  CHECK(rel_err(A * f.solve(b), b) < 1e-12);
}

TEST_CASE("factor: solve is linear, repeatable and validates sizes") {
  const Scene s = sphere_surface(1000, 6);
  auto h = hierarchy_of(s.points, 40);
  const H2Operators ops = weighted_ops(h, benchmark_kernel(1e-3), 3, 1e-3);
  const IFMMFactorization f = factorize(assemble_extended_graph(ops, Vector::Zero(1000)), FactorOptions{});
  CHECK(f.solve(Vector::Zero(1000)).norm() == 0.0);
  const Vector b1 = test::gaussian(1000, 1, 1), b2 = test::gaussian(1000, 1, 2);
  const Vector x1 = f.solve(b1), x2 = f.solve(b2);
  CHECK(rel_err(f.solve(2.0 * b1 - 3.0 * b2), 2.0 * x1 - 3.0 * x2) < 1e-12);
  CHECK(f.solve(b1) == x1);
  CHECK_THROWS_AS(f.solve(Vector::Zero(999)), InputError);
  CHECK_THROWS_AS(f.replay_top_rhs(Vector::Zero(3)), InputError);
  FactorOptions bad;
  bad.epsilon = 1.5;
  CHECK_THROWS_AS(factorize(assemble_extended_graph(ops, Vector::Zero(1000)), bad), InputError);
}

TEST_CASE("factor: lossless elimination steps preserve the remaining solution") {
  const Scene s = cube_uniform(300, 8);
  auto h = hierarchy_of(s.points, 5, 2);
  const H2Operators ops = weighted_ops(h, benchmark_kernel(2e-2), 3, 1e-14);
  const Vector b = test::gaussian(300, 1, 4);
  ExtendedGraph g = assemble_extended_graph(ops, b);
  const Vector before = leaf_solution(g, ops.leaf_offset, 300);

  FactorOptions fo;
  fo.epsilon = 1e-14;
  fo.sigma0 = estimate_sigma0(g);
  IFMMFactorization out;
  Factorizer f(g, fo, out);
  const int count = int(g.levels[2].clusters.size());
  for (int i : {0, count / 2, count - 1, 3}) {
    f.eliminate_cluster(2, i);
    check_pattern(g, 2);
    std::vector<bool> present;
    const Vector after = leaf_solution(g, ops.leaf_offset, 300, &present);
    for (int c = 0; c < count; ++c) {
      if (!present[c]) continue;
      const auto seg = [&](const Vector& v) {
        return v.segment(ops.leaf_offset[c], ops.leaf_offset[c + 1] - ops.leaf_offset[c]);
      };
      CHECK((seg(after) - seg(before)).norm() <= 1e-8 * before.norm());
    }
  }
}

TEST_CASE("factor: redirecting a far fill matches adding it densely") {
  const Scene s = cube_uniform(400, 10);
  auto h = hierarchy_of(s.points, 10, 2);
  const H2Operators ops = weighted_ops(h, benchmark_kernel(1e-2), 2, 1e-14);
  const Vector b = test::gaussian(400, 1, 6);
  const ExtendedGraph g0 = assemble_extended_graph(ops, b);
  const double scale = estimate_sigma0(g0);
  const auto& leaves = h->tree.levels[2];
  int k = -1, j = -1;
  for (const auto& a : leaves)
    for (const auto& c : leaves)
      if (k < 0 && cell_distance(a, c) >= 2) {
        k = a.index;
        j = c.index;
      }
  REQUIRE(k >= 0);
  FillPair fill;
  fill.k = k;
  fill.j = j;
  const Index mk = g0.at(2, k).x_size, mj = g0.at(2, j).x_size;
  fill.kj = truncated_svd(0.1 * scale * test::gaussian(mk, 2, 1) * test::gaussian(2, mj, 2) / double(mk), 1e-10 * scale);
  fill.jk = truncated_svd(0.1 * scale * test::gaussian(mj, 1, 3) * test::gaussian(1, mk, 4) / double(mj), 1e-10 * scale);
  REQUIRE(fill.kj.rank() == 2);
  REQUIRE(fill.jk.rank() == 1);

  ExtendedGraph dense = g0;
  dense.add_block(2, NodeKind::X, k, NodeKind::X, j, fill.kj.dense());
  dense.add_block(2, NodeKind::X, j, NodeKind::X, k, fill.jk.dense());
  ExtendedGraph routed = g0;
  redirect_fillin(routed, 2, fill, 1e-14 * scale);
  check_pattern(routed, 2);
  CHECK(routed.at(2, k).rank >= g0.at(2, k).rank);
  const Vector xd = leaf_solution(dense, ops.leaf_offset, 400);
  const Vector xr = leaf_solution(routed, ops.leaf_offset, 400);
  CHECK(rel_err(xr, xd) < 1e-9);
  CHECK(rel_err(xd, leaf_solution(g0, ops.leaf_offset, 400)) > 1e-6);

  ExtendedGraph untouched = g0;
  FillPair none;
  none.k = k;
  none.j = j;
  none.kj = LowRankFactor::empty(mk, mj);
  none.jk = LowRankFactor::empty(mj, mk);
  redirect_fillin(untouched, 2, none, 1e-14 * scale);
  CHECK(rel_err(leaf_solution(untouched, ops.leaf_offset, 400), leaf_solution(g0, ops.leaf_offset, 400)) < 1e-12);
}

TEST_CASE("factor: merging tiles the parent from the children's Y couplings") {
  const Scene s = cube_uniform(1500, 11);
  auto h = hierarchy_of(s.points, 5, 3);
  const H2Operators ops = weighted_ops(h, benchmark_kernel(1e-2), 2, 1e-6);
  ExtendedGraph g = assemble_extended_graph(ops, test::gaussian(1500, 1, 1));
  FactorOptions fo;
  fo.sigma0 = estimate_sigma0(g);
  IFMMFactorization out;
  Factorizer f(g, fo, out);
  f.eliminate_level(3);
  std::vector<GraphCluster> snap = g.levels[3].clusters;
  f.merge_to_parent(3);
  CHECK(g.current_level == 2);
  CHECK(g.levels[3].merged);
  CHECK(g.edge_count == g.count_edges());
  const auto& tree = h->tree;
  for (const auto& p : tree.levels[2]) {
    const auto& cp = g.at(2, p.index);
    std::vector<Index> off;
    Index total = 0;
    for (int c : p.children) {
      off.push_back(total);
      total += snap[c].rank;
    }
    CHECK(cp.x_size == total);
    for (std::size_t a = 0; a < p.children.size(); ++a) {
      const int c = p.children[a];
      CHECK(cp.bx.segment(off[a], snap[c].rank) == snap[c].by);
      for (const auto& [c2, K] : snap[c].yy) {
        const int q = tree.levels[3][c2].parent;
        const auto& siblings = tree.levels[2][q].children;
        const auto pos = std::find(siblings.begin(), siblings.end(), c2) - siblings.begin();
        Index o2 = 0;
        for (std::ptrdiff_t t = 0; t < pos; ++t) o2 += snap[siblings[t]].rank;
        REQUIRE(cp.xx.count(q) == 1);
        CHECK(cp.xx.at(q).block(off[a], o2, K.rows(), K.cols()) == K);
      }
    }
  }
  CHECK_THROWS_AS(merge_to_parent(g, 3), InputError);
}

TEST_CASE("factor: a threshold above every fill drops all compressed pieces") {
  const Scene s = cube_uniform(800, 12);
  auto h = hierarchy_of(s.points, 10, 2);
  const H2Operators ops = weighted_ops(h, benchmark_kernel(1e-2), 2, 1e-6);
  ExtendedGraph g = assemble_extended_graph(ops, Vector::Zero(800));
  const LevelFillStats st = eliminate_level_with_threshold(g, 2, 1e30);
  CHECK(st.compressed > 0);
  CHECK(st.dropped == st.compressed);
  CHECK(st.rank_sum == 0);
  CHECK(st.dense_updates > 0);
  for (const auto& c : g.levels[2].clusters) CHECK(c.eliminated);
}

TEST_CASE("factor: fill-in sampling separates near and well-separated pairs") {
  auto pts = test::grid_centers(4);
  auto h = hierarchy_of(pts, 1, 2);
  const H2Operators ops = weighted_ops(h, benchmark_kernel(0.05), 2, 1e-10);
  const auto& tree = h->tree;
  for (int corner : {0, 1}) {
    ExtendedGraph g = assemble_extended_graph(ops, Vector::Zero(Index(pts.size())));
    FactorOptions fo;
    fo.sigma0 = estimate_sigma0(g);
    fo.spectra_stride = 1;
    IFMMFactorization out;
    Factorizer f(g, fo, out);
    const int i = corner ? find_cell(tree, 2, 0, 0, 0) : find_cell(tree, 2, 1, 1, 1);
    REQUIRE(i >= 0);
    f.eliminate_cluster(2, i);
    const auto& N = h->topology.neighbors[2][i];
    Index far = 0, near = 0;
    for (int a : N)
      for (int c : N)
        if (a != i && c != i && a != c)
          ++(cell_distance(tree.levels[2][a], tree.levels[2][c]) >= 2 ? far : near);
    Index got_far = 0, got_near = 0;
    for (const auto& sp : out.stats().spectra) ++(sp.well_separated ? got_far : got_near);
    CAPTURE(corner);
    CHECK(got_far == far);
    CHECK(got_near == near);
    if (corner) CHECK(far == 0);
    else CHECK(far > 0);
  }
}

TEST_CASE("factor: well-separated fill-ins decay faster than near fill-ins") {
  const Scene s = cube_uniform(2000, 14);
  auto h = hierarchy_of(s.points, 30, 2);
  const H2Operators ops = weighted_ops(h, benchmark_kernel(1e-3), 3, 1e-3);
  FactorOptions fo;
  fo.epsilon = 1e-3;
  fo.spectra_stride = 4;
  const IFMMFactorization f = factorize(assemble_extended_graph(ops, Vector::Zero(2000)), fo);
  double far = 0, near = 0;
  Index nf = 0, nn = 0;
  for (const auto& sp : f.stats().spectra) {
    // Numerical rank relative to the block's own largest singular value.
    Index rank = 0;
    for (double v : sp.sigmas) rank += v > 1e-6 * sp.sigmas.front();
    const double ratio = double(rank) / double(std::min(sp.rows, sp.cols));
    if (sp.well_separated) {
      far += ratio;
      ++nf;
    } else {
      near += ratio;
      ++nn;
    }
  }
  REQUIRE(nf > 0);
  REQUIRE(nn > 0);
  CHECK(far / double(nf) < near / double(nn));
}

TEST_CASE("factor: singular pivot blocks are reported") {
  const Scene s = cube_uniform(500, 15);
  auto h = hierarchy_of(s.points, 20, 2);
  const Kernel ones("ones", 1, [](const Point3&, const Point3&, double* out) { *out = 1.0; }, {});
  const H2Operators ops = weighted_ops(h, ones, 1, 1e-12);
  FactorOptions fo;
  fo.sigma0 = 1.0;
  CHECK_THROWS_AS(factorize(assemble_extended_graph(ops, Vector::Zero(500)), fo), SingularPivotError);
}

TEST_CASE("factor: edges per cluster and far-field ranks stay bounded as N grows") {
  std::vector<double> ratio;
  std::vector<Index> ranks;
  for (int n : {1000, 4000, 16000}) {
    const Scene s = sphere_surface(n, 16);
    auto h = hierarchy_of(s.points, 100);
    const H2Operators ops =
        weighted_ops(h, benchmark_kernel(scaled_d(1e-3, n, -0.5)), 2, 1e-3);
    FactorOptions fo;
    fo.epsilon = 1e-3;
    const IFMMFactorization f = factorize(assemble_extended_graph(ops, Vector::Zero(n)), fo);
    ratio.push_back(double(f.stats().peak_edges) / double(f.stats().cluster_count));
    ranks.push_back(f.stats().max_far_rank);
  }
  // Per cluster: 27 X-row blocks, 27 Y-to-X blocks, 27 + 189 Y couplings and 6 fixed links.
  for (double r : ratio) CHECK(r <= 276.0);
  CHECK(*std::max_element(ratio.begin(), ratio.end()) <= 2.0 * *std::min_element(ratio.begin(), ratio.end()));
  CHECK(double(ranks.back()) <= 2.0 * double(ranks.front()));
}
