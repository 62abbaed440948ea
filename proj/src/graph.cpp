#include "ifmm/graph.hpp"

#include <json.hpp>

#include "ifmm/lowrank.hpp"

namespace ifmm {

bool ExtendedGraph::adjacent(int level, int a, int b) const {
  const auto& lv = hierarchy->tree.levels[level];
  return cell_distance(lv[a], lv[b]) <= 1;
}

int ExtendedGraph::parent(int level, int i) const { return hierarchy->tree.levels[level][i].parent; }

const std::vector<int>& ExtendedGraph::children(int level, int i) const {
  return hierarchy->tree.levels[level][i].children;
}

Index ExtendedGraph::cluster_count() const {
  Index n = 0;
  for (int l = top_level; l <= leaf_level; ++l) n += static_cast<Index>(levels[l].clusters.size());
  return n;
}

namespace {

BlockMap& select_map(GraphCluster& c, NodeKind row, NodeKind col) {
  if (row == NodeKind::X) return col == NodeKind::X ? c.xx : c.xy;
  return col == NodeKind::X ? c.yx : c.yy;
}

Index node_size(const GraphCluster& c, NodeKind kind) {
  return kind == NodeKind::X ? c.x_size : c.rank;
}

}  // namespace

void ExtendedGraph::add_block(int level, NodeKind row_kind, int row, NodeKind col_kind, int col,
                              const Matrix& block) {
  auto& rc = at(level, row);
  auto& cc = at(level, col);
  if (block.rows() != node_size(rc, row_kind) || block.cols() != node_size(cc, col_kind))
    throw InputError("add_block: inconsistent block size");
  auto& fwd = select_map(rc, row_kind, col_kind);
  auto it = fwd.find(col);
  if (it == fwd.end()) {
    fwd.emplace(col, block);
    ++edge_count;
  } else {
    it->second += block;
  }
  if (row == col && row_kind == col_kind) return;
  auto& back = select_map(cc, col_kind, row_kind);
  if (!back.count(row)) {
    back.emplace(row, Matrix::Zero(block.cols(), block.rows()));
    ++edge_count;
  }
}

Index ExtendedGraph::count_edges() const {
  Index n = 0;
  if (dense_only()) {
    for (const auto& c : levels[leaf_level].clusters) n += static_cast<Index>(c.xx.size());
    return n;
  }
  for (int l = top_level; l <= current_level; ++l) {
    for (const auto& c : levels[l].clusters) {
      n += static_cast<Index>(c.xx.size() + c.xy.size() + c.yx.size() + c.yy.size());
      const bool has_z = l < current_level || !c.eliminated;
      if (has_z) n += 2;                                    // Z-Y identities
      if (l == current_level && !c.eliminated) n += 2;      // U, Vt
      if (l > top_level) n += 2;                            // Up, Vpt
    }
  }
  return n;
}

ExtendedGraph assemble_extended_graph(const H2Operators& ops, const Vector& b) {
  if (b.size() != ops.dofs()) throw InputError("assemble_extended_graph: rhs size mismatch");
  ExtendedGraph g;
  g.hierarchy = ops.hierarchy;
  g.block_dim = ops.block_dim;
  const int L = ops.depth();
  g.leaf_level = L;
  g.current_level = L;
  g.top_level = L >= 2 ? 2 : L;
  g.levels.resize(L + 1);
  const auto& tree = ops.hierarchy->tree;

  for (int l = g.top_level; l <= L; ++l) {
    auto& clusters = g.levels[l].clusters;
    clusters.resize(tree.levels[l].size());
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      auto& c = clusters[i];
      if (L < 2) continue;
      const auto& lev = ops.levels[l];
      c.rank = lev.rank[i];
      for (const auto& [q, K] : lev.coupling[i]) c.yy.emplace(q, K);
      if (l > 2) {
        c.Up = lev.transfer_U[i];
        c.Vpt = lev.transfer_V[i].transpose();
      }
      c.wU = lev.weight_U[i];
      c.wV = lev.weight_V[i];
      c.by = Vector::Zero(c.rank);
    }
  }
  auto& leaves = g.levels[L].clusters;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    auto& c = leaves[i];
    const Index off = ops.leaf_offset[i];
    c.x_size = ops.leaf_offset[i + 1] - off;
    c.bx = b.segment(off, c.x_size);
    for (const auto& [j, S] : ops.near[i]) c.xx.emplace(j, S);
    if (L >= 2) {
      c.U = ops.levels[L].U[i];
      c.Vt = ops.levels[L].V[i].transpose();
    }
  }
  for (int l = g.top_level; l < L; ++l)
    for (auto& c : g.levels[l].clusters) c.U = Matrix(0, c.rank), c.Vt = Matrix(c.rank, 0);
  g.edge_count = g.count_edges();
  return g;
}

const GraphNode* NodeLayout::find(int level, int cluster, NodeKind kind) const {
  auto it = lookup.find({level, cluster, static_cast<int>(kind)});
  return it == lookup.end() ? nullptr : &nodes[it->second];
}

NodeLayout active_layout(const ExtendedGraph& g) {
  NodeLayout layout;
  auto push = [&](int l, int i, NodeKind k, Index size) {
    layout.lookup[{l, i, static_cast<int>(k)}] = layout.nodes.size();
    layout.nodes.push_back({l, i, k, layout.total, size});
    layout.total += size;
  };
  const int cur = g.current_level;
  const auto& clusters = g.levels[cur].clusters;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const auto& c = clusters[i];
    const int id = static_cast<int>(i);
    if (g.dense_only()) {
      push(cur, id, NodeKind::X, c.x_size);
      continue;
    }
    if (!c.eliminated) {
      push(cur, id, NodeKind::X, c.x_size);
      push(cur, id, NodeKind::Z, c.rank);
    }
    push(cur, id, NodeKind::Y, c.rank);
  }
  for (int l = cur - 1; l >= g.top_level; --l) {
    const auto& up = g.levels[l].clusters;
    for (std::size_t i = 0; i < up.size(); ++i) {
      push(l, static_cast<int>(i), NodeKind::Z, up[i].rank);
      push(l, static_cast<int>(i), NodeKind::Y, up[i].rank);
    }
  }
  return layout;
}

void visit_edges(const ExtendedGraph& g, const NodeLayout& layout, const EdgeVisitor& fn) {
  const int cur = g.current_level;
  auto node = [&](int l, int i, NodeKind k) -> const GraphNode& {
    const GraphNode* n = layout.find(l, i, k);
    if (!n) throw InputError("visit_edges: edge to a missing node");
    return *n;
  };
  for (int l = g.top_level; l <= cur; ++l) {
    const auto& clusters = g.levels[l].clusters;
    for (std::size_t ii = 0; ii < clusters.size(); ++ii) {
      const int i = static_cast<int>(ii);
      const auto& c = clusters[ii];
      const bool active_x = l == cur && (g.dense_only() || !c.eliminated);
      if (active_x) {
        const auto& xi = node(l, i, NodeKind::X);
        for (const auto& [j, B] : c.xx) fn(xi, node(l, j, NodeKind::X), &B, 1.0);
        for (const auto& [j, B] : c.xy) fn(xi, node(l, j, NodeKind::Y), &B, 1.0);
      }
      if (g.dense_only()) continue;
      const bool has_z = l < cur || !c.eliminated;
      const auto& yi = node(l, i, NodeKind::Y);
      if (active_x) {
        const auto& xi = node(l, i, NodeKind::X);
        const auto& zi = node(l, i, NodeKind::Z);
        fn(xi, zi, &c.U, 1.0);
        fn(zi, xi, &c.Vt, 1.0);
      }
      if (has_z) {
        const auto& zi = node(l, i, NodeKind::Z);
        fn(zi, yi, nullptr, -1.0);
        fn(yi, zi, nullptr, -1.0);
      }
      for (const auto& [j, B] : c.yy) fn(yi, node(l, j, NodeKind::Y), &B, 1.0);
      for (const auto& [j, B] : c.yx) fn(yi, node(l, j, NodeKind::X), &B, 1.0);
      if (l > g.top_level) {
        const auto& zp = node(l - 1, g.parent(l, i), NodeKind::Z);
        fn(yi, zp, &c.Up, 1.0);
        fn(zp, yi, &c.Vpt, 1.0);
      }
    }
  }
}

Vector graph_apply(const ExtendedGraph& g, const NodeLayout& layout, const Vector& v,
                   bool transpose) {
  if (v.size() != layout.total) throw InputError("graph_apply: size mismatch");
  Vector out = Vector::Zero(layout.total);
  visit_edges(g, layout, [&](const GraphNode& r, const GraphNode& c, const Matrix* B, double coef) {
    if (!transpose) {
      if (B)
        out.segment(r.offset, r.size).noalias() += *B * v.segment(c.offset, c.size);
      else
        out.segment(r.offset, r.size) += coef * v.segment(c.offset, c.size);
    } else {
      if (B)
        out.segment(c.offset, c.size).noalias() += B->transpose() * v.segment(r.offset, r.size);
      else
        out.segment(c.offset, c.size) += coef * v.segment(r.offset, r.size);
    }
  });
  return out;
}

Matrix graph_dense(const ExtendedGraph& g, const NodeLayout& layout) {
  Matrix E = Matrix::Zero(layout.total, layout.total);
  visit_edges(g, layout, [&](const GraphNode& r, const GraphNode& c, const Matrix* B, double coef) {
    if (B)
      E.block(r.offset, c.offset, r.size, c.size) += *B;
    else
      E.block(r.offset, c.offset, r.size, c.size).diagonal().array() += coef;
  });
  return E;
}

Vector graph_rhs(const ExtendedGraph& g, const NodeLayout& layout) {
  Vector rhs = Vector::Zero(layout.total);
  for (const auto& n : layout.nodes) {
    if (n.level != g.current_level) continue;
    const auto& c = g.at(n.level, n.cluster);
    if (n.kind == NodeKind::X) rhs.segment(n.offset, n.size) = c.bx;
    if (n.kind == NodeKind::Y && c.by.size() == n.size) rhs.segment(n.offset, n.size) = c.by;
  }
  return rhs;
}

double estimate_sigma0(const ExtendedGraph& g) {
  const NodeLayout layout = active_layout(g);
  const Index n = layout.total;
  auto apply = [&](const Matrix& X, bool t) {
    Matrix Y(n, X.cols());
    for (Index k = 0; k < X.cols(); ++k) Y.col(k) = graph_apply(g, layout, X.col(k), t);
    return Y;
  };
  RandomizedSvdOptions opt;
  opt.initial_rank = 1;
  opt.max_rank = 1;
  const LowRankFactor f =
      randomized_svd([&](const Matrix& X) { return apply(X, false); },
                     [&](const Matrix& X) { return apply(X, true); }, n, n, 0.0, opt);
  return f.rank() ? f.sigma(0) : 0.0;
}

std::string graph_pattern_json(const ExtendedGraph& g) {
  const NodeLayout layout = active_layout(g);
  nlohmann::json nodes = nlohmann::json::array(), edges = nlohmann::json::array();
  auto name = [](NodeKind k) { return k == NodeKind::X ? "x" : (k == NodeKind::Z ? "z" : "y"); };
  for (std::size_t k = 0; k < layout.nodes.size(); ++k) {
    const auto& n = layout.nodes[k];
    nodes.push_back({{"id", k}, {"level", n.level}, {"cluster", n.cluster}, {"kind", name(n.kind)},
                     {"size", n.size}});
  }
  visit_edges(g, layout, [&](const GraphNode& r, const GraphNode& c, const Matrix* B, double coef) {
    const auto rid = layout.lookup.at({r.level, r.cluster, static_cast<int>(r.kind)});
    const auto cid = layout.lookup.at({c.level, c.cluster, static_cast<int>(c.kind)});
    edges.push_back({{"row", rid}, {"col", cid},
                     {"type", std::string(name(r.kind)) + "-" + name(c.kind)},
                     {"identity", B == nullptr}, {"coef", B ? 1.0 : coef}});
  });
  nlohmann::json out = {{"leaf_level", g.leaf_level}, {"top_level", g.top_level},
                        {"current_level", g.current_level}, {"nodes", nodes}, {"edges", edges}};
  return out.dump();
}

}  // namespace ifmm
