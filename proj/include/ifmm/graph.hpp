#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ifmm/h2.hpp"

namespace ifmm {

// Row-side adjacency: neighbor cluster -> dense block, ordered for determinism.
using BlockMap = std::map<int, Matrix>;

enum class NodeKind { X, Z, Y };

// One cluster at one level. Node sizes: |X| = x_size, |Z| = |Y| = rank.
struct GraphCluster {
  Index x_size = 0;
  Index rank = 0;
  bool eliminated = false;
  Matrix U;    // E(X_i, Z_i)
  Matrix Vt;   // E(Z_i, X_i)
  Matrix Up;   // E(Y_i, Z_parent)
  Matrix Vpt;  // E(Z_parent, Y_i)
  Vector wU, wV;
  BlockMap xx;  // E(X_i, X_j)
  BlockMap xy;  // E(X_i, Y_j), j eliminated
  BlockMap yx;  // E(Y_i, X_j), i eliminated
  BlockMap yy;  // E(Y_i, Y_j)
  Vector bx, by;
};

struct GraphLevel {
  std::vector<GraphCluster> clusters;
  bool merged = false;  // level's Y nodes now live in the parent X nodes
};

struct ExtendedGraph {
  std::shared_ptr<const Hierarchy> hierarchy;
  int block_dim = 1;
  int leaf_level = 0;
  int top_level = 0;      // 2, or the leaf level when the tree has no far field
  int current_level = 0;  // lowest level still holding X nodes
  std::vector<GraphLevel> levels;
  Index edge_count = 0;

  GraphCluster& at(int level, int i) { return levels[level].clusters[i]; }
  const GraphCluster& at(int level, int i) const { return levels[level].clusters[i]; }
  bool dense_only() const { return leaf_level < 2; }
  bool adjacent(int level, int a, int b) const;
  int parent(int level, int i) const;
  const std::vector<int>& children(int level, int i) const;
  Index cluster_count() const;

  // Inserts or accumulates into a row map, keeping the transposed position present.
  void add_block(int level, NodeKind row_kind, int row, NodeKind col_kind, int col,
                 const Matrix& block);
  Index count_edges() const;
};

ExtendedGraph assemble_extended_graph(const H2Operators& ops, const Vector& b_tree_order);

// Node layout of the active system: every node still present, in a fixed order.
struct GraphNode {
  int level;
  int cluster;
  NodeKind kind;
  Index offset;
  Index size;
};

struct NodeLayout {
  std::vector<GraphNode> nodes;
  Index total = 0;
  std::map<std::tuple<int, int, int>, std::size_t> lookup;  // (level, cluster, kind)

  const GraphNode* find(int level, int cluster, NodeKind kind) const;
};

NodeLayout active_layout(const ExtendedGraph& g);

// Calls fn(row_node, col_node, block) for every stored block. Identity couplings
// are passed with block == nullptr and coefficient `coef`.
using EdgeVisitor =
    std::function<void(const GraphNode& row, const GraphNode& col, const Matrix* block, double coef)>;
void visit_edges(const ExtendedGraph& g, const NodeLayout& layout, const EdgeVisitor& fn);

Vector graph_apply(const ExtendedGraph& g, const NodeLayout& layout, const Vector& v,
                   bool transpose = false);
Matrix graph_dense(const ExtendedGraph& g, const NodeLayout& layout);
Vector graph_rhs(const ExtendedGraph& g, const NodeLayout& layout);

double estimate_sigma0(const ExtendedGraph& g);

// JSON text describing node sizes and edge keys.
std::string graph_pattern_json(const ExtendedGraph& g);

}  // namespace ifmm
