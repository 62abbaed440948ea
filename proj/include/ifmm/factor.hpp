#pragma once

#include <memory>
#include <vector>

#include "ifmm/graph.hpp"
#include "ifmm/lowrank.hpp"

namespace ifmm {

struct FactorOptions {
  double epsilon = 1e-3;
  // Reference for all truncation thresholds; estimated from the graph when <= 0.
  double sigma0 = 0.0;
  Index rsvd_cutoff = 64;
  // Record the spectra of every n-th elimination's fill-ins for the decay study.
  int spectra_stride = 0;
  // Reciprocal condition estimate below which a pivot block is rejected.
  double min_pivot_rcond = 1e-15;
};

struct LevelFillStats {
  int level = 0;
  Index clusters = 0;
  Index dense_updates = 0;
  Index compressed = 0;
  Index dropped = 0;  // compressed to rank 0
  Index rank_sum = 0;
  Index max_rank = 0;
  Index basis_updates = 0;
  Index max_basis_rank = 0;  // largest far-field basis rank when the level is merged
  double mean_basis_rank = 0.0;
  double compress_seconds = 0.0;

  double mean_rank() const { return compressed ? double(rank_sum) / double(compressed) : 0.0; }
};

// Sampled fill-in spectrum: retained rank relative to the block size.
struct SpectrumSample {
  int level = 0;
  bool well_separated = false;
  Index rows = 0, cols = 0;
  Index rank = 0;
  std::vector<double> sigmas;
};

struct FillinStats {
  std::vector<LevelFillStats> levels;
  std::vector<SpectrumSample> spectra;
  Index peak_edges = 0;
  Index cluster_count = 0;
  Index max_far_rank = 0;
  double mean_far_rank = 0.0;
};

struct EliminationTimings {
  double lu_and_triangular_solves = 0.0;
  double matmul_updates = 0.0;
  double lowrank_approximations = 0.0;
  double operator_transfer = 0.0;
};

// A node touched by one elimination step.
struct NodeRef {
  int cluster;
  NodeKind kind;
};

struct EliminationRecord {
  int level = 0;
  int cluster = 0;
  Index x_size = 0;
  Index rank = 0;
  Eigen::PartialPivLU<Matrix> pivot;
  std::vector<std::pair<NodeRef, Matrix>> lower;   // E(row, X_i) for each affected row
  std::vector<std::pair<NodeRef, Matrix>> upper;   // P^{-1} [E(X_i, col); E(Z_i, col)]
};

struct LevelFillStats;
class IFMMFactorization;
LevelFillStats eliminate_level(ExtendedGraph& graph, int level, double threshold,
                               std::vector<EliminationRecord>* log);

class IFMMFactorization {
 public:
  // b and x in the original point order.
  Vector solve(const Vector& b) const;
  Vector solve_tree_order(const Vector& b) const;

  double epsilon() const { return epsilon_; }
  double sigma0() const { return sigma0_; }
  const FillinStats& stats() const { return stats_; }
  const EliminationTimings& timings() const { return timings_; }
  Index dofs() const { return dofs_; }
  const std::vector<EliminationRecord>& records() const { return records_; }
  // Right-hand side left in the top-level system by the factorization's own updates.
  const Vector& top_rhs() const { return top_rhs_; }
  // Top-level right-hand side obtained by replaying the recorded eliminations on b (tree order).
  Vector replay_top_rhs(const Vector& b) const;

 private:
  struct ReplayState;
  void forward(const Vector& b, ReplayState& st) const;
  friend class Factorizer;
  friend IFMMFactorization factorize(ExtendedGraph graph, const FactorOptions& options);
  friend LevelFillStats eliminate_level(ExtendedGraph&, int, double, std::vector<EliminationRecord>*);
  std::shared_ptr<const Hierarchy> hierarchy_;
  int block_dim_ = 1;
  int leaf_level_ = 0;
  int top_level_ = 0;
  Index dofs_ = 0;
  double epsilon_ = 0.0;
  double sigma0_ = 0.0;
  std::vector<EliminationRecord> records_;
  std::vector<std::vector<Index>> x_size_;  // per level, per cluster
  std::vector<std::vector<Index>> rank_;    // final ranks per level
  std::vector<Index> leaf_offset_;
  Eigen::PartialPivLU<Matrix> top_;
  std::vector<Index> top_offset_;
  Vector top_rhs_;
  FillinStats stats_;
  EliminationTimings timings_;
};

// Consumes the graph.
IFMMFactorization factorize(ExtendedGraph graph, const FactorOptions& options);

// Fill-in pieces for one redirection: low-rank factors of E'(k, j) and/or E'(j, k).
struct FillPair {
  int k = 0;
  int j = 0;
  NodeKind k_kind = NodeKind::X;  // row node kind of E'(k, j)
  NodeKind j_kind = NodeKind::X;
  LowRankFactor kj;  // E'(k, j), may be empty
  LowRankFactor jk;  // E'(j, k), may be empty
};

// Step-level API used by factorize; exposed for tests.
class Factorizer {
 public:
  Factorizer(ExtendedGraph& graph, const FactorOptions& options, IFMMFactorization& out);

  void eliminate_cluster(int level, int i);
  LevelFillStats eliminate_level(int level);
  void merge_to_parent(int level);
  void redirect(int level, const std::vector<FillPair>& fills);
  void factor_top();
  double threshold() const { return threshold_; }

 private:
  struct Contribution;
  ExtendedGraph& g_;
  FactorOptions opt_;
  IFMMFactorization& out_;
  double threshold_ = 0.0;
  LevelFillStats* level_stats_ = nullptr;
  LevelFillStats scratch_stats_;
  Index eliminations_ = 0;

  void track_peak();
  void replay_rhs(const EliminationRecord& rec);
};

// Redirects one compressed fill-in pair in place (k_kind/j_kind select the case).
void redirect_fillin(ExtendedGraph& graph, int level, const FillPair& fill, double threshold);
void merge_to_parent(ExtendedGraph& graph, int level);
// Eliminates one level with an absolute compression threshold.
LevelFillStats eliminate_level_with_threshold(ExtendedGraph& graph, int level, double threshold);

}  // namespace ifmm
