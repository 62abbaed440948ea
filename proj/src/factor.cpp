#include "ifmm/factor.hpp"

#include <algorithm>
#include <chrono>
#include <map>

namespace ifmm {

namespace {

using Clock = std::chrono::steady_clock;

class Timer {
 public:
  explicit Timer(double& sink) : sink_(sink), start_(Clock::now()) {}
  ~Timer() { sink_ += std::chrono::duration<double>(Clock::now() - start_).count(); }
  Timer(const Timer&) = delete;
  Timer& operator=(const Timer&) = delete;

 private:
  double& sink_;
  Clock::time_point start_;
};

// One direction of a compressed fill-in: E'(row, col) ~= f.
struct Piece {
  int row;
  NodeKind row_kind;
  int col;
  NodeKind col_kind;
  LowRankFactor f;
};

Matrix hcat_bases(const std::vector<const Matrix*>& parts, Index rows) {
  Index cols = 0;
  for (const auto* p : parts) cols += p->cols();
  Matrix out(rows, cols);
  Index at = 0;
  for (const auto* p : parts) {
    out.middleCols(at, p->cols()) = *p;
    at += p->cols();
  }
  return out;
}

Vector vcat(const std::vector<const Vector*>& parts) {
  Index n = 0;
  for (const auto* p : parts) n += p->size();
  Vector out(n);
  Index at = 0;
  for (const auto* p : parts) {
    out.segment(at, p->size()) = *p;
    at += p->size();
  }
  return out;
}

// Rewrites cluster t's operators in the bases of the two updates.
void rebase(ExtendedGraph& g, int level, int t, const BasisUpdate& bu, const BasisUpdate& bv) {
  auto& c = g.at(level, t);
  const Matrix& rmap = bu.old_map;
  const Matrix tmapT = bv.old_map.transpose();
  c.U = bu.basis;
  c.Vt = bv.basis.transpose();
  c.wU = bu.weights;
  c.wV = bv.weights;
  for (auto& [q, K] : c.yy) K = rmap * K;
  for (auto& [q, K] : c.yy) {
    if (q == t) {
      K = K * tmapT;
      continue;
    }
    Matrix& back = g.at(level, q).yy.at(t);
    back = back * tmapT;
  }
  c.by = rmap * c.by;
  if (level > g.top_level) {
    c.Up = rmap * c.Up;
    c.Vpt = c.Vpt * tmapT;
  }
  c.rank = bu.basis.cols();
}

struct RedirectTimes {
  double* lowrank = nullptr;
  double* matmul = nullptr;
};

// Merges the fill bases into the non-eliminated clusters they touch, rebases those
// clusters once each, and adds the redirected couplings between Y nodes.
Index redirect_pieces(ExtendedGraph& g, int level, const std::vector<Piece>& pieces,
                      double threshold, RedirectTimes times) {
  double scratch_lr = 0.0, scratch_mm = 0.0;
  double& t_lr = times.lowrank ? *times.lowrank : scratch_lr;
  double& t_mm = times.matmul ? *times.matmul : scratch_mm;

  std::map<int, std::vector<std::size_t>> ucon, vcon;
  for (std::size_t p = 0; p < pieces.size(); ++p) {
    if (pieces[p].f.rank() == 0) continue;
    if (pieces[p].row_kind == NodeKind::X) ucon[pieces[p].row].push_back(p);
    if (pieces[p].col_kind == NodeKind::X) vcon[pieces[p].col].push_back(p);
  }
  std::vector<int> targets;
  for (const auto& [t, _] : ucon) targets.push_back(t);
  for (const auto& [t, _] : vcon)
    if (!ucon.count(t)) targets.push_back(t);
  std::sort(targets.begin(), targets.end());

  // Offset of each piece's columns inside its target's fill maps.
  std::vector<Index> uoff(pieces.size(), -1), voff(pieces.size(), -1);
  std::map<int, Matrix> ufill, vfill;
  for (int t : targets) {
    auto& c = g.at(level, t);
    BasisUpdate bu, bv;
    {
      Timer timer(t_lr);
      std::vector<const Matrix*> ub, vb;
      std::vector<const Vector*> uw, vw;
      Index at = 0;
      for (std::size_t p : ucon[t]) {
        ub.push_back(&pieces[p].f.U);
        uw.push_back(&pieces[p].f.sigma);
        uoff[p] = at;
        at += pieces[p].f.rank();
      }
      at = 0;
      for (std::size_t p : vcon[t]) {
        vb.push_back(&pieces[p].f.V);
        vw.push_back(&pieces[p].f.sigma);
        voff[p] = at;
        at += pieces[p].f.rank();
      }
      const Matrix FU = hcat_bases(ub, c.x_size), FV = hcat_bases(vb, c.x_size);
      const Vector WU = vcat(uw), WV = vcat(vw);
      const Matrix oldV = c.Vt.transpose();
      bu = weighted_basis_union(c.U, c.wU, FU, WU, threshold, c.rank);
      bv = weighted_basis_union(oldV, c.wV, FV, WV, threshold, c.rank);
      const Index rank = std::max(bu.basis.cols(), bv.basis.cols());
      if (bu.basis.cols() < rank) bu = weighted_basis_union(c.U, c.wU, FU, WU, threshold, rank);
      if (bv.basis.cols() < rank) bv = weighted_basis_union(oldV, c.wV, FV, WV, threshold, rank);
    }
    {
      Timer timer(t_mm);
      rebase(g, level, t, bu, bv);
    }
    ufill[t] = std::move(bu.fill_map);
    vfill[t] = std::move(bv.fill_map);
  }

  Timer timer(t_mm);
  for (std::size_t p = 0; p < pieces.size(); ++p) {
    const auto& pc = pieces[p];
    const Index k = pc.f.rank();
    if (k == 0) continue;
    Matrix left = pc.row_kind == NodeKind::X ? Matrix(ufill[pc.row].middleCols(uoff[p], k)) : pc.f.U;
    Matrix right = pc.col_kind == NodeKind::X ? Matrix(vfill[pc.col].middleCols(voff[p], k)) : pc.f.V;
    g.add_block(level, NodeKind::Y, pc.row, NodeKind::Y, pc.col,
                left * pc.f.sigma.asDiagonal() * right.transpose());
  }
  return static_cast<Index>(targets.size());
}

}  // namespace

Factorizer::Factorizer(ExtendedGraph& graph, const FactorOptions& options, IFMMFactorization& out)
    : g_(graph), opt_(options), out_(out) {
  out_.hierarchy_ = g_.hierarchy;
  out_.block_dim_ = g_.block_dim;
  out_.leaf_level_ = g_.leaf_level;
  out_.top_level_ = g_.top_level;
  out_.dofs_ = static_cast<Index>(g_.hierarchy->num_points()) * g_.block_dim;
  out_.epsilon_ = opt_.epsilon;
  out_.sigma0_ = opt_.sigma0;
  threshold_ = opt_.epsilon * opt_.sigma0;
  const int L = g_.leaf_level;
  out_.x_size_.assign(L + 1, {});
  out_.rank_.assign(L + 1, {});
  const auto& leaves = g_.levels[L].clusters;
  out_.leaf_offset_.assign(leaves.size() + 1, 0);
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    out_.x_size_[L].push_back(leaves[i].x_size);
    out_.leaf_offset_[i + 1] = out_.leaf_offset_[i] + leaves[i].x_size;
  }
  out_.stats_.cluster_count = g_.cluster_count();
  track_peak();
}

void Factorizer::track_peak() {
  out_.stats_.peak_edges = std::max(out_.stats_.peak_edges, g_.edge_count);
}

void Factorizer::replay_rhs(const EliminationRecord& rec) {
  auto& c = g_.at(rec.level, rec.cluster);
  Vector piv = Vector::Zero(rec.x_size + rec.rank);
  piv.head(rec.x_size) = c.bx;
  const Vector s = rec.pivot.solve(piv);
  for (const auto& [node, Lx] : rec.lower) {
    auto& t = g_.at(rec.level, node.cluster);
    if (node.kind == NodeKind::X)
      t.bx.noalias() -= Lx * s.head(rec.x_size);
    else
      t.by.noalias() -= Lx * s.head(rec.x_size);
  }
  c.by += s.tail(rec.rank);
  c.bx.resize(0);
}

void Factorizer::eliminate_cluster(int l, int i) {
  auto& times = out_.timings_;
  LevelFillStats& stats = level_stats_ ? *level_stats_ : scratch_stats_;
  auto& c = g_.at(l, i);
  const Index m = c.x_size, r = c.rank;

  EliminationRecord rec;
  rec.level = l;
  rec.cluster = i;
  rec.x_size = m;
  rec.rank = r;

  // Column nodes and E(pivot, column) stacked as one right-hand side.
  std::vector<NodeRef> cols;
  std::vector<Index> col_off;
  Index total_cols = 0;
  for (const auto& [q, B] : c.xx)
    if (q != i) cols.push_back({q, NodeKind::X});
  for (const auto& [h, B] : c.xy) cols.push_back({h, NodeKind::Y});
  cols.push_back({i, NodeKind::Y});
  for (const auto& n : cols) {
    col_off.push_back(total_cols);
    total_cols += n.kind == NodeKind::X ? g_.at(l, n.cluster).x_size : g_.at(l, n.cluster).rank;
  }
  Matrix W = Matrix::Zero(m + r, total_cols);
  for (std::size_t k = 0; k + 1 < cols.size(); ++k) {
    const auto& n = cols[k];
    const Matrix& B = n.kind == NodeKind::X ? c.xx.at(n.cluster) : c.xy.at(n.cluster);
    W.block(0, col_off[k], m, B.cols()) = B;
  }
  W.block(m, col_off.back(), r, r).diagonal().setConstant(-1.0);

  {
    Timer timer(times.lu_and_triangular_solves);
    Matrix P = Matrix::Zero(m + r, m + r);
    auto self = c.xx.find(i);
    if (self != c.xx.end()) P.topLeftCorner(m, m) = self->second;
    P.topRightCorner(m, r) = c.U;
    P.bottomLeftCorner(r, m) = c.Vt;
    rec.pivot.compute(P);
    if (m + r > 0) {
      const double rc = rec.pivot.rcond();
      if (!(rc > opt_.min_pivot_rcond)) throw SingularPivotError(l, i, rc);
    }
    W = rec.pivot.solve(W);
  }

  // Row nodes with their E(row, X_i) blocks.
  std::vector<NodeRef> rows;
  std::vector<const Matrix*> row_blocks;
  for (const auto& [q, B] : c.xx)
    if (q != i) {
      rows.push_back({q, NodeKind::X});
      row_blocks.push_back(&g_.at(l, q).xx.at(i));
    }
  for (const auto& [h, B] : c.xy) {
    rows.push_back({h, NodeKind::Y});
    row_blocks.push_back(&g_.at(l, h).yx.at(i));
  }

  // Schur deltas, one row at a time: delta(R, all columns).
  std::vector<Matrix> delta(rows.size() + 1);
  {
    Timer timer(times.matmul_updates);
    for (std::size_t k = 0; k < rows.size(); ++k) delta[k] = -(*row_blocks[k]) * W.topRows(m);
    delta.back() = W.bottomRows(r);
  }
  rows.push_back({i, NodeKind::Y});

  for (std::size_t k = 0; k + 1 < rows.size(); ++k) rec.lower.emplace_back(rows[k], *row_blocks[k]);
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const Index w = (k + 1 < cols.size() ? col_off[k + 1] : total_cols) - col_off[k];
    rec.upper.emplace_back(cols[k], W.middleCols(col_off[k], w));
  }

  // Remove X_i and Z_i from the graph.
  Index removed = static_cast<Index>(c.xx.size() + c.xy.size()) + 4;
  for (const auto& [q, B] : c.xx)
    if (q != i) removed += static_cast<Index>(g_.at(l, q).xx.erase(i));
  for (const auto& [h, B] : c.xy) removed += static_cast<Index>(g_.at(l, h).yx.erase(i));
  g_.edge_count -= removed;
  c.xx.clear();
  c.xy.clear();
  c.U.resize(0, 0);
  c.Vt.resize(0, 0);
  c.eliminated = true;

  const bool sample = opt_.spectra_stride > 0 && eliminations_ % opt_.spectra_stride == 0;
  std::vector<Piece> pieces;
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t b = 0; b < cols.size(); ++b) {
      const auto& R = rows[a];
      const auto& C = cols[b];
      const Index w = (b + 1 < cols.size() ? col_off[b + 1] : total_cols) - col_off[b];
      const auto D = delta[a].middleCols(col_off[b], w);
      const bool yy = R.kind == NodeKind::Y && C.kind == NodeKind::Y;
      const bool near = g_.adjacent(l, R.cluster, C.cluster);
      if (sample && R.kind == NodeKind::X && C.kind == NodeKind::X && R.cluster != C.cluster &&
          D.size() > 0) {
        Eigen::JacobiSVD<Matrix> svd(D);
        SpectrumSample s;
        s.level = l;
        s.well_separated = !near;
        s.rows = D.rows();
        s.cols = D.cols();
        const Vector& sv = svd.singularValues();
        s.sigmas.assign(sv.data(), sv.data() + sv.size());
        s.rank = rank_from_reference(sv, 1.0, threshold_);
        out_.stats_.spectra.push_back(std::move(s));
      }
      if (yy || near) {
        Timer timer(times.matmul_updates);
        g_.add_block(l, R.kind, R.cluster, C.kind, C.cluster, D);
        ++stats.dense_updates;
        continue;
      }
      Piece p{R.cluster, R.kind, C.cluster, C.kind, {}};
      {
        Timer timer(times.lowrank_approximations);
        Timer inner(stats.compress_seconds);
        p.f = compress_block(D, threshold_, opt_.rsvd_cutoff);
      }
      ++stats.compressed;
      stats.rank_sum += p.f.rank();
      stats.max_rank = std::max(stats.max_rank, p.f.rank());
      if (p.f.rank() == 0) {
        ++stats.dropped;
        continue;
      }
      pieces.push_back(std::move(p));
    }
  }
  stats.basis_updates += redirect_pieces(g_, l, pieces, threshold_,
                                         {&times.lowrank_approximations, &times.matmul_updates});
  {
    Timer timer(times.lu_and_triangular_solves);
    replay_rhs(rec);
  }
  out_.records_.push_back(std::move(rec));
  ++eliminations_;
  track_peak();
}

LevelFillStats Factorizer::eliminate_level(int l) {
  LevelFillStats stats;
  stats.level = l;
  level_stats_ = &stats;
  const auto count = static_cast<int>(g_.levels[l].clusters.size());
  stats.clusters = count;
  for (int i = 0; i < count; ++i) eliminate_cluster(l, i);
  level_stats_ = nullptr;
  Index sum = 0;
  out_.rank_[l].clear();
  for (const auto& c : g_.levels[l].clusters) {
    stats.max_basis_rank = std::max(stats.max_basis_rank, c.rank);
    sum += c.rank;
    out_.rank_[l].push_back(c.rank);
  }
  stats.mean_basis_rank = count ? double(sum) / double(count) : 0.0;
  return stats;
}

void Factorizer::merge_to_parent(int l) {
  Timer timer(out_.timings_.operator_transfer);
  ifmm::merge_to_parent(g_, l);
  auto& xs = out_.x_size_[l - 1];
  xs.clear();
  for (const auto& c : g_.levels[l - 1].clusters) xs.push_back(c.x_size);
  track_peak();
}

void Factorizer::factor_top() {
  Timer timer(out_.timings_.operator_transfer);
  const int top = g_.top_level;
  const auto& clusters = g_.levels[top].clusters;
  const bool dense = g_.dense_only();
  out_.top_offset_.assign(clusters.size() + 1, 0);
  for (std::size_t i = 0; i < clusters.size(); ++i)
    out_.top_offset_[i + 1] =
        out_.top_offset_[i] + (dense ? clusters[i].x_size : clusters[i].rank);
  const Index n = out_.top_offset_.back();
  Matrix T = Matrix::Zero(n, n);
  Vector rhs(n);
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const auto& c = clusters[i];
    const Index ro = out_.top_offset_[i];
    const BlockMap& row = dense ? c.xx : c.yy;
    for (const auto& [j, B] : row) T.block(ro, out_.top_offset_[j], B.rows(), B.cols()) = B;
    rhs.segment(ro, dense ? c.x_size : c.rank) = dense ? c.bx : c.by;
  }
  if (!dense) {
    out_.rank_[top].clear();
    for (const auto& c : clusters) out_.rank_[top].push_back(c.rank);
  }
  out_.top_.compute(T);
  if (n > 0) {
    const double rc = out_.top_.rcond();
    if (!(rc > opt_.min_pivot_rcond)) throw SingularPivotError(top, -1, rc);
  }
  out_.top_rhs_ = rhs;
}

void merge_to_parent(ExtendedGraph& g, int l) {
  if (l <= g.top_level || l != g.current_level) throw InputError("merge_to_parent: bad level");
  auto& fine = g.levels[l].clusters;
  auto& coarse = g.levels[l - 1].clusters;
  const auto& tree = g.hierarchy->tree;
  std::vector<Index> offset(fine.size(), 0);
  for (std::size_t p = 0; p < coarse.size(); ++p) {
    auto& cp = coarse[p];
    Index at = 0;
    for (int c : tree.levels[l - 1][p].children) {
      offset[c] = at;
      at += fine[c].rank;
    }
    cp.x_size = at;
    cp.bx = Vector(at);
    cp.U = Matrix(at, cp.rank);
    cp.Vt = Matrix(cp.rank, at);
    for (int c : tree.levels[l - 1][p].children) {
      const auto& cc = fine[c];
      cp.bx.segment(offset[c], cc.rank) = cc.by;
      cp.U.middleRows(offset[c], cc.rank) = cc.Up;
      cp.Vt.middleCols(offset[c], cc.rank) = cc.Vpt;
    }
  }
  for (std::size_t p = 0; p < coarse.size(); ++p) {
    auto& cp = coarse[p];
    for (int c : tree.levels[l - 1][p].children) {
      for (const auto& [c2, K] : fine[c].yy) {
        const int q = tree.levels[l][c2].parent;
        if (!g.adjacent(l - 1, static_cast<int>(p), q))
          throw std::logic_error("merge_to_parent: coupling between non-adjacent parents");
        auto it = cp.xx.find(q);
        if (it == cp.xx.end())
          it = cp.xx.emplace(q, Matrix::Zero(cp.x_size, coarse[q].x_size)).first;
        it->second.block(offset[c], offset[c2], K.rows(), K.cols()) += K;
      }
    }
  }
  for (auto& c : fine) {
    GraphCluster done;
    done.x_size = c.x_size;
    done.rank = c.rank;
    done.eliminated = true;
    c = std::move(done);
  }
  g.levels[l].merged = true;
  g.current_level = l - 1;
  g.edge_count = g.count_edges();
}

IFMMFactorization factorize(ExtendedGraph graph, const FactorOptions& options) {
  if (!(options.epsilon >= 0.0 && options.epsilon < 1.0))
    throw InputError("factorize: epsilon must be in [0, 1)");
  FactorOptions opt = options;
  if (!(opt.sigma0 > 0.0) && !graph.dense_only()) opt.sigma0 = estimate_sigma0(graph);
  IFMMFactorization out;
  Factorizer f(graph, opt, out);
  if (!graph.dense_only()) {
    for (int l = graph.leaf_level; l >= graph.top_level; --l) {
      out.stats_.levels.push_back(f.eliminate_level(l));
      if (l > graph.top_level) f.merge_to_parent(l);
    }
  }
  f.factor_top();
  Index far_max = 0, far_sum = 0, far_count = 0;
  for (int l = graph.top_level; l <= graph.leaf_level && !graph.dense_only(); ++l)
    for (Index r : out.rank_[l]) {
      far_max = std::max(far_max, r);
      far_sum += r;
      ++far_count;
    }
  out.stats_.max_far_rank = far_max;
  out.stats_.mean_far_rank = far_count ? double(far_sum) / double(far_count) : 0.0;
  return out;
}

Vector IFMMFactorization::solve(const Vector& b) const {
  const auto& perm = hierarchy_->permutation;
  return from_tree_order(solve_tree_order(to_tree_order(b, perm, block_dim_)), perm, block_dim_);
}

struct IFMMFactorization::ReplayState {
  std::vector<std::vector<Vector>> bx, by, x, y;
  std::vector<Vector> pivots;
  std::vector<std::size_t> level_begin, level_end;
};

// Pushes b through the recorded eliminations and merges, leaving the top-level rhs in by[top].
void IFMMFactorization::forward(const Vector& b, ReplayState& st) const {
  const int L = leaf_level_, top = top_level_;
  const auto& tree = hierarchy_->tree;
  st.bx.assign(L + 1, {});
  st.by.assign(L + 1, {});
  st.x.assign(L + 1, {});
  st.y.assign(L + 1, {});
  for (int l = top; l <= L; ++l) {
    const auto count = rank_[l].size();
    st.bx[l].resize(count);
    st.by[l].resize(count);
    st.x[l].resize(count);
    st.y[l].resize(count);
    for (std::size_t i = 0; i < count; ++i) st.by[l][i] = Vector::Zero(rank_[l][i]);
  }
  for (std::size_t i = 0; i < rank_[L].size(); ++i)
    st.bx[L][i] = b.segment(leaf_offset_[i], leaf_offset_[i + 1] - leaf_offset_[i]);

  auto& bx = st.bx;
  auto& by = st.by;
  st.pivots.assign(records_.size(), Vector());
  st.level_end.assign(L + 1, 0);
  st.level_begin.assign(L + 1, 0);
  int cur = L;
  for (std::size_t k = 0; k <= records_.size(); ++k) {
    const bool done = k == records_.size();
    if (done || records_[k].level != cur) {
      st.level_end[cur] = k;
      if (done) break;
      // Merge: the parent's unknowns are its children's multipole values.
      const int l = cur;
      for (std::size_t p = 0; p < tree.levels[l - 1].size(); ++p) {
        Vector v(x_size_[l - 1][p]);
        Index at = 0;
        for (int c : tree.levels[l - 1][p].children) {
          v.segment(at, by[l][c].size()) = by[l][c];
          at += by[l][c].size();
        }
        bx[l - 1][p] = std::move(v);
      }
      cur = records_[k].level;
      st.level_begin[cur] = k;
    }
    const auto& rec = records_[k];
    Vector piv = Vector::Zero(rec.x_size + rec.rank);
    piv.head(rec.x_size) = bx[rec.level][rec.cluster];
    Vector s = rec.pivot.solve(piv);
    for (const auto& [node, Lx] : rec.lower) {
      Vector& t = node.kind == NodeKind::X ? bx[rec.level][node.cluster] : by[rec.level][node.cluster];
      t.noalias() -= Lx * s.head(rec.x_size);
    }
    by[rec.level][rec.cluster] += s.tail(rec.rank);
    st.pivots[k] = std::move(s);
  }
}

Vector IFMMFactorization::replay_top_rhs(const Vector& b) const {
  if (b.size() != dofs_) throw InputError("replay_top_rhs: right-hand side size mismatch");
  if (leaf_level_ < 2) return b;
  ReplayState st;
  forward(b, st);
  Vector rhs(top_offset_.back());
  for (std::size_t i = 0; i + 1 < top_offset_.size(); ++i)
    rhs.segment(top_offset_[i], top_offset_[i + 1] - top_offset_[i]) = st.by[top_level_][i];
  return rhs;
}

Vector IFMMFactorization::solve_tree_order(const Vector& b) const {
  if (b.size() != dofs_) throw InputError("solve: right-hand side size mismatch");
  const int L = leaf_level_, top = top_level_;
  const auto& tree = hierarchy_->tree;
  if (L < 2) return top_.solve(b);
  ReplayState st;
  forward(b, st);
  auto& x = st.x;
  auto& y = st.y;

  Vector rhs(top_offset_.back());
  for (std::size_t i = 0; i + 1 < top_offset_.size(); ++i)
    rhs.segment(top_offset_[i], top_offset_[i + 1] - top_offset_[i]) = st.by[top][i];
  const Vector ytop = top_.solve(rhs);
  for (std::size_t i = 0; i + 1 < top_offset_.size(); ++i)
    y[top][i] = ytop.segment(top_offset_[i], top_offset_[i + 1] - top_offset_[i]);

  for (int l = top; l <= L; ++l) {
    for (std::size_t k = st.level_end[l]; k-- > st.level_begin[l];) {
      const auto& rec = records_[k];
      Vector v = st.pivots[k];
      for (const auto& [node, Wc] : rec.upper) {
        const Vector& val = node.kind == NodeKind::X ? x[l][node.cluster] : y[l][node.cluster];
        v.noalias() -= Wc * val;
      }
      x[l][rec.cluster] = v.head(rec.x_size);
    }
    if (l == L) break;
    for (std::size_t p = 0; p < tree.levels[l].size(); ++p) {
      Index at = 0;
      for (int c : tree.levels[l][p].children) {
        y[l + 1][c] = x[l][p].segment(at, rank_[l + 1][c]);
        at += rank_[l + 1][c];
      }
    }
  }
  Vector out(dofs_);
  for (std::size_t i = 0; i < x[L].size(); ++i)
    out.segment(leaf_offset_[i], leaf_offset_[i + 1] - leaf_offset_[i]) = x[L][i];
  return out;
}

void redirect_fillin(ExtendedGraph& graph, int level, const FillPair& fill, double threshold) {
  std::vector<Piece> pieces;
  if (fill.kj.rank() > 0) pieces.push_back({fill.k, fill.k_kind, fill.j, fill.j_kind, fill.kj});
  if (fill.jk.rank() > 0) pieces.push_back({fill.j, fill.j_kind, fill.k, fill.k_kind, fill.jk});
  redirect_pieces(graph, level, pieces, threshold, {});
}

LevelFillStats eliminate_level(ExtendedGraph& graph, int level, double threshold,
                               std::vector<EliminationRecord>* log) {
  FactorOptions opt;
  opt.epsilon = 0.5;
  opt.sigma0 = 2.0 * threshold;
  IFMMFactorization scratch;
  Factorizer f(graph, opt, scratch);
  LevelFillStats stats = f.eliminate_level(level);
  if (log)
    for (auto& r : scratch.records_) log->push_back(std::move(r));
  return stats;
}

LevelFillStats eliminate_level_with_threshold(ExtendedGraph& graph, int level, double threshold) {
  return eliminate_level(graph, level, threshold, nullptr);
}

void Factorizer::redirect(int level, const std::vector<FillPair>& fills) {
  std::vector<Piece> pieces;
  for (const auto& fill : fills) {
    if (fill.kj.rank() > 0) pieces.push_back({fill.k, fill.k_kind, fill.j, fill.j_kind, fill.kj});
    if (fill.jk.rank() > 0) pieces.push_back({fill.j, fill.j_kind, fill.k, fill.k_kind, fill.jk});
  }
  redirect_pieces(g_, level, pieces, threshold_,
                  {&out_.timings_.lowrank_approximations, &out_.timings_.matmul_updates});
}

}  // namespace ifmm
