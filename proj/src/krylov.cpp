#include "ifmm/krylov.hpp"

#include <cmath>
#include <memory>

namespace ifmm {

std::string to_string(PrecondSide side) {
  switch (side) {
    case PrecondSide::left: return "left";
    case PrecondSide::right: return "right";
    default: return "none";
  }
}

GmresResult gmres(const LinearMap& apply_A, const Vector& b, double tol, int max_iters,
                  const LinearMap& precond, PrecondSide side) {
  if (!(tol > 0.0) || max_iters < 1) throw InputError("gmres: tol > 0 and max_iters >= 1 required");
  if (!precond) side = PrecondSide::none;
  if (precond && side == PrecondSide::none) side = PrecondSide::right;

  GmresResult res;
  res.trace.side = side;
  const Index n = b.size();
  res.x = Vector::Zero(n);
  const Vector r0 = side == PrecondSide::left ? precond(b) : b;
  const double beta = r0.norm();
  res.trace.residual_history.push_back(beta > 0.0 ? 1.0 : 0.0);
  if (beta == 0.0) {
    res.trace.converged = true;
    return res;
  }

  auto op = [&](const Vector& v) -> Vector {
    switch (side) {
      case PrecondSide::left: return precond(apply_A(v));
      case PrecondSide::right: return apply_A(precond(v));
      default: return apply_A(v);
    }
  };

  std::vector<Vector> basis;
  basis.reserve(max_iters + 1);
  basis.push_back(r0 / beta);
  Matrix H = Matrix::Zero(max_iters + 1, max_iters);
  Vector cs = Vector::Zero(max_iters), sn = Vector::Zero(max_iters);
  Vector g = Vector::Zero(max_iters + 1);
  g(0) = beta;

  int k = 0;
  for (; k < max_iters; ++k) {
    Vector w = op(basis[k]);
    for (int j = 0; j <= k; ++j) {
      H(j, k) = basis[j].dot(w);
      w.noalias() -= H(j, k) * basis[j];
    }
    const double hn = w.norm();
    H(k + 1, k) = hn;
    for (int j = 0; j < k; ++j) {
      const double t = cs(j) * H(j, k) + sn(j) * H(j + 1, k);
      H(j + 1, k) = -sn(j) * H(j, k) + cs(j) * H(j + 1, k);
      H(j, k) = t;
    }
    const double denom = std::hypot(H(k, k), H(k + 1, k));
    cs(k) = denom > 0.0 ? H(k, k) / denom : 1.0;
    sn(k) = denom > 0.0 ? H(k + 1, k) / denom : 0.0;
    H(k, k) = denom;
    H(k + 1, k) = 0.0;
    g(k + 1) = -sn(k) * g(k);
    g(k) = cs(k) * g(k);
    const double rel = std::abs(g(k + 1)) / beta;
    res.trace.residual_history.push_back(rel);
    const bool breakdown = hn <= 1e-14 * beta;
    if (rel <= tol || breakdown) {
      ++k;
      res.trace.converged = rel <= tol;
      break;
    }
    basis.push_back(w / hn);
  }
  res.trace.iterations = k;
  const Vector yk = H.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
  Vector update = Vector::Zero(n);
  for (int j = 0; j < k; ++j) update.noalias() += yk(j) * basis[j];
  res.x = side == PrecondSide::right ? precond(update) : update;
  if (!res.trace.converged) res.trace.converged = res.trace.residual_history.back() <= tol;
  return res;
}

LinearMap block_diag_preconditioner(const std::function<Matrix(Index, Index)>& diagonal_block,
                                    Index dim, Index block_size) {
  if (block_size < 1) throw InputError("block_diag_preconditioner: block_size must be >= 1");
  auto lus = std::make_shared<std::vector<Eigen::PartialPivLU<Matrix>>>();
  for (Index start = 0; start < dim; start += block_size) {
    const Index len = std::min(block_size, dim - start);
    lus->emplace_back(diagonal_block(start, len));
    const double rc = lus->back().rcond();
    if (!(rc > 1e-15))
      throw std::runtime_error("block_diag_preconditioner: singular block at offset " +
                               std::to_string(start));
  }
  return [lus, block_size, dim](const Vector& v) {
    if (v.size() != dim) throw InputError("block_diag_preconditioner: size mismatch");
    Vector out(v.size());
    for (std::size_t k = 0; k < lus->size(); ++k) {
      const Index start = static_cast<Index>(k) * block_size;
      const Index len = std::min(block_size, dim - start);
      out.segment(start, len) = (*lus)[k].solve(v.segment(start, len));
    }
    return out;
  };
}

LinearMap block_diag_preconditioner(const Matrix& A, Index block_size) {
  return block_diag_preconditioner(
      [&A](Index s, Index len) -> Matrix { return A.block(s, s, len, len); }, A.rows(), block_size);
}

}  // namespace ifmm
