#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ifmm/types.hpp"

namespace ifmm {

using LinearMap = std::function<Vector(const Vector&)>;

enum class PrecondSide { none, left, right };

std::string to_string(PrecondSide side);

struct IterationTrace {
  std::vector<double> residual_history;  // entry 0 is the initial residual (= 1)
  int iterations = 0;
  bool converged = false;
  PrecondSide side = PrecondSide::none;
};

struct GmresResult {
  Vector x;
  IterationTrace trace;
};

// Non-restarted GMRES (modified Gram-Schmidt, Givens rotations), zero initial guess.
GmresResult gmres(const LinearMap& apply_A, const Vector& b, double tol, int max_iters,
                  const LinearMap& precond = nullptr, PrecondSide side = PrecondSide::none);

// Inverts the diagonal blocks of A; the last block may be shorter.
LinearMap block_diag_preconditioner(const std::function<Matrix(Index, Index)>& diagonal_block,
                                    Index dim, Index block_size);
LinearMap block_diag_preconditioner(const Matrix& A, Index block_size);

}  // namespace ifmm
