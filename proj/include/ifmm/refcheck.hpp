#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "ifmm/kernel.hpp"

namespace ifmm::ref {

struct DenseProblem {
  Matrix A;
  Vector b;
  Vector x_true;
  double kappa = 0.0;  // filled by dense_cond
};

constexpr Index kDefaultDenseCap = 6000;

// Seeded random x_true (standard normal entries), length N * block_dim.
Vector random_solution(Index n, std::uint64_t seed);

DenseProblem assemble_dense(const Scene& scene, const Kernel& kernel, std::uint64_t seed,
                            Index cap = kDefaultDenseCap);
Matrix assemble_matrix(const std::vector<Point3>& points, const Kernel& kernel, bool parallel = true);

// On-the-fly dense product with the exact kernel matrix (no storage).
Vector kernel_matvec(const std::vector<Point3>& points, const Kernel& kernel, const Vector& x);
Vector kernel_matvec_serial(const std::vector<Point3>& points, const Kernel& kernel,
                            const Vector& x);
Vector dense_matvec(const Matrix& A, const Vector& x);
Vector dense_matvec_serial(const Matrix& A, const Vector& x);

Vector dense_solve(const Matrix& A, const Vector& b);
// Symmetric eigenvalues in ascending order.
Vector dense_eigs(const Matrix& A);
// Eigenvalues of a general real matrix.
std::vector<std::complex<double>> dense_eigs_general(const Matrix& A);
double dense_cond(const Matrix& A);

}  // namespace ifmm::ref
