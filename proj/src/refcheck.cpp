#include "ifmm/refcheck.hpp"

#include <string>

namespace ifmm::ref {

Vector random_solution(Index n, std::uint64_t seed) {
  Rng rng(seed);
  Vector x(n);
  for (Index k = 0; k < n; ++k) x(k) = rng.normal();
  return x;
}

Matrix assemble_matrix(const std::vector<Point3>& points, const Kernel& kernel, bool parallel) {
  const auto n = static_cast<Index>(points.size());
  const int bd = kernel.block_dim();
  Matrix A(n * bd, n * bd);
#pragma omp parallel for schedule(static) if (parallel)
  for (Index j = 0; j < n; ++j) A.middleCols(j * bd, bd) = kernel.block(points.data(), n, &points[j], 1);
  return A;
}

DenseProblem assemble_dense(const Scene& scene, const Kernel& kernel, std::uint64_t seed,
                            Index cap) {
  const Index dim = scene.size() * kernel.block_dim();
  if (dim > cap)
    throw InputError("assemble_dense: dimension " + std::to_string(dim) + " exceeds cap " +
                     std::to_string(cap));
  DenseProblem p;
  p.A = assemble_matrix(scene.points, kernel);
  p.x_true = random_solution(dim, seed);
  p.b = p.A * p.x_true;
  return p;
}

namespace {

Vector kernel_product(const std::vector<Point3>& points, const Kernel& kernel, const Vector& x,
                      bool parallel) {
  const auto n = static_cast<Index>(points.size());
  const int bd = kernel.block_dim();
  if (x.size() != n * bd) throw InputError("kernel_matvec: size mismatch");
  Vector y(n * bd);
#pragma omp parallel for schedule(static) if (parallel)
  for (Index i = 0; i < n; ++i) {
    double blk[9];
    Vector acc = Vector::Zero(bd);
    for (Index j = 0; j < n; ++j) {
      kernel.evaluate(points[i], points[j], blk);
      for (int c = 0; c < bd; ++c)
        for (int r = 0; r < bd; ++r) acc(r) += blk[c * bd + r] * x(j * bd + c);
    }
    y.segment(i * bd, bd) = acc;
  }
  return y;
}

Vector matrix_product(const Matrix& A, const Vector& x, bool parallel) {
  if (A.cols() != x.size()) throw InputError("dense_matvec: size mismatch");
  Vector y(A.rows());
  const Index rows = A.rows();
  constexpr Index chunk = 256;
#pragma omp parallel for schedule(static) if (parallel)
  for (Index s = 0; s < rows; s += chunk) {
    const Index len = std::min(chunk, rows - s);
    y.segment(s, len).noalias() = A.middleRows(s, len) * x;
  }
  return y;
}

}  // namespace

Vector kernel_matvec(const std::vector<Point3>& points, const Kernel& kernel, const Vector& x) {
  return kernel_product(points, kernel, x, true);
}

Vector kernel_matvec_serial(const std::vector<Point3>& points, const Kernel& kernel,
                            const Vector& x) {
  return kernel_product(points, kernel, x, false);
}

Vector dense_matvec(const Matrix& A, const Vector& x) { return matrix_product(A, x, true); }
Vector dense_matvec_serial(const Matrix& A, const Vector& x) { return matrix_product(A, x, false); }

Vector dense_solve(const Matrix& A, const Vector& b) {
  Eigen::PartialPivLU<Matrix> lu(A);
  if (!(lu.rcond() > 1e-16)) throw std::runtime_error("dense_solve: singular matrix");
  return lu.solve(b);
}

Vector dense_eigs(const Matrix& A) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(A, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

std::vector<std::complex<double>> dense_eigs_general(const Matrix& A) {
  Eigen::EigenSolver<Matrix> es(A, false);
  const auto& ev = es.eigenvalues();
  return std::vector<std::complex<double>>(ev.data(), ev.data() + ev.size());
}

double dense_cond(const Matrix& A) {
  Eigen::BDCSVD<Matrix> svd(A);
  const Vector& s = svd.singularValues();
  if (s.size() == 0) return 1.0;
  const double smin = s(s.size() - 1);
  if (!(smin > 0.0)) throw std::runtime_error("dense_cond: singular matrix");
  return s(0) / smin;
}

}  // namespace ifmm::ref
