#include "ifmm/refcheck.hpp"
#include "support.hpp"

using namespace ifmm;
using test::rel_err;

TEST_CASE("refcheck: assembled benchmark matrix") {
  const double d = 1e-3;
  std::vector<Point3> pts = {{0, 0, 0, 0}, {2 * d, 0, 0, 1}, {0.5, 0.5, 0.5, 2}};
  const Matrix A = ref::assemble_matrix(pts, benchmark_kernel(d));
  CHECK(A.diagonal() == Vector::Ones(3));
  CHECK(A == A.transpose());
  CHECK(A(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("refcheck: dense problem and its self-consistency") {
  const Scene s = cube_uniform(400, 3);
  ref::DenseProblem p = ref::assemble_dense(s, benchmark_kernel(1e-2), 5);
  CHECK(p.A.rows() == 400);
  CHECK(rel_err(p.A * p.x_true, p.b) < 1e-15);
  p.kappa = ref::dense_cond(p.A);
  CHECK(p.kappa >= 1.0);
  const Vector x = ref::dense_solve(p.A, p.b);
  CHECK(rel_err(p.A * x, p.b) <= 1e-10 * p.kappa);
  CHECK(rel_err(x, p.x_true) <= 1e-12 * p.kappa);
  CHECK_THROWS_AS(ref::assemble_dense(s, benchmark_kernel(1e-2), 5, 399), InputError);
  CHECK(ref::random_solution(50, 9) == ref::random_solution(50, 9));
  CHECK(ref::random_solution(50, 9) != ref::random_solution(50, 10));
}

TEST_CASE("refcheck: solves and condition numbers of simple matrices") {
  const Matrix I = Matrix::Identity(5, 5);
  const Vector b = test::gaussian(5, 1, 1);
  CHECK(ref::dense_solve(I, b) == b);
  CHECK(ref::dense_cond(I) == doctest::Approx(1.0));
  Matrix D = Matrix::Zero(2, 2);
  D(0, 0) = 4;
  D(1, 1) = 1;
  CHECK(ref::dense_cond(D) == doctest::Approx(4.0));
  CHECK_THROWS(ref::dense_solve(Matrix::Zero(3, 3), Vector::Ones(3)));
  const Vector ev = ref::dense_eigs(D);
  CHECK(ev(0) == doctest::Approx(1.0));
  CHECK(ev(1) == doctest::Approx(4.0));
  Matrix R = Matrix::Zero(2, 2);
  R(0, 1) = -1;
  R(1, 0) = 1;
  const auto ce = ref::dense_eigs_general(R);
  REQUIRE(ce.size() == 2);
  for (const auto& z : ce) {
    CHECK(std::abs(z.real()) < 1e-14);
    CHECK(std::abs(std::abs(z.imag()) - 1.0) < 1e-14);
  }
}

TEST_CASE("refcheck: serial and parallel kernels agree") {
  const Scene s = sphere_surface(600, 4);
  for (const Kernel& k : {benchmark_kernel(1e-3), rpy_kernel(0.01)}) {
    CAPTURE(k.name());
    const Matrix A = ref::assemble_matrix(s.points, k, true);
    const Matrix As = ref::assemble_matrix(s.points, k, false);
    CHECK(A == As);
    const Vector x = test::gaussian(A.cols(), 1, 2);
    const Vector y = A * x;
    CHECK(rel_err(ref::kernel_matvec(s.points, k, x), y) < 1e-13);
    CHECK(rel_err(ref::kernel_matvec_serial(s.points, k, x), y) < 1e-13);
    CHECK(rel_err(ref::dense_matvec(A, x), y) < 1e-13);
    CHECK(rel_err(ref::dense_matvec_serial(A, x), y) < 1e-13);
    CHECK_THROWS_AS(ref::kernel_matvec(s.points, k, Vector::Zero(3)), InputError);
    CHECK_THROWS_AS(ref::dense_matvec(A, Vector::Zero(3)), InputError);
  }
}
