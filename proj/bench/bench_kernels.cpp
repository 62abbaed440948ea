// Serial reference vs OpenMP kernels on the same inputs.
#include <benchmark/benchmark.h>

#include <map>
#include <memory>

#include "ifmm/h2.hpp"
#include "ifmm/refcheck.hpp"

namespace {

using namespace ifmm;

struct H2Fixture {
  std::shared_ptr<H2Operators> ops;
  Vector x;
};

const H2Fixture& h2_fixture(std::int64_t n) {
  static std::map<std::int64_t, H2Fixture> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  const Scene s = cube_uniform(n, 5);
  TreeOptions to;
  to.leaf_target = 100;
  ChebyshevOptions co;
  co.nodes = 4;
  co.basis_epsilon = 1e-8;
  H2Fixture f;
  f.ops = std::make_shared<H2Operators>(
      chebyshev_operators(make_hierarchy(s.points, to), benchmark_kernel(1e-3), co));
  f.x = ref::random_solution(n, 9);
  return cache.emplace(n, std::move(f)).first->second;
}

void BM_h2_matvec_serial(benchmark::State& st) {
  const auto& f = h2_fixture(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(h2_matvec_serial(*f.ops, f.x));
}

void BM_h2_matvec_parallel(benchmark::State& st) {
  const auto& f = h2_fixture(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(h2_matvec(*f.ops, f.x));
}

void BM_kernel_matvec_serial(benchmark::State& st) {
  const Scene s = sphere_surface(st.range(0), 3);
  const Kernel k = benchmark_kernel(1e-3);
  const Vector x = ref::random_solution(st.range(0), 4);
  for (auto _ : st) benchmark::DoNotOptimize(ref::kernel_matvec_serial(s.points, k, x));
}

void BM_kernel_matvec_parallel(benchmark::State& st) {
  const Scene s = sphere_surface(st.range(0), 3);
  const Kernel k = benchmark_kernel(1e-3);
  const Vector x = ref::random_solution(st.range(0), 4);
  for (auto _ : st) benchmark::DoNotOptimize(ref::kernel_matvec(s.points, k, x));
}

void BM_assemble_serial(benchmark::State& st) {
  const Scene s = sphere_surface(st.range(0), 3);
  const Kernel k = rpy_kernel(0.05);
  for (auto _ : st) benchmark::DoNotOptimize(ref::assemble_matrix(s.points, k, false));
}

void BM_assemble_parallel(benchmark::State& st) {
  const Scene s = sphere_surface(st.range(0), 3);
  const Kernel k = rpy_kernel(0.05);
  for (auto _ : st) benchmark::DoNotOptimize(ref::assemble_matrix(s.points, k, true));
}

void BM_dense_matvec_serial(benchmark::State& st) {
  const Scene s = cube_uniform(st.range(0), 3);
  const Matrix A = ref::assemble_matrix(s.points, benchmark_kernel(1e-3));
  const Vector x = ref::random_solution(st.range(0), 4);
  for (auto _ : st) benchmark::DoNotOptimize(ref::dense_matvec_serial(A, x));
}

void BM_dense_matvec_parallel(benchmark::State& st) {
  const Scene s = cube_uniform(st.range(0), 3);
  const Matrix A = ref::assemble_matrix(s.points, benchmark_kernel(1e-3));
  const Vector x = ref::random_solution(st.range(0), 4);
  for (auto _ : st) benchmark::DoNotOptimize(ref::dense_matvec(A, x));
}

}  // namespace

BENCHMARK(BM_h2_matvec_serial)->Arg(5000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_h2_matvec_parallel)->Arg(5000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_kernel_matvec_serial)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_kernel_matvec_parallel)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_assemble_serial)->Arg(500)->Arg(1500)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_assemble_parallel)->Arg(500)->Arg(1500)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_dense_matvec_serial)->Arg(2000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_dense_matvec_parallel)->Arg(2000)->Arg(4000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
