#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ifmm/types.hpp"

namespace ifmm {

// Matrix-valued kernel; evaluate writes a block_dim x block_dim block.
class Kernel {
 public:
  using BlockFn = std::function<void(const Point3&, const Point3&, double*)>;

  Kernel(std::string name, int block_dim, BlockFn fn, std::map<std::string, double> params)
      : name_(std::move(name)), block_dim_(block_dim), fn_(std::move(fn)),
        params_(std::move(params)) {}

  int block_dim() const { return block_dim_; }
  const std::string& name() const { return name_; }
  const std::map<std::string, double>& params() const { return params_; }

  // Column-major block written to out[0 .. block_dim^2).
  void evaluate(const Point3& a, const Point3& b, double* out) const { fn_(a, b, out); }
  Matrix evaluate(const Point3& a, const Point3& b) const;

  // Dense block between two point ranges (rows from `rows`, columns from `cols`).
  Matrix block(const Point3* rows, Index nrows, const Point3* cols, Index ncols) const;

  // Same kernel multiplied by a constant.
  Kernel scaled(double factor) const;

 private:
  std::string name_;
  int block_dim_;
  BlockFn fn_;
  std::map<std::string, double> params_;
};

Kernel benchmark_kernel(double d);
Kernel rpy_kernel(double radius, double viscosity = 1.0);
// Radially constant kernel, used as an exactly low-rank test case.
Kernel constant_kernel(double value = 1.0);

double scaled_d(double base, std::int64_t n, double exponent);

// Portable 64-bit generator (SplitMix64) with explicitly defined distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next_u64();
  double uniform();  // [0, 1) with 53 random bits
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();   // Box-Muller

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct Scene {
  std::vector<Point3> points;
  std::string generator;
  std::map<std::string, double> params;
  std::uint64_t seed = 0;

  std::int64_t size() const { return static_cast<std::int64_t>(points.size()); }
};

Scene sphere_surface(std::int64_t n, std::uint64_t seed);
Scene cube_uniform(std::int64_t n, std::uint64_t seed);
// Unit-radius icosphere vertices after `subdivision` refinement steps.
std::vector<Point3> icosphere(int subdivision);
Scene sphere_lattice(int nx, int ny, int nz, int subdivision, double spacing,
                     double sphere_radius = 1.0);
Scene concentric_shells(const std::vector<int>& subdivisions, const std::vector<double>& radii);

// Columnar text I/O: one "x y z" line per point.
void write_scene(std::ostream& os, const Scene& scene);
Scene read_scene(std::istream& is);

}  // namespace ifmm
