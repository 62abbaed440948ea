#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ifmm {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  std::int64_t global_index = 0;
};

inline double distance(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Raised for malformed inputs (degenerate geometry, size mismatches).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a block pivot cannot be factorized.
class SingularPivotError : public std::runtime_error {
 public:
  SingularPivotError(int level, int cluster, double rcond)
      : std::runtime_error("singular pivot block at level " + std::to_string(level) +
                           ", cluster " + std::to_string(cluster) +
                           " (rcond=" + std::to_string(rcond) + ")"),
        level_(level),
        cluster_(cluster) {}
  int level() const { return level_; }
  int cluster() const { return cluster_; }

 private:
  int level_;
  int cluster_;
};

}  // namespace ifmm
