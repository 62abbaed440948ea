#include <cmath>
#include <numbers>

#include "ifmm/kernel.hpp"

namespace ifmm {

Matrix Kernel::evaluate(const Point3& a, const Point3& b) const {
  Matrix m(block_dim_, block_dim_);
  fn_(a, b, m.data());
  return m;
}

Matrix Kernel::block(const Point3* rows, Index nrows, const Point3* cols, Index ncols) const {
  const int bd = block_dim_;
  Matrix out(nrows * bd, ncols * bd);
  if (bd == 1) {
    for (Index j = 0; j < ncols; ++j)
      for (Index i = 0; i < nrows; ++i) fn_(rows[i], cols[j], &out(i, j));
    return out;
  }
  double buf[64];
  for (Index j = 0; j < ncols; ++j)
    for (Index i = 0; i < nrows; ++i) {
      fn_(rows[i], cols[j], buf);
      for (int c = 0; c < bd; ++c)
        for (int r = 0; r < bd; ++r) out(i * bd + r, j * bd + c) = buf[c * bd + r];
    }
  return out;
}

Kernel Kernel::scaled(double factor) const {
  auto inner = fn_;
  const int n = block_dim_ * block_dim_;
  auto params = params_;
  params["scale"] = factor * (params_.count("scale") ? params_.at("scale") : 1.0);
  return Kernel(name_, block_dim_,
                [inner, n, factor](const Point3& a, const Point3& b, double* out) {
                  inner(a, b, out);
                  for (int k = 0; k < n; ++k) out[k] *= factor;
                },
                params);
}

Kernel benchmark_kernel(double d) {
  if (!(d > 0.0)) throw InputError("benchmark_kernel: d must be positive");
  return Kernel("benchmark", 1,
                [d](const Point3& a, const Point3& b, double* out) {
                  const double r = distance(a, b);
                  if (r == 0.0)
                    *out = 1.0;
                  else if (r < d)
                    *out = r / d;
                  else
                    *out = d / r;
                },
                {{"d", d}});
}

Kernel rpy_kernel(double radius, double viscosity) {
  if (!(radius > 0.0) || !(viscosity > 0.0))
    throw InputError("rpy_kernel: radius and viscosity must be positive");
  const double a = radius, eta = viscosity;
  const double self = 1.0 / (6.0 * std::numbers::pi * eta * a);
  return Kernel("rpy", 3,
                [a, eta, self](const Point3& p, const Point3& q, double* out) {
                  const double rv[3] = {p.x - q.x, p.y - q.y, p.z - q.z};
                  const double r = std::sqrt(rv[0] * rv[0] + rv[1] * rv[1] + rv[2] * rv[2]);
                  double f, g;
                  if (r > 2.0 * a) {
                    const double c = 1.0 / (8.0 * std::numbers::pi * eta * r);
                    const double s = a * a / (r * r);
                    f = c * (1.0 + 2.0 * s / 3.0);
                    g = c * (1.0 - 2.0 * s);
                  } else {
                    f = self * (1.0 - 9.0 * r / (32.0 * a));
                    g = self * (3.0 * r / (32.0 * a));
                  }
                  for (int c = 0; c < 3; ++c)
                    for (int k = 0; k < 3; ++k) {
                      double v = (c == k) ? f : 0.0;
                      if (r > 0.0) v += g * rv[k] * rv[c] / (r * r);
                      out[c * 3 + k] = v;
                    }
                },
                {{"radius", a}, {"viscosity", eta}});
}

Kernel constant_kernel(double value) {
  return Kernel("constant", 1,
                [value](const Point3&, const Point3&, double* out) { *out = value; },
                {{"value", value}});
}

double scaled_d(double base, std::int64_t n, double exponent) {
  if (n < 1) throw InputError("scaled_d: N must be >= 1");
  return base * std::pow(static_cast<double>(n) / 1000.0, exponent);
}

}  // namespace ifmm
