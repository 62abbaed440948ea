#include <array>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <utility>

#include "ifmm/kernel.hpp"

namespace ifmm {

std::uint64_t Rng::next_u64() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 == 0.0);
  const double u2 = uniform();
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double ang = 2.0 * std::numbers::pi * u2;
  spare_ = rad * std::sin(ang);
  has_spare_ = true;
  return rad * std::cos(ang);
}

Scene sphere_surface(std::int64_t n, std::uint64_t seed) {
  if (n < 1) throw InputError("sphere_surface: N must be >= 1");
  Scene s;
  s.generator = "sphere_surface";
  s.params = {{"n", static_cast<double>(n)}};
  s.seed = seed;
  Rng rng(seed);
  s.points.reserve(n);
  while (static_cast<std::int64_t>(s.points.size()) < n) {
    const double x = rng.normal(), y = rng.normal(), z = rng.normal();
    const double r = std::sqrt(x * x + y * y + z * z);
    if (r < 1e-12) continue;
    s.points.push_back({x / r, y / r, z / r, static_cast<std::int64_t>(s.points.size())});
  }
  return s;
}

Scene cube_uniform(std::int64_t n, std::uint64_t seed) {
  if (n < 1) throw InputError("cube_uniform: N must be >= 1");
  Scene s;
  s.generator = "cube_uniform";
  s.params = {{"n", static_cast<double>(n)}};
  s.seed = seed;
  Rng rng(seed);
  s.points.resize(n);
  for (std::int64_t k = 0; k < n; ++k) {
    const double x = rng.uniform(-1.0, 1.0);
    const double y = rng.uniform(-1.0, 1.0);
    const double z = rng.uniform(-1.0, 1.0);
    s.points[k] = {x, y, z, k};
  }
  return s;
}

std::vector<Point3> icosphere(int subdivision) {
  if (subdivision < 0) throw InputError("icosphere: subdivision must be >= 0");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<std::array<double, 3>> v = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
      {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
  auto normalize = [](std::array<double, 3> p) {
    const double r = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
    return std::array<double, 3>{p[0] / r, p[1] / r, p[2] / r};
  };
  for (auto& p : v) p = normalize(p);
  for (int s = 0; s < subdivision; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const auto& pa = v[a];
      const auto& pb = v[b];
      v.push_back(normalize({pa[0] + pb[0], pa[1] + pb[1], pa[2] + pb[2]}));
      const int id = static_cast<int>(v.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int a = mid(f[0], f[1]), b = mid(f[1], f[2]), c = mid(f[2], f[0]);
      next.push_back({f[0], a, c});
      next.push_back({f[1], b, a});
      next.push_back({f[2], c, b});
      next.push_back({a, b, c});
    }
    faces = std::move(next);
  }
  std::vector<Point3> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k)
    out[k] = {v[k][0], v[k][1], v[k][2], static_cast<std::int64_t>(k)};
  return out;
}

Scene sphere_lattice(int nx, int ny, int nz, int subdivision, double spacing,
                     double sphere_radius) {
  if (nx < 1 || ny < 1 || nz < 1) throw InputError("sphere_lattice: empty lattice");
  if (!(spacing > 0.0) || !(sphere_radius > 0.0))
    throw InputError("sphere_lattice: spacing and radius must be positive");
  const auto unit = icosphere(subdivision);
  Scene s;
  s.generator = "sphere_lattice";
  s.params = {{"nx", double(nx)}, {"ny", double(ny)}, {"nz", double(nz)},
              {"subdivision", double(subdivision)}, {"spacing", spacing},
              {"sphere_radius", sphere_radius}};
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      for (int k = 0; k < nz; ++k)
        for (const auto& p : unit)
          s.points.push_back({i * spacing + sphere_radius * p.x, j * spacing + sphere_radius * p.y,
                              k * spacing + sphere_radius * p.z,
                              static_cast<std::int64_t>(s.points.size())});
  return s;
}

Scene concentric_shells(const std::vector<int>& subdivisions, const std::vector<double>& radii) {
  if (subdivisions.empty() || subdivisions.size() != radii.size())
    throw InputError("concentric_shells: need one radius per shell");
  Scene s;
  s.generator = "concentric_shells";
  for (std::size_t k = 0; k < subdivisions.size(); ++k) {
    if (!(radii[k] > 0.0)) throw InputError("concentric_shells: radii must be positive");
    s.params["subdivision_" + std::to_string(k)] = subdivisions[k];
    s.params["radius_" + std::to_string(k)] = radii[k];
    for (const auto& p : icosphere(subdivisions[k]))
      s.points.push_back({radii[k] * p.x, radii[k] * p.y, radii[k] * p.z,
                          static_cast<std::int64_t>(s.points.size())});
  }
  return s;
}

void write_scene(std::ostream& os, const Scene& scene) {
  os << std::setprecision(17);
  for (const auto& p : scene.points) os << p.x << ' ' << p.y << ' ' << p.z << '\n';
}

Scene read_scene(std::istream& is) {
  Scene s;
  s.generator = "file";
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    Point3 p;
    if (!(ls >> p.x >> p.y >> p.z)) throw InputError("read_scene: malformed line: " + line);
    p.global_index = static_cast<std::int64_t>(s.points.size());
    s.points.push_back(p);
  }
  return s;
}

}  // namespace ifmm
