#include "ifmm/experiment.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "ifmm/refcheck.hpp"

namespace ifmm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

TreeOptions tree_options(const RunConfig& cfg) {
  TreeOptions t;
  t.leaf_target = cfg.leaf_target;
  t.fixed_depth = cfg.fixed_depth;
  return t;
}

WeightOptions weight_options(const RunConfig& cfg) {
  WeightOptions w;
  if (cfg.weight_mode == "rigorous")
    w.mode = WeightMode::rigorous;
  else if (cfg.weight_mode == "sampled")
    w.mode = WeightMode::sampled;
  else
    throw InputError("unknown weight mode: " + cfg.weight_mode);
  w.sample_columns = cfg.weight_samples;
  w.seed = cfg.seed + 17;
  return w;
}

PrecondSide parse_side(const std::string& s) {
  if (s == "left") return PrecondSide::left;
  if (s == "right") return PrecondSide::right;
  throw InputError("unknown preconditioner side: " + s);
}

// The operator A that defines b = A x_true and the GMRES products.
struct Operator {
  std::string name;
  LinearMap apply;
};

Operator make_operator(const RunConfig& cfg, const Scene& scene, const Kernel& kernel,
                       const std::shared_ptr<const Hierarchy>& hierarchy) {
  const Index dofs = scene.size() * kernel.block_dim();
  std::string kind = cfg.matvec;
  if (kind == "auto") kind = dofs <= cfg.dense_cap ? "dense" : "h2";
  Operator op;
  op.name = kind;
  if (kind == "dense") {
    auto A = std::make_shared<Matrix>(ref::assemble_matrix(scene.points, kernel));
    op.apply = [A](const Vector& x) { return ref::dense_matvec(*A, x); };
  } else if (kind == "kernel") {
    op.apply = [pts = scene.points, kernel](const Vector& x) {
      return ref::kernel_matvec(pts, kernel, x);
    };
  } else if (kind == "h2") {
    ChebyshevOptions co;
    co.nodes = cfg.matvec_nodes;
    co.basis_epsilon = cfg.matvec_basis_epsilon;
    auto ops = std::make_shared<H2Operators>(chebyshev_operators(hierarchy, kernel, co));
    op.apply = [ops](const Vector& x) { return h2_matvec_input_order(*ops, x); };
  } else {
    throw InputError("unknown matvec operator: " + kind);
  }
  return op;
}

struct Preconditioner {
  LinearMap apply;
  std::optional<IFMMFactorization> factor;
};

IFMMFactorization build_ifmm(const RunConfig& cfg, const Kernel& kernel,
                             const std::shared_ptr<const Hierarchy>& hierarchy,
                             const Vector* b_input, RunReport& report) {
  auto t0 = Clock::now();
  ChebyshevOptions co;
  co.nodes = cfg.cheb_nodes;
  co.basis_epsilon = cfg.effective_basis_epsilon();
  ExtendedGraph graph;
  {
    H2Operators ops = chebyshev_operators(hierarchy, kernel, co);
    initialize_weights(ops, weight_options(cfg));
    report.h2_max_rank = ops.max_rank();
    report.h2_mean_rank = ops.mean_rank();
    const Vector b_tree = b_input ? to_tree_order(*b_input, hierarchy->permutation, kernel.block_dim())
                                  : Vector::Zero(ops.dofs());
    graph = assemble_extended_graph(ops, b_tree);
  }
  report.timings.initialization += seconds_since(t0);

  t0 = Clock::now();
  const double sigma0 = estimate_sigma0(graph);
  report.timings.sigma0_estimation = seconds_since(t0);
  report.sigma0 = sigma0;

  FactorOptions fo;
  fo.epsilon = cfg.epsilon;
  fo.sigma0 = sigma0;
  fo.spectra_stride = cfg.spectra_stride;
  t0 = Clock::now();
  IFMMFactorization f = factorize(std::move(graph), fo);
  report.timings.elimination = seconds_since(t0);
  report.timings.breakdown = f.timings();
  report.fill = f.stats();
  return f;
}

RunReport base_report(const RunConfig& cfg, const Scene& scene, const Kernel& kernel,
                      const Hierarchy& h) {
  RunReport r;
  r.config = cfg;
  r.dofs = scene.size() * kernel.block_dim();
  r.depth = h.depth();
  Index clusters = 0;
  for (const auto& lvl : h.tree.levels) clusters += static_cast<Index>(lvl.size());
  r.clusters = clusters;
  r.d = cfg.kernel == "benchmark" ? cfg.effective_d() : 0.0;
  return r;
}

double rel(const Vector& a, const Vector& b) {
  const double nb = b.norm();
  return nb > 0 ? (a - b).norm() / nb : (a - b).norm();
}

}  // namespace

double RunConfig::effective_d() const {
  if (d_scaling == "none") return d;
  if (d_scaling == "sphere") return scaled_d(d, n_points, -0.5);
  if (d_scaling == "cube") return scaled_d(d, n_points, -1.0 / 3.0);
  throw InputError("unknown d scaling: " + d_scaling);
}

Scene make_scene(const RunConfig& cfg) {
  if (cfg.distribution == "sphere") return sphere_surface(cfg.n_points, cfg.seed);
  if (cfg.distribution == "cube") return cube_uniform(cfg.n_points, cfg.seed);
  if (cfg.distribution == "lattice")
    return sphere_lattice(cfg.lattice_nx, cfg.lattice_ny, cfg.lattice_nz,
                          cfg.lattice_subdivision, cfg.lattice_spacing, cfg.sphere_radius);
  if (cfg.distribution == "shells") return concentric_shells(cfg.shell_subdivisions, cfg.shell_radii);
  if (cfg.distribution == "file") {
    std::ifstream in(cfg.scene_file);
    if (!in) throw InputError("cannot open scene file: " + cfg.scene_file);
    return read_scene(in);
  }
  throw InputError("unknown distribution: " + cfg.distribution);
}

Kernel make_kernel(const RunConfig& cfg, std::int64_t n_points) {
  if (cfg.kernel == "benchmark") {
    RunConfig c = cfg;
    c.n_points = n_points;
    return benchmark_kernel(c.effective_d());
  }
  if (cfg.kernel == "rpy") return rpy_kernel(cfg.particle_radius, cfg.viscosity);
  throw InputError("unknown kernel: " + cfg.kernel);
}

RunReport run_direct(const RunConfig& cfg_in) {
  const auto t_start = Clock::now();
  RunConfig cfg = cfg_in;
  cfg.mode = "direct";
  auto t0 = Clock::now();
  const Scene scene = make_scene(cfg);
  cfg.n_points = scene.size();
  const Kernel kernel = make_kernel(cfg, scene.size());
  auto hierarchy = make_hierarchy(scene.points, tree_options(cfg));
  RunReport report = base_report(cfg, scene, kernel, *hierarchy);

  Operator op = make_operator(cfg, scene, kernel, hierarchy);
  report.operator_name = op.name;
  const Vector x_true = ref::random_solution(report.dofs, cfg.seed + 1);
  const Vector b = op.apply(x_true);
  report.timings.initialization = seconds_since(t0);

  IFMMFactorization f = build_ifmm(cfg, kernel, hierarchy, &b, report);
  t0 = Clock::now();
  const Vector x = f.solve(b);
  report.timings.substitution = seconds_since(t0);

  report.relative_error = rel(x, x_true);
  report.relative_residual = rel(op.apply(x), b);
  report.timings.total = seconds_since(t_start);
  return report;
}

RunReport run_iterative(const RunConfig& cfg_in) {
  const auto t_start = Clock::now();
  RunConfig cfg = cfg_in;
  cfg.mode = "gmres";
  auto t0 = Clock::now();
  const Scene scene = make_scene(cfg);
  cfg.n_points = scene.size();
  const Kernel kernel = make_kernel(cfg, scene.size());
  auto hierarchy = make_hierarchy(scene.points, tree_options(cfg));
  RunReport report = base_report(cfg, scene, kernel, *hierarchy);

  Operator op = make_operator(cfg, scene, kernel, hierarchy);
  report.operator_name = op.name;
  const Vector x_true = ref::random_solution(report.dofs, cfg.seed + 1);
  const Vector b = op.apply(x_true);
  report.timings.initialization = seconds_since(t0);

  Preconditioner pc;
  PrecondSide side = PrecondSide::none;
  if (cfg.precond == "ifmm") {
    side = parse_side(cfg.precond_side);
    pc.factor.emplace(build_ifmm(cfg, kernel, hierarchy, nullptr, report));
    const IFMMFactorization* f = &*pc.factor;
    pc.apply = [f, &report](const Vector& v) {
      const auto ts = Clock::now();
      Vector out = f->solve(v);
      report.timings.substitution += seconds_since(ts);
      return out;
    };
  } else if (cfg.precond == "blockdiag") {
    side = parse_side(cfg.precond_side);
    t0 = Clock::now();
    const int bd = kernel.block_dim();
    const auto& pts = scene.points;
    auto block = [&](Index start, Index len) -> Matrix {
      const Index p0 = start / bd;
      const Index p1 = (start + len + bd - 1) / bd;
      Matrix full = kernel.block(pts.data() + p0, p1 - p0, pts.data() + p0, p1 - p0);
      return full.block(start - p0 * bd, start - p0 * bd, len, len);
    };
    pc.apply = block_diag_preconditioner(block, report.dofs, cfg.block_size);
    report.timings.elimination = seconds_since(t0);
  } else if (cfg.precond != "none") {
    throw InputError("unknown preconditioner: " + cfg.precond);
  }

  t0 = Clock::now();
  GmresResult res = gmres(op.apply, b, cfg.gmres_tol, cfg.max_iters, pc.apply, side);
  report.timings.gmres = seconds_since(t0);
  report.trace = res.trace;
  report.relative_error = rel(res.x, x_true);
  report.relative_residual = rel(op.apply(res.x), b);
  report.timings.total = seconds_since(t_start);
  return report;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InputError("loglog_slope: need >= 2 points");
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] <= 0 || y[i] <= 0) throw InputError("loglog_slope: values must be positive");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  if (den == 0) throw InputError("loglog_slope: degenerate abscissae");
  return (n * sxy - sx * sy) / den;
}

ScalingResult run_scaling(const RunConfig& base, const std::vector<std::int64_t>& sizes) {
  ScalingResult out;
  std::vector<double> ns, ts;
  double rmax = 0, rmin = 0, emax = 0, emin = 0;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    RunConfig cfg = base;
    cfg.n_points = sizes[k];
    RunReport r = run_direct(cfg);
    ns.push_back(static_cast<double>(r.dofs));
    ts.push_back(r.timings.elimination + r.timings.substitution);
    const auto rank = static_cast<double>(r.fill.max_far_rank);
    const double ratio = r.fill.cluster_count
                             ? static_cast<double>(r.fill.peak_edges) / static_cast<double>(r.fill.cluster_count)
                             : 0.0;
    if (k == 0) {
      rmax = rmin = rank;
      emax = emin = ratio;
    }
    rmax = std::max(rmax, rank);
    rmin = std::min(rmin, rank);
    emax = std::max(emax, ratio);
    emin = std::min(emin, ratio);
    out.runs.push_back(std::move(r));
  }
  if (sizes.size() >= 2) out.slope = loglog_slope(ns, ts);
  out.max_rank_ratio = rmin > 0 ? rmax / rmin : 0.0;
  out.max_edge_ratio = emax;
  out.min_edge_ratio = emin;
  return out;
}

StokesResult run_stokes(const RunConfig& base,
                        const std::vector<std::pair<std::string, int>>& settings) {
  StokesResult out;
  for (const auto& [precond, nodes] : settings) {
    RunConfig cfg = base;
    cfg.kernel = "rpy";
    cfg.precond = precond;
    if (nodes > 0) cfg.cheb_nodes = nodes;
    out.runs.push_back(run_iterative(cfg));
  }
  return out;
}

SpectrumResult preconditioned_spectrum(const RunConfig& cfg_in, double radius) {
  RunConfig cfg = cfg_in;
  const Scene scene = make_scene(cfg);
  cfg.n_points = scene.size();
  const Kernel kernel = make_kernel(cfg, scene.size());
  auto hierarchy = make_hierarchy(scene.points, tree_options(cfg));
  RunReport scratch = base_report(cfg, scene, kernel, *hierarchy);
  const Matrix A = ref::assemble_matrix(scene.points, kernel);
  IFMMFactorization f = build_ifmm(cfg, kernel, hierarchy, nullptr, scratch);
  Matrix M(A.rows(), A.cols());
  for (Index j = 0; j < A.cols(); ++j) M.col(j) = f.solve(A.col(j));
  const auto eigs = ref::dense_eigs_general(M);
  SpectrumResult s;
  Index inside = 0;
  for (const auto& z : eigs) {
    s.real.push_back(z.real());
    s.imag.push_back(z.imag());
    if (std::abs(z - 1.0) < radius) ++inside;
  }
  s.clustered_fraction = eigs.empty() ? 0.0 : static_cast<double>(inside) / static_cast<double>(eigs.size());
  return s;
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j = {
      {"kernel", c.kernel},
      {"distribution", c.distribution},
      {"n_points", c.n_points},
      {"cheb_nodes", c.cheb_nodes},
      {"epsilon", c.epsilon},
      {"basis_epsilon", c.effective_basis_epsilon()},
      {"leaf_target", c.leaf_target},
      {"d", c.d},
      {"d_scaling", c.d_scaling},
      {"mode", c.mode},
      {"precond", c.precond},
      {"precond_side", c.precond_side},
      {"gmres_tol", c.gmres_tol},
      {"max_iters", c.max_iters},
      {"seed", c.seed},
      {"weight_mode", c.weight_mode},
      {"matvec", c.matvec},
      {"matvec_nodes", c.matvec_nodes},
  };
  j["fixed_depth"] = c.fixed_depth ? nlohmann::json(*c.fixed_depth) : nlohmann::json(nullptr);
  if (c.distribution == "file") j["scene_file"] = c.scene_file;
  if (c.precond == "blockdiag") j["block_size"] = c.block_size;
  if (c.kernel == "rpy") {
    j["particle_radius"] = c.particle_radius;
    j["viscosity"] = c.viscosity;
  }
  if (c.distribution == "lattice")
    j["lattice"] = {{"nx", c.lattice_nx}, {"ny", c.lattice_ny}, {"nz", c.lattice_nz},
                    {"subdivision", c.lattice_subdivision}, {"spacing", c.lattice_spacing},
                    {"sphere_radius", c.sphere_radius}};
  if (c.distribution == "shells")
    j["shells"] = {{"subdivisions", c.shell_subdivisions}, {"radii", c.shell_radii}};
  return j;
}

nlohmann::json to_json(const RunReport& r) {
  using nlohmann::json;
  const auto& t = r.timings;
  json levels = json::array();
  for (const auto& L : r.fill.levels)
    levels.push_back({{"level", L.level},
                      {"clusters", L.clusters},
                      {"dense_updates", L.dense_updates},
                      {"compressed", L.compressed},
                      {"dropped", L.dropped},
                      {"mean_rank", L.mean_rank()},
                      {"max_rank", L.max_rank},
                      {"basis_updates", L.basis_updates},
                      {"max_basis_rank", L.max_basis_rank},
                      {"mean_basis_rank", L.mean_basis_rank}});
  json j = {
      {"schema_version", kReportSchemaVersion},
      {"config", to_json(r.config)},
      {"problem",
       {{"dofs", r.dofs},
        {"depth", r.depth},
        {"clusters", r.clusters},
        {"d", r.d},
        {"sigma0", r.sigma0},
        {"operator", r.operator_name}}},
      {"timings",
       {{"initialization", t.initialization},
        {"sigma0_estimation", t.sigma0_estimation},
        {"elimination", t.elimination},
        {"substitution", t.substitution},
        {"gmres", t.gmres},
        {"total", t.total},
        {"elimination_breakdown",
         {{"lu_and_triangular_solves", t.breakdown.lu_and_triangular_solves},
          {"matmul_updates", t.breakdown.matmul_updates},
          {"lowrank_approximations", t.breakdown.lowrank_approximations},
          {"operator_transfer", t.breakdown.operator_transfer}}}}},
      {"ranks",
       {{"h2_max_rank", r.h2_max_rank},
        {"h2_mean_rank", r.h2_mean_rank},
        {"max_far_rank", r.fill.max_far_rank},
        {"mean_far_rank", r.fill.mean_far_rank},
        {"levels", levels}}},
      {"sparsity",
       {{"peak_edges", r.fill.peak_edges},
        {"cluster_count", r.fill.cluster_count},
        {"edges_per_cluster", r.fill.cluster_count ? double(r.fill.peak_edges) / double(r.fill.cluster_count) : 0.0}}},
  };
  j["errors"] = {
      {"relative_error", r.relative_error ? json(*r.relative_error) : json(nullptr)},
      {"relative_residual", r.relative_residual ? json(*r.relative_residual) : json(nullptr)}};
  if (r.trace) {
    j["iterations"] = {{"side", to_string(r.trace->side)},
                       {"count", r.trace->iterations},
                       {"converged", r.trace->converged},
                       {"residual_history", r.trace->residual_history}};
  } else {
    j["iterations"] = nullptr;
  }
  if (!r.fill.spectra.empty()) {
    json sp = json::array();
    for (const auto& s : r.fill.spectra)
      sp.push_back({{"level", s.level},
                    {"well_separated", s.well_separated},
                    {"rows", s.rows},
                    {"cols", s.cols},
                    {"rank", s.rank},
                    {"sigmas", s.sigmas}});
    j["fill_spectra"] = sp;
  }
  return j;
}

std::string csv_header() {
  return "n_points,dofs,cheb_nodes,epsilon,d,mode,precond,precond_side,initialization,"
         "sigma0_estimation,elimination,substitution,gmres,total,relative_error,"
         "relative_residual,iterations,converged,max_far_rank,peak_edges,cluster_count";
}

std::string csv_row(const RunReport& r) {
  std::ostringstream os;
  os << std::setprecision(10);
  const auto& c = r.config;
  const auto& t = r.timings;
  os << c.n_points << ',' << r.dofs << ',' << c.cheb_nodes << ',' << c.epsilon << ',' << r.d
     << ',' << c.mode << ',' << c.precond << ',' << (r.trace ? to_string(r.trace->side) : "none")
     << ',' << t.initialization << ',' << t.sigma0_estimation << ',' << t.elimination << ','
     << t.substitution << ',' << t.gmres << ',' << t.total << ',';
  if (r.relative_error) os << *r.relative_error;
  os << ',';
  if (r.relative_residual) os << *r.relative_residual;
  os << ',';
  if (r.trace) os << r.trace->iterations;
  os << ',';
  if (r.trace) os << (r.trace->converged ? "true" : "false");
  os << ',' << r.fill.max_far_rank << ',' << r.fill.peak_edges << ',' << r.fill.cluster_count;
  return os.str();
}

}  // namespace ifmm
