#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ifmm/factor.hpp"
#include "ifmm/kernel.hpp"
#include "ifmm/krylov.hpp"

namespace ifmm {

inline constexpr const char* kReportSchemaVersion = "1.0.0";

struct RunConfig {
  std::string kernel = "benchmark";        // benchmark | rpy
  std::string distribution = "sphere";     // sphere | cube | lattice | shells | file
  std::string scene_file;
  std::int64_t n_points = 1000;
  int cheb_nodes = 4;
  double epsilon = 1e-3;
  double basis_epsilon = -1.0;             // < 0: same as epsilon
  int leaf_target = 100;
  std::optional<int> fixed_depth;
  double d = 1e-3;
  std::string d_scaling = "none";          // none | sphere | cube
  std::string mode = "direct";             // direct | gmres
  std::string precond = "none";            // none | blockdiag | ifmm
  std::string precond_side = "right";      // left | right
  double gmres_tol = 1e-10;
  int max_iters = 500;
  std::uint64_t seed = 1;
  std::string weight_mode = "rigorous";    // rigorous | sampled
  Index weight_samples = 64;
  // Operator used for GMRES products and for b = A x_true.
  std::string matvec = "auto";             // auto | dense | kernel | h2
  int matvec_nodes = 4;
  double matvec_basis_epsilon = 1e-8;
  Index dense_cap = 10000;                 // auto: stored dense matrix up to this many unknowns
  Index block_size = 126;
  // RPY scene parameters.
  double particle_radius = 0.25;
  double viscosity = 1.0;
  int lattice_nx = 4, lattice_ny = 4, lattice_nz = 4;
  int lattice_subdivision = 1;
  double lattice_spacing = 3.0;
  double sphere_radius = 1.0;
  std::vector<int> shell_subdivisions = {1, 2, 3};
  std::vector<double> shell_radii = {1.0, 2.0, 4.0};
  int spectra_stride = 0;

  double effective_d() const;
  double effective_basis_epsilon() const { return basis_epsilon < 0 ? epsilon : basis_epsilon; }
};

nlohmann::json to_json(const RunConfig& cfg);

struct RunTimings {
  double initialization = 0.0;
  double sigma0_estimation = 0.0;
  double elimination = 0.0;
  double substitution = 0.0;
  double total = 0.0;
  EliminationTimings breakdown;
  double gmres = 0.0;
};

struct RunReport {
  RunConfig config;
  Index dofs = 0;
  int depth = 0;
  Index clusters = 0;
  double d = 0.0;
  double sigma0 = 0.0;
  RunTimings timings;
  FillinStats fill;
  Index h2_max_rank = 0;
  double h2_mean_rank = 0.0;
  std::optional<double> relative_error;     // vs x_true
  std::optional<double> relative_residual;  // ||b - A x|| / ||b|| for the run's operator
  std::string operator_name;
  std::optional<IterationTrace> trace;
};

nlohmann::json to_json(const RunReport& report);
std::string csv_header();
std::string csv_row(const RunReport& report);

Scene make_scene(const RunConfig& cfg);
Kernel make_kernel(const RunConfig& cfg, std::int64_t n_points);

RunReport run_direct(const RunConfig& cfg);
RunReport run_iterative(const RunConfig& cfg);

struct ScalingResult {
  std::vector<RunReport> runs;
  double slope = 0.0;             // log-log fit of elimination + substitution time
  double max_rank_ratio = 0.0;    // max / min of the per-run max far-field rank
  double max_edge_ratio = 0.0;    // largest peak_edges / clusters
  double min_edge_ratio = 0.0;
};
ScalingResult run_scaling(const RunConfig& base, const std::vector<std::int64_t>& sizes);
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct StokesResult {
  std::vector<RunReport> runs;  // one per preconditioner setting
};
// Each entry: precond name ("none", "blockdiag", "ifmm") and Chebyshev order for ifmm.
StokesResult run_stokes(const RunConfig& base,
                        const std::vector<std::pair<std::string, int>>& settings);

struct SpectrumResult {
  std::vector<double> real, imag;
  double clustered_fraction = 0.0;  // share with |lambda - 1| < radius
};
// Eigenvalues of P^{-1} A with the IFMM preconditioner and the exact dense A.
SpectrumResult preconditioned_spectrum(const RunConfig& cfg, double radius = 0.5);

}  // namespace ifmm
