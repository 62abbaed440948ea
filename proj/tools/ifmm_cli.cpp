#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ifmm/experiment.hpp"

namespace {

using ifmm::RunConfig;
using ifmm::RunReport;

void add_common(CLI::App& app, RunConfig& c) {
  app.add_option("--kernel", c.kernel, "Kernel")->check(CLI::IsMember({"benchmark", "rpy"}));
  app.add_option("--n-points", c.n_points, "Number of points")->check(CLI::PositiveNumber);
  app.add_option("--distribution", c.distribution, "Point distribution")
      ->check(CLI::IsMember({"sphere", "cube", "lattice", "shells", "file"}));
  app.add_option("--scene-file", c.scene_file, "Scene file for --distribution file");
  app.add_option("--cheb-nodes", c.cheb_nodes, "Chebyshev nodes per dimension")
      ->check(CLI::Range(1, 12));
  app.add_option("--epsilon", c.epsilon, "Relative truncation threshold");
  app.add_option("--basis-epsilon", c.basis_epsilon,
                 "Threshold for the interpolation bases (default: --epsilon)");
  app.add_option("--leaf-target", c.leaf_target, "Average points per leaf")
      ->check(CLI::PositiveNumber);
  app.add_option("--depth", c.fixed_depth, "Force the tree depth");
  app.add_option("--d", c.d, "Kernel regularization parameter");
  app.add_option("--d-scaling", c.d_scaling, "Scale d with N")
      ->check(CLI::IsMember({"none", "sphere", "cube"}));
  app.add_option("--mode", c.mode, "Solver mode")->check(CLI::IsMember({"direct", "gmres"}));
  app.add_option("--precond", c.precond, "GMRES preconditioner")
      ->check(CLI::IsMember({"none", "blockdiag", "ifmm"}));
  app.add_option("--precond-side", c.precond_side, "Preconditioner side")
      ->check(CLI::IsMember({"left", "right"}));
  app.add_option("--gmres-tol", c.gmres_tol, "GMRES relative residual tolerance");
  app.add_option("--max-iters", c.max_iters, "GMRES iteration cap");
  app.add_option("--seed", c.seed, "Random seed");
  app.add_option("--weights", c.weight_mode, "Basis weight mode")
      ->check(CLI::IsMember({"rigorous", "sampled"}));
  app.add_option("--matvec", c.matvec, "Operator for products with A")
      ->check(CLI::IsMember({"auto", "dense", "kernel", "h2"}));
  app.add_option("--matvec-nodes", c.matvec_nodes, "Chebyshev nodes of the h2 product operator");
  app.add_option("--dense-cap", c.dense_cap, "Largest system stored densely with --matvec auto");
  app.add_option("--block-size", c.block_size, "Block size of the block-diagonal preconditioner");
  app.add_option("--radius", c.particle_radius, "RPY particle radius");
  app.add_option("--viscosity", c.viscosity, "RPY viscosity");
  app.add_option("--lattice", c.lattice_nx, "Spheres per lattice edge")
      ->each([&c](const std::string& s) { c.lattice_ny = c.lattice_nz = std::stoi(s); });
  app.add_option("--lattice-subdivision", c.lattice_subdivision, "Icosphere refinement of each sphere");
  app.add_option("--lattice-spacing", c.lattice_spacing, "Distance between sphere centers");
  app.add_option("--shell-subdivisions", c.shell_subdivisions, "Refinement level of each shell");
  app.add_option("--shell-radii", c.shell_radii, "Radius of each shell");
  app.add_option("--spectra-stride", c.spectra_stride, "Record fill-in spectra every k-th elimination");
}

struct Output {
  std::string path;
  std::string format = "json";
};

void add_output(CLI::App& app, Output& o) {
  app.add_option("--out", o.path, "Output path (stdout when omitted)");
  app.add_option("--format", o.format, "Report format")->check(CLI::IsMember({"json", "csv"}));
}

void emit(const Output& o, const std::string& text) {
  if (o.path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(o.path);
  if (!out) throw ifmm::InputError("cannot write " + o.path);
  out << text;
}

std::string render(const Output& o, const std::vector<RunReport>& reports,
                   const nlohmann::json& extra = nullptr) {
  if (o.format == "csv") {
    std::string s = ifmm::csv_header() + "\n";
    for (const auto& r : reports) s += ifmm::csv_row(r) + "\n";
    return s;
  }
  if (reports.size() == 1 && extra.is_null()) return ifmm::to_json(reports.front()).dump(2) + "\n";
  nlohmann::json j = {{"schema_version", ifmm::kReportSchemaVersion}, {"runs", nlohmann::json::array()}};
  for (const auto& r : reports) j["runs"].push_back(ifmm::to_json(r));
  if (!extra.is_null()) j["summary"] = extra;
  return j.dump(2) + "\n";
}

std::pair<std::string, int> parse_setting(const std::string& s) {
  // "none", "blockdiag", "ifmm:3"
  const auto colon = s.find(':');
  if (colon == std::string::npos) return {s, 0};
  return {s.substr(0, colon), std::stoi(s.substr(colon + 1))};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inverse fast multipole solver experiments"};
  app.set_config("--config", "", "TOML/INI configuration file");
  app.require_subcommand(1);

  RunConfig cfg;
  Output out;

  auto* run = app.add_subcommand("run", "Direct solve or GMRES on one problem");
  add_common(*run, cfg);
  add_output(*run, out);

  std::vector<std::int64_t> sizes = {10000, 20000, 40000, 80000};
  auto* sweep = app.add_subcommand("sweep", "Direct-solver scaling sweep over N");
  add_common(*sweep, cfg);
  add_output(*sweep, out);
  sweep->add_option("--sizes", sizes, "Problem sizes");

  std::vector<std::string> settings = {"none", "blockdiag", "ifmm:2", "ifmm:3"};
  auto* stokes = app.add_subcommand("stokes", "Preconditioner comparison on an RPY scene");
  add_common(*stokes, cfg);
  add_output(*stokes, out);
  stokes->add_option("--settings", settings, "Preconditioners, e.g. none blockdiag ifmm:2");

  double radius = 0.5;
  auto* spectrum = app.add_subcommand("spectrum", "Eigenvalues of the IFMM-preconditioned matrix");
  add_common(*spectrum, cfg);
  add_output(*spectrum, out);
  spectrum->add_option("--cluster-radius", radius, "Cluster radius around 1");

  auto* scene = app.add_subcommand("scene", "Write the generated point set");
  add_common(*scene, cfg);
  add_output(*scene, out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      RunReport r = cfg.mode == "gmres" ? ifmm::run_iterative(cfg) : ifmm::run_direct(cfg);
      emit(out, render(out, {r}));
    } else if (*sweep) {
      auto res = ifmm::run_scaling(cfg, sizes);
      nlohmann::json summary = {{"slope", res.slope},
                                {"max_rank_ratio", res.max_rank_ratio},
                                {"max_edges_per_cluster", res.max_edge_ratio},
                                {"min_edges_per_cluster", res.min_edge_ratio}};
      emit(out, render(out, res.runs, summary));
    } else if (*stokes) {
      if (cfg.distribution == "sphere" || cfg.distribution == "cube") cfg.distribution = "lattice";
      if (stokes->count("--gmres-tol") == 0) cfg.gmres_tol = 1e-8;
      std::vector<std::pair<std::string, int>> parsed;
      for (const auto& s : settings) parsed.push_back(parse_setting(s));
      auto res = ifmm::run_stokes(cfg, parsed);
      emit(out, render(out, res.runs, nlohmann::json::object()));
    } else if (*spectrum) {
      auto s = ifmm::preconditioned_spectrum(cfg, radius);
      nlohmann::json j = {{"config", ifmm::to_json(cfg)},
                          {"radius", radius},
                          {"clustered_fraction", s.clustered_fraction},
                          {"real", s.real},
                          {"imag", s.imag}};
      emit(out, j.dump(2) + "\n");
    } else if (*scene) {
      std::ostringstream os;
      ifmm::write_scene(os, ifmm::make_scene(cfg));
      emit(out, os.str());
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
