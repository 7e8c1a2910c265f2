// Batch front-end: solves the built-in ironing benchmark from a config file
// and audits stored states for residual penetration.

#include "ftrcontact/benchmark.hpp"
#include "ftrcontact/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace {

const char* kind_name(ftr::StepKind k)
{
  switch (k) {
    case ftr::StepKind::accept_objective: return "objective";
    case ftr::StepKind::accept_infeasibility: return "infeasibility";
    case ftr::StepKind::reject: return "reject";
    case ftr::StepKind::restoration: return "restoration";
  }
  return "?";
}

void write_phase_artifacts(const std::filesystem::path& out, int phase,
                           const ftr::IroningSetup& setup,
                           const ftr::FtrResult& res)
{
  std::string tag = "phase" + std::to_string(phase);
  ftr::write_vtk_file((out / (tag + ".vtk")).string(), setup.hierarchy.finest(),
                      setup.map, res.z, "ironing " + tag);

  std::ofstream csv(out / (tag + "_iterations.csv"));
  ftr::CsvWriter w(csv);
  w.row({"k", "J", "theta", "Delta", "rho", "chi", "type", "inner_iterations"});
  for (const auto& r : res.history)
    w.row({std::to_string(r.k), ftr::csv_num(r.J), ftr::csv_num(r.theta),
           ftr::csv_num(r.Delta), ftr::csv_num(r.rho), ftr::csv_num(r.chi),
           kind_name(r.kind), std::to_string(r.inner_iterations)});

  ftr::PlotSeries chi{"chi", {}};
  ftr::PlotSeries th{"theta", {}}, dl{"Delta", {}};
  for (const auto& r : res.history) {
    chi.points.emplace_back(r.k, r.chi);
    th.points.emplace_back(r.k, r.theta);
    dl.points.emplace_back(r.k, r.Delta);
  }
  ftr::svg_line_plot_file((out / (tag + "_chi.svg")).string(),
                          "optimality measure, " + tag, {chi}, true);
  ftr::svg_line_plot_file((out / (tag + "_theta_delta.svg")).string(),
                          "infeasibility and radius, " + tag, {th, dl}, true);
}

int run_solve(const std::string& config_path, int refine_cli,
              const std::string& phase_cli, const std::string& out_cli,
              bool exact_cli)
{
  ftr::Config cfg = ftr::Config::parse_file(config_path);

  std::string problem = cfg.get_string("problem", "benchmark");
  if (problem != "benchmark")
    throw ftr::ConfigError("problem", "unsupported problem '" + problem + "'");

  ftr::IroningParams ip;
  ip.block_material.lambda = cfg.get_double("lambda_block", ip.block_material.lambda);
  ip.block_material.mu = cfg.get_double("mu_block", ip.block_material.mu);
  ip.pipe_material.lambda = cfg.get_double("lambda_pipe", ip.pipe_material.lambda);
  ip.pipe_material.mu = cfg.get_double("mu_pipe", ip.pipe_material.mu);
  ip.press = cfg.get_double("press", ip.press);
  ip.sweep = cfg.get_double("sweep", ip.sweep);

  ftr::FtrConfig fc;
  fc.eta1 = cfg.get_double("eta1", fc.eta1);
  fc.eta2 = cfg.get_double("eta2", fc.eta2);
  fc.kappa_theta = cfg.get_double("kappa_theta", fc.kappa_theta);
  fc.xi = cfg.get_double("xi", fc.xi);
  fc.Delta0 = cfg.get_double("delta0", fc.Delta0);
  fc.outer_tol = cfg.get_double("outer_tol", fc.outer_tol);
  fc.inner_tol = cfg.get_double("inner_tol", fc.inner_tol);
  fc.max_outer = cfg.get_int("max_outer", fc.max_outer);
  fc.max_inner = cfg.get_int("max_inner", fc.max_inner);
  fc.lumped = !cfg.get_bool("exact_hessian", false);
  if (exact_cli) fc.lumped = false;

  int refine = refine_cli >= 0 ? refine_cli : cfg.get_int("refine", 1);
  std::string phase = !phase_cli.empty() ? phase_cli : cfg.get_string("phase", "all");
  std::string out_dir = !out_cli.empty() ? out_cli : cfg.get_string("out", "out");
  cfg.get_int("seed", 0);  // reserved for test fixtures
  cfg.reject_unknown_keys();

  if (refine < 1) throw ftr::ConfigError("refine", "refinement level must be >= 1");
  std::vector<int> phases;
  if (phase == "1") phases = {1};
  else if (phase == "2") phases = {1, 2};  // phase 2 needs the phase-1 state
  else if (phase == "all") phases = {1, 2};
  else throw ftr::ConfigError("phase", "phase must be 1, 2 or all");
  bool emit_phase1 = phase != "2";

  std::filesystem::path out(out_dir);
  std::filesystem::create_directories(out);

  ftr::IroningSetup setup = ftr::IroningSetup::build(refine, ip);
  std::cout << "benchmark: refinement " << refine << ", "
            << setup.map.num_dofs() << " dofs, "
            << (fc.lumped ? "lumped" : "exact") << " transform\n";

  Eigen::VectorXd z_prev;
  for (int p : phases) {
    ftr::FtrResult res = ftr::solve_ironing_phase(
        setup, p, p > 1 ? &z_prev : nullptr, fc, &std::cout);
    if (res.status == ftr::FtrStatus::restoration_failed) {
      std::cerr << "error: feasibility restoration failed in phase " << p << "\n";
      return 1;
    }
    if (res.status != ftr::FtrStatus::converged) {
      std::cerr << "error: iteration limit reached in phase " << p << "\n";
      return 1;
    }
    std::cout << "phase " << p << ": " << res.history.size()
              << " iterations, J = " << res.J << ", theta = " << res.theta
              << ", chi = " << res.chi
              << ", restorations = " << res.restoration_count << "\n";
    if (p != 1 || emit_phase1) write_phase_artifacts(out, p, setup, res);
    z_prev = res.z;
  }
  return 0;
}

/// `benchmark:N` or a Gmsh .msh path with the default marker names
/// (dirichlet, neumann, contact_nonmortar, contact_mortar, body1, body2).
ftr::Mesh load_mesh_spec(const std::string& spec)
{
  if (spec.rfind("benchmark", 0) == 0) {
    int refine = 1;
    auto colon = spec.find(':');
    if (colon != std::string::npos) refine = std::stoi(spec.substr(colon + 1));
    auto h = ftr::MeshHierarchy::build(ftr::ironing_coarse_mesh(), refine);
    return h.finest();
  }
  std::map<std::string, ftr::Marker> markers{
      {"dirichlet", ftr::Marker::dirichlet},
      {"neumann", ftr::Marker::neumann},
      {"contact_nonmortar", ftr::Marker::contact_nonmortar},
      {"contact_mortar", ftr::Marker::contact_mortar}};
  std::map<std::string, int> bodies{{"body1", 1}, {"body2", 2}};
  return ftr::read_msh_file(spec, markers, bodies);
}

int run_audit(const std::string& state_path, const std::string& mesh_spec)
{
  ftr::Mesh mesh = load_mesh_spec(mesh_spec);
  ftr::DofMap map = ftr::DofMap::build(mesh);
  Eigen::VectorXd z = ftr::read_vtk_state_file(state_path, mesh, map);

  Eigen::VectorXd c = ftr::assemble_gap(mesh, map, z);
  auto nm = ftr::extract_polyline(mesh, map, z, ftr::Marker::contact_nonmortar);
  auto mortar = ftr::extract_polyline(mesh, map, z, ftr::Marker::contact_mortar);
  auto normals = ftr::averaged_normals(mortar);
  double min_gap = std::numeric_limits<double>::infinity();
  const int samples = 20;
  for (int seg = 0; seg < nm.num_segments(); ++seg)
    for (int s = 0; s <= samples; ++s) {
      double t = static_cast<double>(s) / samples;
      Eigen::Vector2d x = (1.0 - t) * nm.pts[seg] + t * nm.pts[seg + 1];
      min_gap = std::min(min_gap, ftr::closest_point(x, mortar, normals).gap);
    }
  std::cout << "non-mortar vertices: " << map.m1 << "\n";
  std::cout << "min pointwise gap: " << std::setprecision(12) << min_gap << "\n";
  std::cout << "min weak gap: " << c.minCoeff() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"frictionless large-deformation contact solver"};
  app.require_subcommand(1);

  std::string config_path, out_dir, phase;
  int refine = -1;
  bool exact_hessian = false;
  auto* solve = app.add_subcommand("solve", "run the benchmark from a config file");
  solve->add_option("config", config_path, "config file (key = value lines)")
      ->required();
  solve->add_option("--refine", refine, "refinement level override");
  solve->add_option("--phase", phase, "phase selection: 1, 2 or all");
  solve->add_option("--out", out_dir, "output directory override");
  solve->add_flag("--exact-hessian", exact_hessian,
                  "use the exact instead of the lumped transform");

  std::string state_path, mesh_spec;
  auto* audit = app.add_subcommand("audit", "report penetration of a stored state");
  audit->add_option("state", state_path, "VTK state file")->required();
  audit->add_option("mesh", mesh_spec, "mesh: benchmark:N or a .msh path")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed())
      return run_solve(config_path, refine, phase, out_dir, exact_hessian);
    return run_audit(state_path, mesh_spec);
  } catch (const ftr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
