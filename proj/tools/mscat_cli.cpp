// Command-line front end: shape properties, discrete and continuum solves,
// the discrete-vs-continuum lattice study, the exact-sphere oracle, and
// refinement studies. Exit codes: 0 success, 1 validation error, 2 solver
// failure. Warnings go to stderr, results to stdout or the requested files.
#include "mscat/oracle.hpp"
#include "mscat/scene_io.hpp"

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <iostream>

namespace {

using namespace mscat;

void print_warnings(const Scene& scene) {
  for (const auto& w : scene.warnings()) std::cerr << "warning: " << w << "\n";
  std::cerr << "scene: M = " << scene.count() << ", a = " << scene.max_radius()
            << ", d = " << scene.min_gap()
            << ", ka = " << scene.medium().k() * scene.max_radius() << "\n";
}

ChargeSolution solve_with_settings(const Scene& scene, const SolverSettings& s) {
  const AssembledSystem sys = assemble_system(scene);
  if (s.method == "iterative") {
    ChargeSolution sol = solve_iterative(sys, s.max_iter, s.tol);
    if (sol.diverged)
      throw std::runtime_error("iterative solve diverged (coupling margin " +
                               std::to_string(sol.contraction_margin) + ")");
    if (!sol.converged)
      throw std::runtime_error("iterative solve did not converge in " +
                               std::to_string(s.max_iter) + " iterations");
    return sol;
  }
  return solve_direct(sys);
}

ParticleShape shape_from_flags(const std::string& sphere_a,
                               const std::vector<double>& ellipsoid,
                               const std::string& mesh_path) {
  const int given = (!sphere_a.empty()) + (!ellipsoid.empty()) + (!mesh_path.empty());
  if (given != 1)
    throw std::invalid_argument("give exactly one of --sphere, --ellipsoid, --mesh");
  if (!sphere_a.empty()) return Sphere{std::stod(sphere_a)};
  if (!ellipsoid.empty()) {
    if (ellipsoid.size() != 3)
      throw std::invalid_argument("--ellipsoid needs three semi-axes");
    return Ellipsoid{Vec3(ellipsoid[0], ellipsoid[1], ellipsoid[2])};
  }
  return load_mesh(mesh_path);
}

int run_capacitance(const std::string& sphere_a, const std::vector<double>& ellipsoid,
                    const std::string& mesh_path) {
  const ParticleShape shape = shape_from_flags(sphere_a, ellipsoid, mesh_path);
  std::cout << "capacitance " << detail::fmt17(capacitance(shape)) << "\n";
  std::cout << "volume " << detail::fmt17(volume(shape)) << "\n";
  return 0;
}

int run_polarizability(const std::string& sphere_a,
                       const std::vector<double>& ellipsoid,
                       const std::string& mesh_path) {
  const ParticleShape shape = shape_from_flags(sphere_a, ellipsoid, mesh_path);
  const PolarizabilityTensor t = polarizability(shape);
  std::cout << "provenance "
            << (t.provenance == PolarizabilityTensor::Provenance::ClosedForm
                    ? "closed-form"
                    : "bem")
            << "\n";
  for (int p = 0; p < 3; ++p) {
    for (int q = 0; q < 3; ++q)
      std::cout << detail::fmt17(t.beta(p, q)) << (q < 2 ? ' ' : '\n');
  }
  return 0;
}

int run_solve_discrete(const std::string& scene_path, const std::string& out,
                       const std::string& charges_out, bool corrected) {
  const SceneFile f = load_scene_file(scene_path);
  const Scene scene = make_scene(f);
  print_warnings(scene);
  const ChargeSolution sol = solve_with_settings(scene, f.solver);
  std::cerr << "solver: " << sol.method << ", residual " << sol.residual_norm
            << ", coupling margin " << sol.contraction_margin << "\n";
  if (!charges_out.empty()) {
    if (scene.all_dirichlet())
      write_charges(sol, charges_out);
    else
      write_moments(sol, charges_out);
  }
  if (!out.empty()) {
    if (f.observation.empty())
      throw std::invalid_argument("scene has no observation points for -o");
    write_field(eval_field(scene, sol, f.observation, corrected), out);
  }
  return 0;
}

int run_solve_continuum(const std::string& scene_path, const std::string& out,
                        int grid_n) {
  const SceneFile f = load_scene_file(scene_path);
  const Scene scene = make_scene(f);
  print_warnings(scene);
  if (scene.count() == 0) throw std::invalid_argument("continuum solve needs particles");
  Box box;
  if (!scene.medium().is_homogeneous()) {
    box = scene.medium().box();
  } else {
    Vec3 lo = scene.particles()[0].center, hi = lo;
    for (const auto& p : scene.particles()) {
      lo = lo.cwiseMin(p.center);
      hi = hi.cwiseMax(p.center);
    }
    const double pad = std::max(scene.max_radius(), 1e-3 * (hi - lo).norm() + 1e-12);
    box = Box{(lo.array() - pad).matrix(), (hi.array() + pad).matrix()};
  }
  const RegularGrid grid(box, grid_n, grid_n, grid_n);
  const EnsembleDensities dens = densities_from_ensemble(scene, grid);
  FieldGrid field;
  if (scene.all_dirichlet()) {
    const auto sol = solve_dirichlet_limit(scene.medium(), f.direction, dens.capacitance);
    std::cerr << "continuum: " << sol.method() << ", " << sol.iterations()
              << " iterations\n";
    field = f.observation.empty() ? sol.grid_field() : sol.eval(f.observation);
  } else if (scene.all_neumann()) {
    const auto sol =
        solve_neumann_limit(scene.medium(), f.direction, dens.volume, dens.beta);
    if (sol.diverged())
      throw std::runtime_error("continuum fixed-point diverged; reduce volume density");
    std::cerr << "continuum: fixed-point, " << sol.iterations() << " iterations\n";
    field = f.observation.empty() ? sol.grid_field() : sol.eval(f.observation);
  } else {
    throw std::invalid_argument("continuum solve needs a single boundary condition");
  }
  write_field(field, out);
  return 0;
}

int run_compare(const std::string& scene_path, const std::vector<int>& lattice,
                double c_total, int obs_count, double obs_radius) {
  const SceneFile f = load_scene_file(scene_path);
  if (!f.medium.is_homogeneous())
    throw std::invalid_argument("compare: template scene must be homogeneous");
  const Box cube{Vec3::Zero(), Vec3::Ones()};
  std::vector<Vec3> obs = f.observation;
  if (obs.empty()) {
    obs = fibonacci_sphere(obs_count);
    for (auto& p : obs) p = cube.center() + obs_radius * p;
  }
  std::cout << "per_axis,M,rel_l2_diff,margin,iterations\n";
  double prev = std::numeric_limits<double>::infinity();
  bool monotone = true;
  for (int n : lattice) {
    if (n < 1) throw std::invalid_argument("compare: lattice counts must be >= 1");
    const int m_total = n * n * n;
    const double c_each = c_total / m_total;
    const double a = c_each / (4.0 * pi);
    const RegularGrid lat(cube, n, n, n);
    std::vector<Particle> parts;
    parts.reserve(m_total);
    for (int i = 0; i < lat.size(); ++i)
      parts.push_back({lat.node(i), Sphere{a}, BoundaryCondition::Dirichlet});
    const Scene scene(f.medium, f.direction, std::move(parts));
    const AssembledSystem sys = assemble_system(scene);
    const ChargeSolution sol = solve_iterative(sys, 500, 1e-12);
    if (!sol.converged)
      throw std::runtime_error("compare: lattice solve did not converge");
    const FieldGrid discrete = eval_field(scene, sol, obs);

    const EnsembleDensities dens = densities_from_ensemble(scene, lat);
    const auto limit = solve_dirichlet_limit(f.medium, f.direction, dens.capacitance);
    const FieldGrid cont = limit.eval(obs);

    const double diff = (discrete.u - cont.u).norm() / cont.u.norm();
    monotone = monotone && diff < prev;
    prev = diff;
    std::cout << n << ',' << m_total << ',' << detail::fmt17(diff) << ','
              << detail::fmt17(sol.contraction_margin) << ',' << sol.iterations
              << "\n";
  }
  std::cerr << (monotone ? "difference decreases monotonically\n"
                         : "warning: difference not monotone\n");
  return 0;
}

int run_oracle_sphere(double ka, const std::string& bc, int theta_grid) {
  const oracle::BoundaryKind kind = [&] {
    if (bc == "dirichlet") return oracle::BoundaryKind::Dirichlet;
    if (bc == "neumann") return oracle::BoundaryKind::Neumann;
    throw std::invalid_argument("--bc must be dirichlet or neumann");
  }();
  const oracle::PartialWaveSeries series(ka, kind);
  std::cout << "theta_deg,re_f_over_a,im_f_over_a,abs_f_over_a\n";
  for (int i = 0; i < theta_grid; ++i) {
    const double deg = theta_grid == 1 ? 0.0 : 180.0 * i / (theta_grid - 1);
    const Cplx fa = series.amplitude(deg * pi / 180.0);
    std::cout << detail::fmt17(deg) << ',' << detail::fmt17(fa.real()) << ','
              << detail::fmt17(fa.imag()) << ',' << detail::fmt17(std::abs(fa))
              << "\n";
  }
  std::cerr << "l_max " << series.lmax() << "\n";
  return 0;
}

int run_convergence(const std::string& study, int max_frequency) {
  if (study == "bem-capacitance") {
    std::cout << "frequency,panels,capacitance,rel_error\n";
    for (int fq = 2; fq <= max_frequency; fq += 2) {
      const TriMesh mesh = geodesic_sphere(1.0, fq);
      const double c = bem_capacitance(mesh);
      std::cout << fq << ',' << mesh.panel_count() << ',' << detail::fmt17(c) << ','
                << detail::fmt17(std::abs(c - 4.0 * pi) / (4.0 * pi)) << "\n";
    }
    return 0;
  }
  if (study == "bem-beta") {
    std::cout << "frequency,panels,beta_iso,off_diag_max\n";
    for (int fq = 2; fq <= max_frequency; fq += 2) {
      const TriMesh mesh = geodesic_sphere(1.0, fq);
      const PolarizabilityTensor t = bem_polarizability(mesh);
      double off = 0.0;
      for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q)
          if (p != q) off = std::max(off, std::abs(t.beta(p, q)));
      std::cout << fq << ',' << mesh.panel_count() << ','
                << detail::fmt17(t.beta.trace() / 3.0) << ',' << detail::fmt17(off)
                << "\n";
    }
    return 0;
  }
  if (study == "oracle-tail") {
    std::cout << "ka,l_max,f0_over_a\n";
    for (double ka : {0.001, 0.01, 0.1, 0.5}) {
      const oracle::PartialWaveSeries s(ka, oracle::BoundaryKind::Dirichlet);
      std::cout << detail::fmt17(ka) << ',' << s.lmax() << ','
                << detail::fmt17(std::abs(s.amplitude(0.0))) << "\n";
    }
    return 0;
  }
  throw std::invalid_argument("unknown --study (bem-capacitance, bem-beta, oracle-tail)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wave scattering by many small particles"};
  app.require_subcommand(1);
  unsigned seed = 0;
  int threads = 0;
  app.add_option("--seed", seed, "Seed for any randomized generation");
  app.add_option("--threads", threads, "Cap worker threads (0 = default)");

  std::string sphere_a, mesh_path, scene_path, out_path, charges_path, bc = "dirichlet";
  std::vector<double> ellipsoid_axes;
  bool corrected = false;
  double ka = 0.01, c_total = 2.0, obs_radius = 1.5;
  int theta_grid = 19, grid_n = 8, obs_count = 64, max_frequency = 8;
  std::vector<int> lattice{4, 8};
  std::string study = "bem-capacitance";

  auto add_shape_flags = [&](CLI::App* cmd) {
    cmd->add_option("--sphere", sphere_a, "Sphere radius");
    cmd->add_option("--ellipsoid", ellipsoid_axes, "Ellipsoid semi-axes a1 a2 a3")
        ->expected(3);
    cmd->add_option("--mesh", mesh_path, "Mesh file path");
  };

  CLI::App* cap = app.add_subcommand("capacitance", "Capacitance and volume of a shape");
  add_shape_flags(cap);
  CLI::App* pol = app.add_subcommand("polarizability", "Polarizability tensor of a shape");
  add_shape_flags(pol);

  CLI::App* sd = app.add_subcommand("solve-discrete", "Solve a scene particle system");
  sd->add_option("scene", scene_path, "Scene JSON file")->required();
  sd->add_option("-o,--out", out_path, "Field CSV output");
  sd->add_option("--charges", charges_path, "Charges/moments CSV output");
  sd->add_flag("--corrected", corrected, "Add the density first-moment correction");

  CLI::App* sc = app.add_subcommand("solve-continuum", "Solve the limiting equation");
  sc->add_option("scene", scene_path, "Scene JSON file")->required();
  sc->add_option("-o,--out", out_path, "Field CSV output")->required();
  sc->add_option("--grid", grid_n, "Density grid nodes per axis");

  CLI::App* cmp = app.add_subcommand("compare", "Discrete vs continuum lattice study");
  cmp->add_option("scene", scene_path, "Template scene (medium + incident)")->required();
  cmp->add_option("--lattice", lattice, "Per-axis particle counts")->expected(1, 8);
  cmp->add_option("--ctotal", c_total, "Total capacitance held fixed");
  cmp->add_option("--obs-count", obs_count, "Observation points when scene has none");
  cmp->add_option("--obs-radius", obs_radius, "Observation sphere radius");

  CLI::App* orc = app.add_subcommand("oracle", "Exact single-sphere series");
  CLI::App* orc_sphere = orc->add_subcommand("sphere", "Partial-wave amplitude table");
  orc_sphere->add_option("--ka", ka, "Size parameter ka")->required();
  orc_sphere->add_option("--bc", bc, "dirichlet or neumann");
  orc_sphere->add_option("--theta-grid", theta_grid, "Number of angles 0..180");
  orc->require_subcommand(1);

  CLI::App* conv = app.add_subcommand("convergence", "Refinement studies");
  conv->add_option("--study", study, "bem-capacitance, bem-beta, oracle-tail");
  conv->add_option("--max-frequency", max_frequency, "Finest geodesic frequency");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  (void)seed;  // all current subcommands are deterministic
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#endif
  if (threads > 0) Eigen::setNbThreads(threads);

  try {
    if (cap->parsed()) return run_capacitance(sphere_a, ellipsoid_axes, mesh_path);
    if (pol->parsed()) return run_polarizability(sphere_a, ellipsoid_axes, mesh_path);
    if (sd->parsed())
      return run_solve_discrete(scene_path, out_path, charges_path, corrected);
    if (sc->parsed()) return run_solve_continuum(scene_path, out_path, grid_n);
    if (cmp->parsed())
      return run_compare(scene_path, lattice, c_total, obs_count, obs_radius);
    if (orc->parsed()) return run_oracle_sphere(ka, bc, theta_grid);
    if (conv->parsed()) return run_convergence(study, max_frequency);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 2;
  }
  std::cerr << "error: no subcommand\n";
  return 1;
}
