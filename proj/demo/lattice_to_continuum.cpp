// Many-particle limit: refine a cubic lattice of soft spheres while holding
// the total capacitance fixed, and watch the discrete field line up with the
// solution of the limiting integral equation.
#include "mscat/mscat.hpp"

#include <cstdio>

using namespace mscat;

int main() {
  const double k = 1.0, c_total = 2.0;
  const BackgroundMedium medium = BackgroundMedium::homogeneous(k);
  const Box cube{Vec3::Zero(), Vec3::Ones()};
  const Vec3 dir = Vec3::UnitZ();

  std::vector<Vec3> obs = fibonacci_sphere(32);
  for (auto& p : obs) p = cube.center() + 1.5 * p;

  std::printf("%6s %6s %14s %10s\n", "n", "M", "rel l2 diff", "margin");
  for (int n : {4, 8, 16}) {
    const RegularGrid lattice(cube, n, n, n);
    const double a = c_total / lattice.size() / (4.0 * pi);
    std::vector<Particle> parts;
    parts.reserve(lattice.size());
    for (int i = 0; i < lattice.size(); ++i)
      parts.push_back({lattice.node(i), Sphere{a}, BoundaryCondition::Dirichlet});
    const Scene scene(medium, dir, std::move(parts));

    const AssembledSystem sys = assemble_dirichlet_system(scene);
    const ChargeSolution sol = solve_iterative(sys, 500, 1e-12);
    const FieldGrid discrete = eval_field(scene, sol, obs);

    // bin the same ensemble into a capacitance-per-volume density and solve
    // the limiting equation on the lattice grid
    const EnsembleDensities dens = densities_from_ensemble(scene, lattice);
    const FieldGrid cont = solve_dirichlet_limit(medium, dir, dens.capacitance).eval(obs);

    std::printf("%6d %6d %14.6e %10.4f\n", n, static_cast<int>(scene.count()),
                (discrete.u - cont.u).norm() / cont.u.norm(), sol.contraction_margin);
  }
  return 0;
}
