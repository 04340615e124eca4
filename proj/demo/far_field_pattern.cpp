// Smallest useful pipeline: one soft sphere, solve for its charge, print the
// far-field pattern next to the exact partial-wave series.
#include "mscat/mscat.hpp"

#include <cstdio>

using namespace mscat;

int main() {
  const double k = 1.0, a = 0.01;
  const Scene scene(BackgroundMedium::homogeneous(k), Vec3::UnitZ(),
                    {{Vec3::Zero(), Sphere{a}, BoundaryCondition::Dirichlet}});
  const ChargeSolution sol = solve_direct(assemble_dirichlet_system(scene));

  const oracle::PartialWaveSeries exact(k * a, oracle::BoundaryKind::Dirichlet);
  std::printf("%8s %12s %12s %10s\n", "theta", "|f| solver", "|f| series", "rel err");
  for (int deg = 0; deg <= 180; deg += 30) {
    const double th = deg * pi / 180.0;
    const Cplx f =
        far_field_amplitude(scene, sol, {Vec3(std::sin(th), 0.0, std::cos(th))})[0];
    const Cplx fx = a * exact.amplitude(th);
    std::printf("%8d %12.6e %12.6e %10.2e\n", deg, std::abs(f), std::abs(fx),
                std::abs(f - fx) / std::abs(fx));
  }
  return 0;
}
