#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "mscat/particle.hpp"

using namespace mscat;

TEST_CASE("capacitance closed forms", "[particle]") {
  CHECK(capacitance(Sphere{1.0}) == Catch::Approx(4.0 * pi).epsilon(1e-14));
  CHECK(capacitance(Sphere{0.01}) == Catch::Approx(0.04 * pi).epsilon(1e-14));
  // degenerate ellipsoid equals the sphere
  CHECK(capacitance(Ellipsoid{Vec3(1, 1, 1)}) == Catch::Approx(4.0 * pi).epsilon(1e-9));
  // prolate spheroid against the elementary logarithm form
  const double a = 2.0, b = 1.0, c = std::sqrt(a * a - b * b);
  const double expect = 4.0 * pi * c / std::log((a + c) / b);
  CHECK(capacitance(Ellipsoid{Vec3(a, b, b)}) == Catch::Approx(expect).epsilon(1e-9));
}

TEST_CASE("panel capacitance approaches closed forms", "[particle][bem]") {
  CHECK(bem_capacitance(geodesic_sphere(1.0, 6)) == Catch::Approx(4.0 * pi).epsilon(0.02));
  const Vec3 axes(2.0, 1.0, 1.0);
  CHECK(bem_capacitance(ellipsoid_mesh(axes, 6)) ==
        Catch::Approx(capacitance(Ellipsoid{axes})).epsilon(0.02));
}

TEST_CASE("capacitance scales linearly under dilation", "[particle][bem]") {
  const auto base = ellipsoid_mesh(Vec3(1.0, 0.8, 0.6), 5);
  const double c1 = bem_capacitance(base);
  for (double lam : {0.5, 2.0})
    CHECK(bem_capacitance(base.scaled(Vec3(lam, lam, lam))) ==
          Catch::Approx(lam * c1).epsilon(1e-10));
}

TEST_CASE("volumes", "[particle]") {
  CHECK(volume(Sphere{1.0}) == Catch::Approx(4.0 * pi / 3.0).epsilon(1e-14));
  CHECK(volume(Ellipsoid{Vec3(1, 2, 3)}) == Catch::Approx(8.0 * pi).epsilon(1e-14));
  CHECK(volume(geodesic_sphere(1.0, 10)) == Catch::Approx(4.0 * pi / 3.0).epsilon(0.01));
  CHECK_THROWS_AS(validate_shape(Sphere{-1.0}), std::invalid_argument);
  CHECK_THROWS_AS(validate_shape(Ellipsoid{Vec3(1, 0, 1)}), std::invalid_argument);
}

TEST_CASE("surface density solves", "[particle][bem]") {
  // zero effective field gives zero density
  const auto zero = solve_dirichlet_density(geodesic_sphere(1.0, 4), Cplx(0.0));
  CHECK(std::abs(zero.total_charge()) == 0.0);

  // sphere routes through the uniform analytic density
  const auto s = solve_dirichlet_density(Sphere{0.5}, Cplx(1.0));
  CHECK(std::abs(s.total_charge() + 4.0 * pi * 0.5) < 1e-12);

  // mesh: total charge equals -C u for several u, linear in u
  const auto mesh = geodesic_sphere(1.0, 5);
  const double cap = bem_capacitance(mesh);
  const auto d1 = solve_dirichlet_density(mesh, Cplx(1.0));
  for (const Cplx u : {Cplx(1.0), Cplx(2.0, 1.0), Cplx(0.0, -0.3)}) {
    const auto d = solve_dirichlet_density(mesh, u);
    CHECK(std::abs(d.total_charge() + cap * u) < 1e-6 * cap * std::abs(u) + 1e-15);
    CHECK((d.sigma - u * d1.sigma).norm() < 1e-12 * d1.sigma.norm());
  }
}

TEST_CASE("polarizability of a sphere is isotropic", "[particle][bem]") {
  const auto t = polarizability(Sphere{1.0});
  const double b0 = t.beta.trace() / 3.0;
  CHECK(b0 < 0.0);
  for (int p = 0; p < 3; ++p)
    for (int q = 0; q < 3; ++q)
      if (p != q) CHECK(std::abs(t.beta(p, q)) < 1e-2 * std::abs(b0));
  // dimensionless: dilation leaves the tensor unchanged
  const auto t2 = polarizability(Sphere{2.0});
  CHECK((t2.beta - t.beta).norm() < 1e-12);
}

TEST_CASE("polarizability is dilation invariant on meshes", "[particle][bem]") {
  const auto mesh = ellipsoid_mesh(Vec3(1.2, 0.9, 0.7), 5);
  const auto b1 = bem_polarizability(mesh).beta;
  const auto b2 = bem_polarizability(mesh.scaled(Vec3(2, 2, 2))).beta;
  CHECK((b2 - b1).norm() < 1e-10 * b1.norm());
}

TEST_CASE("polarizability is symmetric and matches depolarization factors",
          "[particle][bem]") {
  const Vec3 axes(1.5, 1.0, 0.7);
  const auto b = bem_polarizability(ellipsoid_mesh(axes, 6)).beta;
  CHECK((b - b.transpose()).norm() < 0.02 * b.norm());
  for (int p = 0; p < 3; ++p) {
    const double np = detail::depolarization_factor(axes, p);
    CHECK(b(p, p) == Catch::Approx(-1.0 / (1.0 - np)).epsilon(0.05));
    for (int q = 0; q < 3; ++q)
      if (q != p) CHECK(std::abs(b(p, q)) < 0.02 * std::abs(b(p, p)));
  }
  // depolarization factors of any ellipsoid sum to 1
  double sum = 0.0;
  for (int p = 0; p < 3; ++p) sum += detail::depolarization_factor(axes, p);
  CHECK(sum == Catch::Approx(1.0).epsilon(1e-10));
  CHECK(detail::depolarization_factor(Vec3(1, 1, 1), 0) ==
        Catch::Approx(1.0 / 3.0).epsilon(1e-10));
}

TEST_CASE("double layer identity under refinement", "[particle][bem]") {
  std::mt19937 rng(12345);
  std::uniform_real_distribution<double> uni(0.5, 1.5);
  double prev = 1e300;
  for (int f : {4, 6}) {
    const auto mesh = geodesic_sphere(1.0, f);
    const Eigen::MatrixXd a = detail::double_layer_matrix(mesh);
    Eigen::VectorXd sigma(mesh.panel_count());
    for (int i = 0; i < sigma.size(); ++i) sigma(i) = uni(rng);
    double lhs = 0.0, scale = 0.0;
    const Eigen::VectorXd asig = a * sigma;
    for (int i = 0; i < sigma.size(); ++i) {
      lhs += mesh.areas[i] * (asig(i) + sigma(i));
      scale += mesh.areas[i] * std::abs(sigma(i));
    }
    const double resid = std::abs(lhs) / scale;
    CHECK(resid < 0.05);
    CHECK(resid < prev);
    prev = resid;
  }
}

TEST_CASE("particle validation", "[particle]") {
  Particle p;
  p.center = Vec3(1, 2, 3);
  p.shape = Sphere{0.1};
  p.bc = BoundaryCondition::Dirichlet;
  CHECK_NOTHROW(p.validate());

  Particle off;
  off.center = Vec3(0.5, 0, 0);  // far from the mesh centroid
  off.shape = geodesic_sphere(0.2, 3);
  off.bc = BoundaryCondition::Neumann;
  CHECK_THROWS_AS(off.validate(), std::invalid_argument);
}
