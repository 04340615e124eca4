// Small-particle properties: electrostatic capacitance C, volume V, and the
// magnetic polarizability tensor beta_pq for sound-hard particles. Spheres
// and ellipsoids use closed forms where available; meshes go through panel
// collocation BEM with the static kernel. The BEM doubles as the reference
// for arbitrary shapes.
#pragma once

#include "mscat/greens.hpp"
#include "mscat/mesh.hpp"

#include <variant>

namespace mscat {

enum class BoundaryCondition { Dirichlet, Neumann };

struct Sphere {
  double a;
};

struct Ellipsoid {
  Vec3 semi_axes;
};

using ParticleShape = std::variant<Sphere, Ellipsoid, TriMesh>;

inline void validate_shape(const ParticleShape& shape) {
  if (const auto* s = std::get_if<Sphere>(&shape)) {
    if (!(s->a > 0.0)) throw std::invalid_argument("Sphere: radius must be > 0");
  } else if (const auto* e = std::get_if<Ellipsoid>(&shape)) {
    if (!(e->semi_axes.minCoeff() > 0.0))
      throw std::invalid_argument("Ellipsoid: semi-axes must be > 0");
  } else {
    const auto& m = std::get<TriMesh>(shape);
    if (m.panel_count() == 0 || m.areas.empty())
      throw std::invalid_argument("Mesh shape: not finalized or empty");
  }
}

/// a := diam/2, the particle's characteristic radius.
inline double characteristic_radius(const ParticleShape& shape) {
  if (const auto* s = std::get_if<Sphere>(&shape)) return s->a;
  if (const auto* e = std::get_if<Ellipsoid>(&shape)) return e->semi_axes.maxCoeff();
  return std::get<TriMesh>(shape).max_diameter() / 2.0;
}

inline double volume(const ParticleShape& shape) {
  if (const auto* s = std::get_if<Sphere>(&shape))
    return 4.0 * pi / 3.0 * s->a * s->a * s->a;
  if (const auto* e = std::get_if<Ellipsoid>(&shape))
    return 4.0 * pi / 3.0 * e->semi_axes.prod();
  const auto& m = std::get<TriMesh>(shape);
  const double v = m.signed_volume();
  if (v <= 0.0) throw std::invalid_argument("volume: mesh not closed outward");
  return v;
}

namespace detail {

/// Carlson symmetric elliptic integral R_F(x,y,z) by duplication.
inline double carlson_rf(double x, double y, double z) {
  constexpr double tol = 1e-12;
  for (int it = 0; it < 200; ++it) {
    const double sx = std::sqrt(x), sy = std::sqrt(y), sz = std::sqrt(z);
    const double lam = sx * sy + sy * sz + sz * sx;
    x = 0.25 * (x + lam);
    y = 0.25 * (y + lam);
    z = 0.25 * (z + lam);
    const double mu = (x + y + z) / 3.0;
    if (std::max({std::abs(x - mu), std::abs(y - mu), std::abs(z - mu)}) < tol * mu) {
      const double dx = 1.0 - x / mu, dy = 1.0 - y / mu, dz = 1.0 - z / mu;
      const double e2 = dx * dy + dy * dz + dz * dx;
      const double e3 = dx * dy * dz;
      return (1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0) /
             std::sqrt(mu);
    }
  }
  throw std::runtime_error("carlson_rf: no convergence");
}

/// Carlson R_D(x,y,z) = (3/2) int dt / ((t+z) sqrt((t+x)(t+y)(t+z))).
inline double carlson_rd(double x, double y, double z) {
  constexpr double tol = 1e-12;
  double sum = 0.0, fac = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double sx = std::sqrt(x), sy = std::sqrt(y), sz = std::sqrt(z);
    const double lam = sx * sy + sy * sz + sz * sx;
    sum += fac / (sz * (z + lam));
    fac *= 0.25;
    x = 0.25 * (x + lam);
    y = 0.25 * (y + lam);
    z = 0.25 * (z + lam);
    const double mu = (x + y + 3.0 * z) / 5.0;
    if (std::max({std::abs(x - mu), std::abs(y - mu), std::abs(z - mu)}) < tol * mu) {
      const double dx = 1.0 - x / mu, dy = 1.0 - y / mu, dz = 1.0 - z / mu;
      const double ea = dx * dy, eb = dz * dz;
      const double ec = ea - eb, ed = ea - 6.0 * eb, ee = ed + 2.0 * ec;
      const double s = ed * (-3.0 / 14.0 + 9.0 / 88.0 * ed - 4.5 / 26.0 * dz * ee) +
                       dz * (ee / 6.0 + dz * (-9.0 / 22.0 * ec + 3.0 / 26.0 * dz * ea));
      return 3.0 * sum + fac * (1.0 + s) / (mu * std::sqrt(mu));
    }
  }
  throw std::runtime_error("carlson_rd: no convergence");
}

/// Depolarization factor along axis p of an ellipsoid; the three sum to 1.
inline double depolarization_factor(const Vec3& semi_axes, int p) {
  const double aq = semi_axes[(p + 1) % 3], ar = semi_axes[(p + 2) % 3];
  const double ap = semi_axes[p];
  return semi_axes.prod() / 3.0 * carlson_rd(aq * aq, ar * ar, ap * ap);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Panel-collocation BEM with the static kernel
// ---------------------------------------------------------------------------

/// Per-panel surface density on a closed surface. Spheres are represented as
/// a single "panel" carrying the constant analytic density.
struct SurfaceDensity {
  Eigen::VectorXcd sigma;
  std::vector<double> areas;
  std::vector<Vec3> centroids;

  Cplx total_charge() const {
    Cplx q = 0.0;
    for (int i = 0; i < sigma.size(); ++i) q += sigma(i) * areas[i];
    return q;
  }
  /// First moment int (s - center) sigma ds, the dipole weight of the density.
  Eigen::Vector3cd first_moment(const Vec3& center) const {
    Eigen::Vector3cd m = Eigen::Vector3cd::Zero();
    for (int i = 0; i < sigma.size(); ++i)
      m += (centroids[i] - center).cast<Cplx>() * (sigma(i) * areas[i]);
    return m;
  }
};

namespace detail {

/// Single-layer matrix: S_ij = g0(c_i, c_j) A_j off the diagonal; the
/// diagonal uses the equivalent-disk mean sqrt(A_i/pi)/2.
inline Eigen::MatrixXd single_layer_matrix(const TriMesh& mesh) {
  const int n = mesh.panel_count();
  Eigen::MatrixXd s(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      s(i, j) = i == j ? std::sqrt(mesh.areas[i] / pi) / 2.0
                       : static_green(mesh.centroids[i], mesh.centroids[j]) *
                             mesh.areas[j];
  return s;
}

inline void check_pivots(const Eigen::PartialPivLU<Eigen::MatrixXd>& lu,
                         const char* what) {
  const auto d = lu.matrixLU().diagonal();
  double pmin = std::numeric_limits<double>::infinity(), pmax = 0.0;
  for (int i = 0; i < d.size(); ++i) {
    pmin = std::min(pmin, std::abs(d(i)));
    pmax = std::max(pmax, std::abs(d(i)));
  }
  if (!(pmax > 0.0) || pmin / pmax < 1e-13)
    throw std::runtime_error(std::string(what) + ": near-singular system, pivot ratio " +
                             std::to_string(pmax > 0 ? pmin / pmax : 0.0));
}

}  // namespace detail

inline double bem_capacitance(const TriMesh& mesh) {
  const Eigen::MatrixXd s = detail::single_layer_matrix(mesh);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(s);
  detail::check_pivots(lu, "bem_capacitance");
  const Eigen::VectorXd sigma = lu.solve(Eigen::VectorXd::Ones(mesh.panel_count()));
  double c = 0.0;
  for (int i = 0; i < sigma.size(); ++i) c += sigma(i) * mesh.areas[i];
  return c;
}

inline double capacitance(const ParticleShape& shape) {
  validate_shape(shape);
  if (const auto* s = std::get_if<Sphere>(&shape)) return 4.0 * pi * s->a;
  if (const auto* e = std::get_if<Ellipsoid>(&shape)) {
    const Vec3& a = e->semi_axes;
    return 4.0 * pi /
           detail::carlson_rf(a.x() * a.x(), a.y() * a.y(), a.z() * a.z());
  }
  return bem_capacitance(std::get<TriMesh>(shape));
}

/// Solve int g0(s,t) sigma(t) dt = -u_e on the surface. Total charge is
/// -capacitance * u_e.
inline SurfaceDensity solve_dirichlet_density(const ParticleShape& shape, Cplx u_e) {
  validate_shape(shape);
  SurfaceDensity d;
  if (const auto* s = std::get_if<Sphere>(&shape)) {
    d.sigma.resize(1);
    d.sigma(0) = -u_e / s->a;  // uniform density, Q = -4 pi a u_e
    d.areas = {4.0 * pi * s->a * s->a};
    d.centroids = {Vec3::Zero()};
    return d;
  }
  const TriMesh* mesh;
  TriMesh generated;
  if (const auto* e = std::get_if<Ellipsoid>(&shape)) {
    generated = ellipsoid_mesh(e->semi_axes, 8);
    mesh = &generated;
  } else {
    mesh = &std::get<TriMesh>(shape);
  }
  const Eigen::MatrixXd s = detail::single_layer_matrix(*mesh);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(s);
  detail::check_pivots(lu, "solve_dirichlet_density");
  const Eigen::VectorXd base = lu.solve(Eigen::VectorXd::Ones(mesh->panel_count()));
  d.sigma = -u_e * base.cast<Cplx>();
  d.areas = mesh->areas;
  d.centroids = mesh->centroids;
  return d;
}

// ---------------------------------------------------------------------------
// Magnetic polarizability
// ---------------------------------------------------------------------------

struct PolarizabilityTensor {
  Mat3 beta;
  enum class Provenance { ClosedForm, Bem } provenance;
};

namespace detail {

/// Double-layer matrix A_ij = 2 [N_i . (c_j - c_i)] / (4 pi |c_i - c_j|^3) A_j,
/// zero self-panel (flat-panel limit).
inline Eigen::MatrixXd double_layer_matrix(const TriMesh& mesh) {
  const int n = mesh.panel_count();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      if (i == j) continue;
      const Vec3 d = mesh.centroids[j] - mesh.centroids[i];
      const double r = d.norm();
      a(i, j) = 2.0 * mesh.normals[i].dot(d) / (4.0 * pi * r * r * r) * mesh.areas[j];
    }
  return a;
}

}  // namespace detail

/// Panel-collocation solve of (I - A) h_p = -2 N_p, then
/// beta_pq = (1/V) sum_i (c_i - x_c)_q h_p(c_i) A_i. Dimensionless and
/// dilation invariant.
inline PolarizabilityTensor bem_polarizability(const TriMesh& mesh) {
  const int n = mesh.panel_count();
  Eigen::MatrixXd sys = Eigen::MatrixXd::Identity(n, n) - detail::double_layer_matrix(mesh);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(std::move(sys));
  detail::check_pivots(lu, "bem_polarizability");
  Eigen::MatrixXd rhs(n, 3);
  for (int i = 0; i < n; ++i) rhs.row(i) = -2.0 * mesh.normals[i].transpose();
  const Eigen::MatrixXd h = lu.solve(rhs);
  const double v = mesh.signed_volume();
  if (v <= 0.0) throw std::invalid_argument("bem_polarizability: mesh not closed outward");
  const Vec3 xc = mesh.volume_centroid();
  PolarizabilityTensor t;
  t.provenance = PolarizabilityTensor::Provenance::Bem;
  t.beta.setZero();
  for (int p = 0; p < 3; ++p)
    for (int q = 0; q < 3; ++q) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i)
        acc += (mesh.centroids[i] - xc)(q)*h(i, p) * mesh.areas[i];
      t.beta(p, q) = acc / v;
    }
  return t;
}

namespace detail {

/// Sphere polarizability scalar, computed once per process by BEM on a fine
/// geodesic mesh and isotropized; dimensionless, so radius independent.
inline double sphere_beta0() {
  static const double value = [] {
    const PolarizabilityTensor t = bem_polarizability(geodesic_sphere(1.0, 10));
    return t.beta.trace() / 3.0;
  }();
  return value;
}

}  // namespace detail

inline PolarizabilityTensor polarizability(const ParticleShape& shape) {
  validate_shape(shape);
  if (std::holds_alternative<Sphere>(shape)) {
    PolarizabilityTensor t;
    t.beta = detail::sphere_beta0() * Mat3::Identity();
    t.provenance = PolarizabilityTensor::Provenance::ClosedForm;
    return t;
  }
  if (const auto* e = std::get_if<Ellipsoid>(&shape))
    return bem_polarizability(ellipsoid_mesh(e->semi_axes, 8));
  return bem_polarizability(std::get<TriMesh>(shape));
}

// ---------------------------------------------------------------------------
// Particle
// ---------------------------------------------------------------------------

struct Particle {
  Vec3 center;
  ParticleShape shape;
  BoundaryCondition bc = BoundaryCondition::Dirichlet;

  void validate() const {
    validate_shape(shape);
    if (const auto* m = std::get_if<TriMesh>(&shape)) {
      const double a = characteristic_radius(shape);
      if ((m->volume_centroid() - center).norm() > 1e-6 * a)
        throw std::invalid_argument(
            "Particle: center differs from mesh centroid by more than 1e-6 a");
    }
  }
};

}  // namespace mscat
