// The finite-M scattering problem. Sound-soft (Dirichlet) particles carry one
// unknown charge Q_m with
//   Q_j + C_j sum_{m != j} G(x_j, x_m) Q_m = -C_j U0(x_j),
// sound-hard (Neumann) particles carry (u_e, grad u_e) at the center, closed
// with Delta u_e = -k^2 n u_e, and radiate a monopole V Delta u_e plus a
// dipole driven by V beta grad u_e. Mixed scenes assemble by blocks.
#pragma once

#include "mscat/greens.hpp"
#include "mscat/particle.hpp"

#include <string>

namespace mscat {

// ---------------------------------------------------------------------------
// Scene
// ---------------------------------------------------------------------------

/// Background medium, incident direction, particles, and the smallness
/// diagnostics a (max half-diameter), d (min gap between particle sets), M.
/// Construction validates no-overlap and precomputes per-particle C, V, beta.
class Scene {
 public:
  Scene(BackgroundMedium medium, const Vec3& incident_direction,
        std::vector<Particle> particles, int quadrature_order = 0)
      : medium_(std::move(medium)),
        greens_(std::make_shared<GreensEvaluator>(medium_, quadrature_order)),
        incident_(incident_direction, greens_),
        particles_(std::move(particles)) {
    const int m = static_cast<int>(particles_.size());
    radius_.resize(m);
    cap_.assign(m, 0.0);
    vol_.assign(m, 0.0);
    beta_.assign(m, Mat3::Zero());
    a_ = 0.0;
    for (int i = 0; i < m; ++i) {
      particles_[i].validate();
      radius_[i] = characteristic_radius(particles_[i].shape);
      a_ = std::max(a_, radius_[i]);
      vol_[i] = volume(particles_[i].shape);
      if (particles_[i].bc == BoundaryCondition::Dirichlet) {
        cap_[i] = capacitance(particles_[i].shape);
      } else {
        beta_[i] = polarizability(particles_[i].shape).beta;
      }
    }
    d_ = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j) {
        const double gap =
            (particles_[i].center - particles_[j].center).norm() - radius_[i] - radius_[j];
        d_ = std::min(d_, gap);
      }
    if (m >= 2 && d_ <= 0.0)
      throw std::invalid_argument("Scene: particles overlap (min gap " +
                                  std::to_string(d_) + ")");
    const double ka = medium_.k() * a_;
    if (ka > 0.2)
      warnings_.push_back("ka = " + std::to_string(ka) +
                          " exceeds smallness threshold 0.2");
    if (m >= 2 && a_ / d_ > 0.2)
      warnings_.push_back("a/d = " + std::to_string(a_ / d_) +
                          " exceeds smallness threshold 0.2");
  }

  const BackgroundMedium& medium() const { return medium_; }
  const GreensEvaluator& greens() const { return *greens_; }
  std::shared_ptr<const GreensEvaluator> greens_ptr() const { return greens_; }
  const IncidentField& incident() const { return incident_; }
  const std::vector<Particle>& particles() const { return particles_; }
  int count() const { return static_cast<int>(particles_.size()); }

  double max_radius() const { return a_; }
  double min_gap() const { return d_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  double radius_of(int m) const { return radius_[m]; }
  double capacitance_of(int m) const { return cap_[m]; }
  double volume_of(int m) const { return vol_[m]; }
  const Mat3& beta_of(int m) const { return beta_[m]; }

  bool all_dirichlet() const {
    for (const auto& p : particles_)
      if (p.bc != BoundaryCondition::Dirichlet) return false;
    return true;
  }
  bool all_neumann() const {
    for (const auto& p : particles_)
      if (p.bc != BoundaryCondition::Neumann) return false;
    return true;
  }

 private:
  BackgroundMedium medium_;
  std::shared_ptr<const GreensEvaluator> greens_;
  IncidentField incident_;
  std::vector<Particle> particles_;
  std::vector<double> radius_, cap_, vol_;
  std::vector<Mat3> beta_;
  double a_ = 0.0, d_ = std::numeric_limits<double>::infinity();
  std::vector<std::string> warnings_;
};

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

/// Dense block system (I + coupling) X = rhs. Dirichlet particles occupy one
/// slot (the charge Q), Neumann particles four (u_e then grad u_e).
struct AssembledSystem {
  Eigen::MatrixXcd a;
  Eigen::VectorXcd rhs;
  std::vector<int> offsets;
  std::vector<int> widths;
  std::vector<BoundaryCondition> bcs;

  int unknowns() const { return static_cast<int>(a.rows()); }
  /// Row-sum norm of (A - I): < 1 guarantees fixed-point convergence.
  double coupling_margin() const {
    double m = 0.0;
    for (int i = 0; i < a.rows(); ++i) {
      double s = 0.0;
      for (int j = 0; j < a.cols(); ++j)
        s += std::abs(a(i, j) - (i == j ? Cplx{1.0, 0.0} : Cplx{0.0, 0.0}));
      m = std::max(m, s);
    }
    return m;
  }
};

namespace detail {

/// Column coefficients of particle m's field at x, in m's unknowns:
/// width 1 (Dirichlet, coefficient of Q_m) or 4 (Neumann, coefficients of
/// u_e and grad u_e).
inline Eigen::RowVectorXcd source_coefficients(const Scene& scene, int m,
                                               const Vec3& x) {
  const auto& p = scene.particles()[m];
  const auto& gr = scene.greens();
  if (p.bc == BoundaryCondition::Dirichlet) {
    Eigen::RowVectorXcd c(1);
    c(0) = gr.green(x, p.center);
    return c;
  }
  const double k2n = scene.medium().k() * scene.medium().k() *
                     scene.medium().n(p.center);
  const double v = scene.volume_of(m);
  const Cplx g = gr.green(x, p.center);
  const Eigen::Vector3cd gy = gr.grad_y_green(x, p.center);
  const Mat3& beta = scene.beta_of(m);
  Eigen::RowVectorXcd c(4);
  c(0) = g * (-k2n * v);
  for (int pp = 0; pp < 3; ++pp) {
    Cplx s = 0.0;
    for (int q = 0; q < 3; ++q) s += gy(q) * (v * beta(q, pp));
    c(1 + pp) = -s;
  }
  return c;
}

/// Gradient (in x) of the coefficients above, rows i = d/dx_i.
inline Eigen::Matrix<Cplx, 3, Eigen::Dynamic> source_coefficient_gradients(
    const Scene& scene, int m, const Vec3& x) {
  const auto& p = scene.particles()[m];
  const auto& gr = scene.greens();
  if (p.bc == BoundaryCondition::Dirichlet) {
    Eigen::Matrix<Cplx, 3, Eigen::Dynamic> c(3, 1);
    c.col(0) = gr.grad_x_green(x, p.center);
    return c;
  }
  const double k2n = scene.medium().k() * scene.medium().k() *
                     scene.medium().n(p.center);
  const double v = scene.volume_of(m);
  const Eigen::Vector3cd gx = gr.grad_x_green(x, p.center);
  const Eigen::Matrix3cd hxy = gr.mixed_hessian_green(x, p.center);
  const Mat3& beta = scene.beta_of(m);
  Eigen::Matrix<Cplx, 3, Eigen::Dynamic> c(3, 4);
  for (int i = 0; i < 3; ++i) {
    c(i, 0) = gx(i) * (-k2n * v);
    for (int pp = 0; pp < 3; ++pp) {
      Cplx s = 0.0;
      for (int q = 0; q < 3; ++q) s += hxy(i, q) * (v * beta(q, pp));
      c(i, 1 + pp) = -s;
    }
  }
  return c;
}

}  // namespace detail

/// Block assembly for any mix of boundary conditions.
inline AssembledSystem assemble_system(const Scene& scene) {
  const int m = scene.count();
  AssembledSystem sys;
  sys.offsets.resize(m);
  sys.widths.resize(m);
  sys.bcs.resize(m);
  int n = 0;
  for (int i = 0; i < m; ++i) {
    sys.bcs[i] = scene.particles()[i].bc;
    sys.widths[i] = sys.bcs[i] == BoundaryCondition::Dirichlet ? 1 : 4;
    sys.offsets[i] = n;
    n += sys.widths[i];
  }
  sys.a = Eigen::MatrixXcd::Identity(n, n);
  sys.rhs.resize(n);
  for (int j = 0; j < m; ++j) {
    const auto& pj = scene.particles()[j];
    const int ro = sys.offsets[j];
    if (pj.bc == BoundaryCondition::Dirichlet) {
      const double cj = scene.capacitance_of(j);
      sys.rhs(ro) = -cj * scene.incident().value(pj.center);
      for (int mm = 0; mm < m; ++mm) {
        if (mm == j) continue;
        sys.a.block(ro, sys.offsets[mm], 1, sys.widths[mm]) =
            cj * detail::source_coefficients(scene, mm, pj.center);
      }
    } else {
      sys.rhs(ro) = scene.incident().value(pj.center);
      sys.rhs.segment(ro + 1, 3) = scene.incident().gradient(pj.center);
      for (int mm = 0; mm < m; ++mm) {
        if (mm == j) continue;
        sys.a.block(ro, sys.offsets[mm], 1, sys.widths[mm]) =
            -detail::source_coefficients(scene, mm, pj.center);
        sys.a.block(ro + 1, sys.offsets[mm], 3, sys.widths[mm]) =
            -detail::source_coefficient_gradients(scene, mm, pj.center);
      }
    }
  }
  return sys;
}

inline AssembledSystem assemble_dirichlet_system(const Scene& scene) {
  if (!scene.all_dirichlet())
    throw std::invalid_argument("assemble_dirichlet_system: non-Dirichlet particle");
  return assemble_system(scene);
}

inline AssembledSystem assemble_neumann_system(const Scene& scene) {
  if (!scene.all_neumann())
    throw std::invalid_argument("assemble_neumann_system: non-Neumann particle");
  return assemble_system(scene);
}

// ---------------------------------------------------------------------------
// Solvers
// ---------------------------------------------------------------------------

struct ChargeSolution {
  Eigen::VectorXcd x;
  std::vector<int> offsets;
  std::vector<int> widths;
  std::vector<BoundaryCondition> bcs;

  std::string method;
  int iterations = 0;
  double contraction_margin = 0.0;
  double residual_norm = 0.0;
  double empirical_ratio = 0.0;
  bool converged = true;
  bool diverged = false;

  Cplx charge(int m) const {
    if (bcs[m] != BoundaryCondition::Dirichlet)
      throw std::logic_error("ChargeSolution: particle is not Dirichlet");
    return x(offsets[m]);
  }
  Cplx u_e(int m) const {
    if (bcs[m] != BoundaryCondition::Neumann)
      throw std::logic_error("ChargeSolution: particle is not Neumann");
    return x(offsets[m]);
  }
  Eigen::Vector3cd grad_u_e(int m) const {
    if (bcs[m] != BoundaryCondition::Neumann)
      throw std::logic_error("ChargeSolution: particle is not Neumann");
    return x.segment(offsets[m] + 1, 3);
  }
  Eigen::VectorXcd charges() const {
    Eigen::VectorXcd q(bcs.size());
    for (size_t m = 0; m < bcs.size(); ++m) q(m) = charge(static_cast<int>(m));
    return q;
  }
};

inline ChargeSolution solve_direct(const AssembledSystem& sys) {
  ChargeSolution sol;
  sol.offsets = sys.offsets;
  sol.widths = sys.widths;
  sol.bcs = sys.bcs;
  sol.method = "direct";
  sol.contraction_margin = sys.coupling_margin();
  if (sys.unknowns() == 0) return sol;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(sys.a);
  const auto piv = lu.matrixLU().diagonal();
  double pmin = std::numeric_limits<double>::infinity(), pmax = 0.0;
  for (int i = 0; i < piv.size(); ++i) {
    pmin = std::min(pmin, std::abs(piv(i)));
    pmax = std::max(pmax, std::abs(piv(i)));
  }
  if (!(pmax > 0.0) || pmin / pmax < 1e-14)
    throw std::runtime_error("solve_direct: singular system, smallest pivot " +
                             std::to_string(pmin));
  sol.x = lu.solve(sys.rhs);
  sol.residual_norm = (sys.a * sol.x - sys.rhs).norm();
  return sol;
}

/// Fixed-point iteration X <- rhs - (A - I) X starting from X = rhs.
/// Convergence is geometric when the coupling margin is below 1; when it is
/// not and max_iter runs out, the result is marked diverged rather than
/// throwing.
inline ChargeSolution solve_iterative(const AssembledSystem& sys, int max_iter = 200,
                                      double tol = 1e-12) {
  ChargeSolution sol;
  sol.offsets = sys.offsets;
  sol.widths = sys.widths;
  sol.bcs = sys.bcs;
  sol.method = "iterative";
  sol.contraction_margin = sys.coupling_margin();
  if (sys.unknowns() == 0) return sol;
  Eigen::VectorXcd x = sys.rhs;
  double prev_step = 0.0;
  sol.converged = false;
  for (int it = 1; it <= max_iter; ++it) {
    // rhs - (A - I) x without materializing A - I (A can be large).
    Eigen::VectorXcd next = sys.rhs - sys.a * x + x;
    const double step = (next - x).norm();
    if (prev_step > 0.0) sol.empirical_ratio = step / prev_step;
    prev_step = step;
    x.swap(next);
    sol.iterations = it;
    if (step <= tol * std::max(1.0, x.norm())) {
      sol.converged = true;
      break;
    }
  }
  sol.x = x;
  sol.residual_norm = (sys.a * sol.x - sys.rhs).norm();
  sol.diverged = !sol.converged && (sol.contraction_margin >= 1.0 ||
                                    sol.empirical_ratio >= 1.0);
  return sol;
}

struct ContractionReport {
  bool satisfied = true;
  double margin = 0.0;
};

/// Eq.-20-style check for all-Dirichlet scenes:
/// margin = max_j C_j sum_{m != j} |G(x_j, x_m)|.
inline ContractionReport check_contraction(const Scene& scene) {
  if (!scene.all_dirichlet())
    throw std::invalid_argument("check_contraction: non-Dirichlet particle");
  ContractionReport r;
  const int m = scene.count();
  for (int j = 0; j < m; ++j) {
    double s = 0.0;
    for (int mm = 0; mm < m; ++mm) {
      if (mm == j) continue;
      s += std::abs(scene.greens().green(scene.particles()[j].center,
                                         scene.particles()[mm].center));
    }
    r.margin = std::max(r.margin, scene.capacitance_of(j) * s);
  }
  r.satisfied = r.margin < 1.0;
  return r;
}

// ---------------------------------------------------------------------------
// Field evaluation
// ---------------------------------------------------------------------------

struct FieldGrid {
  std::vector<Vec3> points;
  Eigen::VectorXcd u;
  Eigen::VectorXcd u0;
  std::vector<std::uint8_t> flags;  // 1: closer than 3a to a particle center

  Eigen::VectorXcd scattered() const { return u - u0; }
};

namespace detail {

/// Dipole weights int (s - x_m) sigma ds for the corrected Dirichlet field:
/// zero for spheres, BEM density moment otherwise. The effective field at
/// particle m is recovered from Q_m = -C_m u_e(x_m).
inline std::vector<Eigen::Vector3cd> dirichlet_first_moments(
    const Scene& scene, const ChargeSolution& sol) {
  std::vector<Eigen::Vector3cd> moments(scene.count(), Eigen::Vector3cd::Zero());
  for (int m = 0; m < scene.count(); ++m) {
    const auto& p = scene.particles()[m];
    if (p.bc != BoundaryCondition::Dirichlet) continue;
    if (std::holds_alternative<Sphere>(p.shape)) continue;
    const Cplx ue = -sol.charge(m) / scene.capacitance_of(m);
    const SurfaceDensity dens = solve_dirichlet_density(p.shape, ue);
    const Vec3 about = std::holds_alternative<TriMesh>(p.shape)
                           ? std::get<TriMesh>(p.shape).volume_centroid()
                           : Vec3::Zero();
    moments[m] = dens.first_moment(about);
  }
  return moments;
}

}  // namespace detail

/// U(x) = U0(x) + sum over particles of the monopole/dipole contributions.
/// With corrected = true, Dirichlet mesh particles also radiate their density
/// first moment through grad_y G.
inline FieldGrid eval_field(const Scene& scene, const ChargeSolution& sol,
                            const std::vector<Vec3>& points, bool corrected = false) {
  FieldGrid grid;
  grid.points = points;
  const int np = static_cast<int>(points.size());
  grid.u.resize(np);
  grid.u0.resize(np);
  grid.flags.assign(np, 0);
  std::vector<Eigen::Vector3cd> moments;
  if (corrected) moments = detail::dirichlet_first_moments(scene, sol);
  for (int i = 0; i < np; ++i) {
    const Vec3& x = points[i];
    grid.u0(i) = scene.incident().value(x);
    Cplx s = 0.0;
    for (int m = 0; m < scene.count(); ++m) {
      const auto& p = scene.particles()[m];
      if ((x - p.center).norm() < 3.0 * scene.radius_of(m)) grid.flags[i] = 1;
      const Eigen::RowVectorXcd coeff = detail::source_coefficients(scene, m, x);
      s += (coeff * sol.x.segment(sol.offsets[m], sol.widths[m]))(0);
      if (corrected && !moments[m].isZero())
        s += (scene.greens().grad_y_green(x, p.center).array() * moments[m].array())
                 .sum();
    }
    grid.u(i) = grid.u0(i) + s;
    if (!std::isfinite(grid.u(i).real()) || !std::isfinite(grid.u(i).imag()))
      throw std::runtime_error("eval_field: non-finite field value");
  }
  return grid;
}

inline FieldGrid eval_field_dirichlet(const Scene& scene, const ChargeSolution& sol,
                                      const std::vector<Vec3>& points,
                                      bool corrected = false) {
  if (!scene.all_dirichlet())
    throw std::invalid_argument("eval_field_dirichlet: non-Dirichlet particle");
  return eval_field(scene, sol, points, corrected);
}

inline FieldGrid eval_field_neumann(const Scene& scene, const ChargeSolution& sol,
                                    const std::vector<Vec3>& points) {
  if (!scene.all_neumann())
    throw std::invalid_argument("eval_field_neumann: non-Neumann particle");
  return eval_field(scene, sol, points, false);
}

// ---------------------------------------------------------------------------
// Far field
// ---------------------------------------------------------------------------

/// f(xhat), the coefficient of e^{ikr}/r in the scattered field:
///   f = (1/4pi) sum_m e^{-ik xhat.x_m} s_m,
/// with s_m = Q_m (Dirichlet) or -k^2 V u_e + ik xhat.(V beta grad u_e)
/// (Neumann). Valid only when the background is free space.
inline std::vector<Cplx> far_field_amplitude(const Scene& scene,
                                             const ChargeSolution& sol,
                                             const std::vector<Vec3>& directions) {
  if (!scene.medium().is_homogeneous())
    throw std::domain_error(
        "far_field_amplitude: background must be homogeneous (n = 1)");
  const double k = scene.medium().k();
  std::vector<Cplx> f(directions.size(), Cplx{0.0, 0.0});
  for (size_t i = 0; i < directions.size(); ++i) {
    Vec3 dir = directions[i];
    const double nd = dir.norm();
    if (nd == 0.0) throw std::invalid_argument("far_field_amplitude: zero direction");
    dir /= nd;
    Cplx acc = 0.0;
    for (int m = 0; m < scene.count(); ++m) {
      const auto& p = scene.particles()[m];
      const Cplx phase = std::exp(-iu * k * dir.dot(p.center));
      Cplx src;
      if (p.bc == BoundaryCondition::Dirichlet) {
        src = sol.charge(m);
      } else {
        const double v = scene.volume_of(m);
        const Eigen::Vector3cd dip = (v * scene.beta_of(m)).cast<Cplx>() *
                                     sol.grad_u_e(m);
        src = -k * k * v * sol.u_e(m) + iu * k * dir.cast<Cplx>().dot(dip);
      }
      acc += phase * src;
    }
    f[i] = acc / (4.0 * pi);
  }
  return f;
}

/// Optical-theorem residual Im f(beta) - (k/4pi) int |f|^2 dOmega, quadrature
/// on a Fibonacci sphere. Diagnostic only: the point-interaction model
/// violates it at relative order (ka)^2.
inline double optical_theorem_residual(const Scene& scene, const ChargeSolution& sol,
                                       int n_directions = 400) {
  const std::vector<Vec3> dirs = fibonacci_sphere(n_directions);
  const std::vector<Cplx> f = far_field_amplitude(scene, sol, dirs);
  double total = 0.0;
  for (const Cplx& v : f) total += std::norm(v);
  total *= 4.0 * pi / n_directions;
  const Cplx forward =
      far_field_amplitude(scene, sol, {scene.incident().direction()})[0];
  return forward.imag() - scene.medium().k() / (4.0 * pi) * total;
}

}  // namespace mscat
