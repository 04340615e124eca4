// The many-particle limit. Particle ensembles are binned into cell-averaged
// densities C(y), v(y), N(y), beta(y); the limiting field solves
//   U(x) = U0(x) - int G(x,y) C(y) U(y) dy                    (soft particles)
//   U(x) = U0(x) + int G(x,y) [Delta U - ik nu . beta grad U] v dy   (hard)
// and satisfies [Delta + k^2 - q] U = 0 with q = C + k^2 (1 - n), which the
// Schrodinger residual verifies on the grid.
#pragma once

#include "mscat/discrete.hpp"

namespace mscat {

// ---------------------------------------------------------------------------
// Densities
// ---------------------------------------------------------------------------

struct ScalarDensity {
  RegularGrid grid;
  std::vector<double> values;

  double integral() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * grid.cell_volume();
  }
};

using CapacitanceDensity = ScalarDensity;
using VolumeDensity = ScalarDensity;
using NumberDensity = ScalarDensity;

/// Local polarizability tensor per cell: volume-weighted mean of the beta of
/// the particles in the cell (intensive, dimensionless), zero where empty.
struct PolarizabilityDensity {
  RegularGrid grid;
  std::vector<Mat3> values;
};

struct EnsembleDensities {
  CapacitanceDensity capacitance;
  VolumeDensity volume;
  NumberDensity number;
  PolarizabilityDensity beta;
};

/// Cell-binned densities: C(cell) = sum C_j / vol(cell) over particles whose
/// center falls in the cell, likewise v and N, so cell sums conserve the
/// ensemble totals exactly. Capacitance counts Dirichlet particles, beta
/// counts Neumann ones, volume and number count all.
inline EnsembleDensities densities_from_ensemble(const Scene& scene,
                                                 const RegularGrid& grid) {
  EnsembleDensities d;
  d.capacitance = {grid, std::vector<double>(grid.size(), 0.0)};
  d.volume = {grid, std::vector<double>(grid.size(), 0.0)};
  d.number = {grid, std::vector<double>(grid.size(), 0.0)};
  d.beta = {grid, std::vector<Mat3>(grid.size(), Mat3::Zero())};
  std::vector<double> beta_weight(grid.size(), 0.0);
  const double vol = grid.cell_volume();
  for (int m = 0; m < scene.count(); ++m) {
    const auto& p = scene.particles()[m];
    const int cell = grid.cell_of(p.center);
    if (cell < 0)
      throw std::invalid_argument("densities_from_ensemble: particle outside grid");
    d.number.values[cell] += 1.0 / vol;
    d.volume.values[cell] += scene.volume_of(m) / vol;
    if (p.bc == BoundaryCondition::Dirichlet) {
      d.capacitance.values[cell] += scene.capacitance_of(m) / vol;
    } else {
      d.beta.values[cell] += scene.volume_of(m) * scene.beta_of(m);
      beta_weight[cell] += scene.volume_of(m);
    }
  }
  for (int c = 0; c < grid.size(); ++c)
    if (beta_weight[c] > 0.0) d.beta.values[c] /= beta_weight[c];
  return d;
}

// ---------------------------------------------------------------------------
// Effective potential and Schrodinger residual
// ---------------------------------------------------------------------------

/// q(x) = C(x) + k^2 [1 - n(x)] on the density grid.
struct EffectivePotential {
  RegularGrid grid;
  std::vector<double> q;
};

inline EffectivePotential effective_potential(const CapacitanceDensity& c,
                                              const BackgroundMedium& medium) {
  EffectivePotential p;
  p.grid = c.grid;
  p.q.resize(c.grid.size());
  for (int i = 0; i < c.grid.size(); ++i)
    p.q[i] = c.values[i] + medium.q(c.grid.node(i));
  return p;
}

struct SchrodingerResidual {
  double value = 0.0;               // ||(D_h + k^2 - q) U|| / ||U|| on interior nodes
  double nodes_per_wavelength = 0.0;
  bool coarse_grid = false;         // fewer than 5 nodes per wavelength
};

/// Discrete residual of [Delta + k^2 - q(x)] U at interior nodes, 7-point
/// Laplacian, relative to ||U||. Second-order small for fields that solve
/// the limiting integral equation.
inline SchrodingerResidual schrodinger_residual(const RegularGrid& grid,
                                                const Eigen::VectorXcd& u, double k,
                                                const EffectivePotential& potential) {
  if (!grid.same_layout(potential.grid))
    throw std::invalid_argument("schrodinger_residual: grid mismatch");
  if (u.size() != grid.size())
    throw std::invalid_argument("schrodinger_residual: field size mismatch");
  if (grid.nx < 3 || grid.ny < 3 || grid.nz < 3)
    throw std::invalid_argument("schrodinger_residual: need at least 3 nodes per axis");
  const Vec3 h = grid.spacing();
  SchrodingerResidual out;
  out.nodes_per_wavelength = 2.0 * pi / (k * h.maxCoeff());
  out.coarse_grid = out.nodes_per_wavelength < 5.0;
  double rnorm = 0.0, unorm = 0.0;
  for (int iz = 1; iz + 1 < grid.nz; ++iz)
    for (int iy = 1; iy + 1 < grid.ny; ++iy)
      for (int ix = 1; ix + 1 < grid.nx; ++ix) {
        const int c = grid.index(ix, iy, iz);
        const Cplx uc = u(c);
        Cplx lap =
            (u(grid.index(ix + 1, iy, iz)) - 2.0 * uc + u(grid.index(ix - 1, iy, iz))) /
            (h.x() * h.x());
        lap +=
            (u(grid.index(ix, iy + 1, iz)) - 2.0 * uc + u(grid.index(ix, iy - 1, iz))) /
            (h.y() * h.y());
        lap +=
            (u(grid.index(ix, iy, iz + 1)) - 2.0 * uc + u(grid.index(ix, iy, iz - 1))) /
            (h.z() * h.z());
        const Cplx r = lap + (k * k - potential.q[c]) * uc;
        rnorm += std::norm(r);
        unorm += std::norm(uc);
      }
  if (unorm == 0.0) throw std::invalid_argument("schrodinger_residual: zero field");
  out.value = std::sqrt(rnorm / unorm);
  return out;
}

// ---------------------------------------------------------------------------
// Limiting solvers
// ---------------------------------------------------------------------------

struct ContinuumSolveOptions {
  int max_iter = 300;
  double tol = 1e-10;
  int direct_threshold = 2200;  // Nystrom nodes above this use fixed-point
};

namespace detail {

inline Cplx nystrom_kernel(const Vec3& x, const Vec3& y, double k, double w,
                           double req) {
  return (x - y).norm() < req ? ball_integral_g(k, w) : free_space_green(x, y, k) * w;
}

}  // namespace detail

/// Limiting field for soft particles, plus everything needed to evaluate it
/// off-grid through the representation integral.
class DirichletLimitSolution {
 public:
  DirichletLimitSolution(const BackgroundMedium& medium, Vec3 direction,
                         const CapacitanceDensity& density,
                         const ContinuumSolveOptions& opt = {})
      : k_(medium.k()), beta_dir_(direction.normalized()), grid_(density.grid) {
    // The medium contrast folds into the potential: with
    // q_tot = C + k^2 (1 - n), the limiting field solves the free-kernel
    // equation U = plane - int g q_tot U, equivalent to Eq. U = U0 - int G C U.
    const int n = grid_.size();
    qtot_.resize(n);
    for (int i = 0; i < n; ++i) {
      if (density.values[i] < 0.0)
        throw std::invalid_argument("DirichletLimitSolution: negative capacitance density");
      qtot_[i] = density.values[i] + medium.q(grid_.node(i));
    }
    Eigen::VectorXcd plane(n);
    for (int i = 0; i < n; ++i)
      plane(i) = std::exp(iu * k_ * beta_dir_.dot(grid_.node(i)));

    const double w = grid_.cell_volume();
    const double req = std::cbrt(3.0 * w / (4.0 * pi));
    Eigen::MatrixXcd kmat(n, n);
    for (int j = 0; j < n; ++j) {
      const Vec3 yj = grid_.node(j);
      for (int i = 0; i < n; ++i)
        kmat(i, j) = detail::nystrom_kernel(grid_.node(i), yj, k_, w, req) * qtot_[j];
    }
    if (n <= opt.direct_threshold) {
      method_ = "direct";
      Eigen::MatrixXcd a = kmat;
      a += Eigen::MatrixXcd::Identity(n, n);
      Eigen::PartialPivLU<Eigen::MatrixXcd> lu(std::move(a));
      const auto piv = lu.matrixLU().diagonal();
      double pmin = std::numeric_limits<double>::infinity(), pmax = 0.0;
      for (int i = 0; i < n; ++i) {
        pmin = std::min(pmin, std::abs(piv(i)));
        pmax = std::max(pmax, std::abs(piv(i)));
      }
      if (!(pmax > 0.0) || pmin / pmax < 1e-14)
        throw std::runtime_error(
            "DirichletLimitSolution: near-singular operator, pivot ratio " +
            std::to_string(pmax > 0 ? pmin / pmax : 0.0));
      u_ = lu.solve(plane);
      iterations_ = 0;
    } else {
      method_ = "fixed-point";
      Eigen::VectorXcd x = plane;
      double prev_step = 0.0;
      int growing = 0;
      converged_ = false;
      for (int it = 1; it <= opt.max_iter; ++it) {
        Eigen::VectorXcd next = plane - kmat * x;
        const double step = (next - x).norm();
        growing = prev_step > 0.0 && step > prev_step ? growing + 1 : 0;
        prev_step = step;
        x.swap(next);
        iterations_ = it;
        if (step <= opt.tol * std::max(1.0, x.norm())) {
          converged_ = true;
          break;
        }
        if (growing >= 5)
          throw std::runtime_error(
              "DirichletLimitSolution: fixed-point diverging, use a coarser density "
              "or smaller contrast");
      }
      u_ = std::move(x);
    }
    u0_.resize(n);
    // U0 is the medium scattering solution; recover it from a medium-only
    // solve when n != 1.
    if (medium.is_homogeneous()) {
      u0_ = plane;
    } else {
      ev_ = std::make_shared<const GreensEvaluator>(medium);
      for (int i = 0; i < n; ++i) u0_(i) = ev_->incident(beta_dir_, grid_.node(i));
    }
  }

  const RegularGrid& grid() const { return grid_; }
  const Eigen::VectorXcd& values() const { return u_; }
  const Eigen::VectorXcd& incident_values() const { return u0_; }
  const std::string& method() const { return method_; }
  int iterations() const { return iterations_; }
  bool converged() const { return converged_; }

  /// Off-grid evaluation through U(x) = plane(x) - sum_j kern(x,y_j) q_j U_j.
  FieldGrid eval(const std::vector<Vec3>& points) const {
    FieldGrid out;
    out.points = points;
    const int np = static_cast<int>(points.size());
    out.u.resize(np);
    out.u0.resize(np);
    out.flags.assign(np, 0);
    const double w = grid_.cell_volume();
    const double req = std::cbrt(3.0 * w / (4.0 * pi));
    for (int i = 0; i < np; ++i) {
      const Vec3& x = points[i];
      Cplx s = 0.0;
      for (int j = 0; j < grid_.size(); ++j) {
        if (qtot_[j] == 0.0) continue;
        s += detail::nystrom_kernel(x, grid_.node(j), k_, w, req) * qtot_[j] * u_(j);
      }
      const Cplx plane = std::exp(iu * k_ * beta_dir_.dot(x));
      out.u(i) = plane - s;
      out.u0(i) = ev_ ? ev_->incident(beta_dir_, x) : plane;
    }
    return out;
  }

  FieldGrid grid_field() const {
    FieldGrid out;
    out.points.resize(grid_.size());
    for (int i = 0; i < grid_.size(); ++i) out.points[i] = grid_.node(i);
    out.u = u_;
    out.u0 = u0_;
    out.flags.assign(grid_.size(), 0);
    return out;
  }

 private:
  double k_;
  Vec3 beta_dir_;
  RegularGrid grid_;
  std::vector<double> qtot_;
  Eigen::VectorXcd u_, u0_;
  std::shared_ptr<const GreensEvaluator> ev_;
  std::string method_;
  int iterations_ = 0;
  bool converged_ = true;
};

inline DirichletLimitSolution solve_dirichlet_limit(const BackgroundMedium& medium,
                                                    const Vec3& incident_direction,
                                                    const CapacitanceDensity& density,
                                                    const ContinuumSolveOptions& opt = {}) {
  return DirichletLimitSolution(medium, incident_direction, density, opt);
}

/// Limiting field for hard particles: fixed-point iteration on
///   U <- U0 + sum_j [ kern (-k^2 n U) - kern_q . (beta^T grad U) ] v_j,
/// with grad U by centered differences on the grid and Delta U closed as
/// -k^2 n U.
class NeumannLimitSolution {
 public:
  NeumannLimitSolution(const BackgroundMedium& medium, Vec3 direction,
                       const VolumeDensity& v, const PolarizabilityDensity& beta,
                       const ContinuumSolveOptions& opt = {})
      : k_(medium.k()), beta_dir_(direction.normalized()), grid_(v.grid) {
    if (!grid_.same_layout(beta.grid))
      throw std::invalid_argument("NeumannLimitSolution: density grids differ");
    const int n = grid_.size();
    v_ = v.values;
    beta_t_ = beta.values;
    for (double vv : v_)
      if (vv < 0.0)
        throw std::invalid_argument("NeumannLimitSolution: negative volume density");
    k2n_.resize(n);
    for (int i = 0; i < n; ++i) k2n_[i] = k_ * k_ * medium.n(grid_.node(i));

    const bool homogeneous = medium.is_homogeneous();
    if (!homogeneous) ev_ = std::make_shared<const GreensEvaluator>(medium);

    Eigen::VectorXcd u0(n);
    for (int i = 0; i < n; ++i)
      u0(i) = homogeneous ? std::exp(iu * k_ * beta_dir_.dot(grid_.node(i)))
                          : ev_->incident(beta_dir_, grid_.node(i));
    u0_ = u0;

    // kernel tables, reused every sweep
    const double w = grid_.cell_volume();
    const double req = std::cbrt(3.0 * w / (4.0 * pi));
    Eigen::MatrixXcd kmono(n, n);
    std::array<Eigen::MatrixXcd, 3> kdip;
    for (auto& m : kdip) m.resize(n, n);
    for (int j = 0; j < n; ++j) {
      const Vec3 yj = grid_.node(j);
      for (int i = 0; i < n; ++i) {
        const Vec3 xi = grid_.node(i);
        if (i == j || (xi - yj).norm() < req) {
          kmono(i, j) = ball_integral_g(k_, w);
          for (int q = 0; q < 3; ++q) kdip[q](i, j) = 0.0;  // odd over the cell
        } else if (homogeneous) {
          kmono(i, j) = free_space_green(xi, yj, k_) * w;
          const Eigen::Vector3cd gy = grad_y_free_space_green(xi, yj, k_) * w;
          for (int q = 0; q < 3; ++q) kdip[q](i, j) = gy(q);
        } else {
          kmono(i, j) = ev_->green(xi, yj) * w;
          const Eigen::Vector3cd gy = ev_->grad_y_green(xi, yj) * w;
          for (int q = 0; q < 3; ++q) kdip[q](i, j) = gy(q);
        }
      }
    }

    Eigen::VectorXcd u = u0;
    double prev_step = 0.0;
    int growing = 0;
    converged_ = false;
    for (int it = 1; it <= opt.max_iter; ++it) {
      const Eigen::MatrixX3cd grad = gradient_table(u);
      Eigen::VectorXcd mono(n);
      Eigen::Matrix<Cplx, Eigen::Dynamic, 3> dip(n, 3);
      for (int j = 0; j < n; ++j) {
        mono(j) = -k2n_[j] * u(j) * v_[j];
        const Mat3& b = beta_t_[j];
        for (int q = 0; q < 3; ++q) {
          Cplx s = 0.0;
          for (int p = 0; p < 3; ++p) s += b(q, p) * grad(j, p);
          dip(j, q) = s * v_[j];
        }
      }
      Eigen::VectorXcd next = u0 + kmono * mono;
      for (int q = 0; q < 3; ++q) next -= kdip[q] * dip.col(q);
      const double step = (next - u).norm();
      growing = prev_step > 0.0 && step > prev_step ? growing + 1 : 0;
      prev_step = step;
      u.swap(next);
      iterations_ = it;
      if (step <= opt.tol * std::max(1.0, u.norm())) {
        converged_ = true;
        break;
      }
      if (growing >= 5) {
        diverged_ = true;
        break;
      }
    }
    u_ = std::move(u);
    // final moment tables for off-grid evaluation
    const Eigen::MatrixX3cd grad = gradient_table(u_);
    mono_.resize(n);
    dip_.resize(n, 3);
    for (int j = 0; j < n; ++j) {
      mono_(j) = -k2n_[j] * u_(j) * v_[j];
      const Mat3& b = beta_t_[j];
      for (int q = 0; q < 3; ++q) {
        Cplx s = 0.0;
        for (int p = 0; p < 3; ++p) s += b(q, p) * grad(j, p);
        dip_(j, q) = s * v_[j];
      }
    }
  }

  const RegularGrid& grid() const { return grid_; }
  const Eigen::VectorXcd& values() const { return u_; }
  const Eigen::VectorXcd& incident_values() const { return u0_; }
  int iterations() const { return iterations_; }
  bool converged() const { return converged_; }
  /// Step norms grew for 5 consecutive sweeps; reduce the volume density.
  bool diverged() const { return diverged_; }

  FieldGrid eval(const std::vector<Vec3>& points) const {
    FieldGrid out;
    out.points = points;
    const int np = static_cast<int>(points.size());
    out.u.resize(np);
    out.u0.resize(np);
    out.flags.assign(np, 0);
    const double w = grid_.cell_volume();
    const double req = std::cbrt(3.0 * w / (4.0 * pi));
    for (int i = 0; i < np; ++i) {
      const Vec3& x = points[i];
      Cplx s = 0.0;
      for (int j = 0; j < grid_.size(); ++j) {
        if (v_[j] == 0.0) continue;
        const Vec3 yj = grid_.node(j);
        const bool self = (x - yj).norm() < req;
        const Cplx kern = self          ? ball_integral_g(k_, w)
                          : ev_ == nullptr ? free_space_green(x, yj, k_) * w
                                           : ev_->green(x, yj) * w;
        s += kern * mono_(j);
        if (!self) {
          const Eigen::Vector3cd gy =
              (ev_ == nullptr ? grad_y_free_space_green(x, yj, k_)
                              : ev_->grad_y_green(x, yj)) *
              w;
          for (int q = 0; q < 3; ++q) s -= gy(q) * dip_(j, q);
        }
      }
      out.u0(i) = ev_ ? ev_->incident(beta_dir_, x)
                      : std::exp(iu * k_ * beta_dir_.dot(x));
      out.u(i) = out.u0(i) + s;
    }
    return out;
  }

  FieldGrid grid_field() const {
    FieldGrid out;
    out.points.resize(grid_.size());
    for (int i = 0; i < grid_.size(); ++i) out.points[i] = grid_.node(i);
    out.u = u_;
    out.u0 = u0_;
    out.flags.assign(grid_.size(), 0);
    return out;
  }

 private:
  Eigen::MatrixX3cd gradient_table(const Eigen::VectorXcd& u) const {
    Eigen::MatrixX3cd g(grid_.size(), 3);
    const Vec3 h = grid_.spacing();
    for (int iz = 0; iz < grid_.nz; ++iz)
      for (int iy = 0; iy < grid_.ny; ++iy)
        for (int ix = 0; ix < grid_.nx; ++ix) {
          const int c = grid_.index(ix, iy, iz);
          auto diff = [&](int axis, int i, int nmax, auto at) {
            if (nmax == 1) return Cplx{0.0, 0.0};
            if (i == 0) return (at(1) - at(0)) / h[axis];
            if (i == nmax - 1) return (at(nmax - 1) - at(nmax - 2)) / h[axis];
            return (at(i + 1) - at(i - 1)) / (2.0 * h[axis]);
          };
          g(c, 0) = diff(0, ix, grid_.nx,
                         [&](int i) { return u(grid_.index(i, iy, iz)); });
          g(c, 1) = diff(1, iy, grid_.ny,
                         [&](int i) { return u(grid_.index(ix, i, iz)); });
          g(c, 2) = diff(2, iz, grid_.nz,
                         [&](int i) { return u(grid_.index(ix, iy, i)); });
        }
    return g;
  }

  double k_;
  Vec3 beta_dir_;
  RegularGrid grid_;
  std::vector<double> v_;
  std::vector<Mat3> beta_t_;
  std::vector<double> k2n_;
  std::shared_ptr<const GreensEvaluator> ev_;
  Eigen::VectorXcd u_, u0_;
  Eigen::VectorXcd mono_;
  Eigen::Matrix<Cplx, Eigen::Dynamic, 3> dip_;
  int iterations_ = 0;
  bool converged_ = true;
  bool diverged_ = false;
};

inline NeumannLimitSolution solve_neumann_limit(const BackgroundMedium& medium,
                                                const Vec3& incident_direction,
                                                const VolumeDensity& v,
                                                const PolarizabilityDensity& beta,
                                                const ContinuumSolveOptions& opt = {}) {
  return NeumannLimitSolution(medium, incident_direction, v, beta, opt);
}

}  // namespace mscat
