// Green's functions and incident fields: the free-space kernel g, the static
// kernel g0, the anisotropic static fundamental solution, and the
// variable-index Green function G built from the volume integral equation
//   G(x,y) = g(x,y) - int_D g(x,xi) q(xi) G(xi,y) dxi,  q = k^2 (1 - n),
// discretized by Nystrom midpoint quadrature with an analytic
// equal-volume-ball correction on the singular cell.
#pragma once

#include "mscat/core.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <optional>

namespace mscat {

// ---------------------------------------------------------------------------
// Closed-form kernels
// ---------------------------------------------------------------------------

/// g(x,y) = e^{ik|x-y|} / (4 pi |x-y|), the outgoing free-space kernel.
inline Cplx free_space_green(const Vec3& x, const Vec3& y, double k) {
  const double r = (x - y).norm();
  if (r == 0.0) throw std::domain_error("free_space_green: coincident points");
  return std::exp(iu * k * r) / (4.0 * pi * r);
}

/// g0(x,y) = 1 / (4 pi |x-y|), the static kernel.
inline double static_green(const Vec3& x, const Vec3& y) {
  const double r = (x - y).norm();
  if (r == 0.0) throw std::domain_error("static_green: coincident points");
  return 1.0 / (4.0 * pi * r);
}

/// grad_y g(x,y) = g * (ik - 1/r) * (y-x)/r.
inline Eigen::Vector3cd grad_y_free_space_green(const Vec3& x, const Vec3& y,
                                                double k) {
  const Vec3 d = y - x;
  const double r = d.norm();
  if (r == 0.0) throw std::domain_error("grad_y_free_space_green: coincident points");
  const Cplx g = std::exp(iu * k * r) / (4.0 * pi * r);
  return (g * (iu * k - 1.0 / r) / r) * d.cast<Cplx>();
}

/// Mixed second derivatives d^2 g / dx_i dy_q as a 3x3 matrix (i row, q col).
/// With rv = x - y and H the Hessian of g in rv, this equals -H.
inline Eigen::Matrix3cd mixed_hessian_free_space_green(const Vec3& x, const Vec3& y,
                                                       double k) {
  const Vec3 d = x - y;
  const double r = d.norm();
  if (r == 0.0)
    throw std::domain_error("mixed_hessian_free_space_green: coincident points");
  const Vec3 u = d / r;
  const Cplx g = std::exp(iu * k * r) / (4.0 * pi * r);
  const Cplx gp = g * (iu * k - 1.0 / r);
  const Cplx gpp = g * ((iu * k - 1.0 / r) * (iu * k - 1.0 / r) + 1.0 / (r * r));
  Eigen::Matrix3cd h = gpp * (u * u.transpose()).cast<Cplx>() +
                       (gp / r) * (Mat3::Identity() - u * u.transpose()).cast<Cplx>();
  return -h;
}

/// Integral of g over a ball of the same volume as a quadrature cell,
/// centered at the singular point: int_ball g dV = (e^{ikR}(1-ikR) - 1)/k^2,
/// R the equal-volume radius. Static limit R^2/2.
inline Cplx ball_integral_g(double k, double cell_volume) {
  const double R = std::cbrt(3.0 * cell_volume / (4.0 * pi));
  if (k * R < 1e-8) return Cplx{R * R / 2.0, 0.0};
  return (std::exp(iu * k * R) * (1.0 - iu * k * R) - 1.0) / (k * k);
}

// ---------------------------------------------------------------------------
// Anisotropic static fundamental solution
// ---------------------------------------------------------------------------

/// Constant symmetric positive-definite coefficient tensor a_ip.
struct AnisotropicTensor {
  Mat3 a;

  explicit AnisotropicTensor(const Mat3& m) : a(m) {
    if ((a - a.transpose()).norm() > 1e-12 * a.norm())
      throw std::invalid_argument("AnisotropicTensor: matrix not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat3> es(a);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw std::invalid_argument("AnisotropicTensor: matrix not positive definite");
  }
};

/// Fundamental solution of sum a_ip d^2/dx_i dx_p:
///   1 / (4 pi sqrt(det a)) * [a^{-1}_{ip} (x-y)_i (x-y)_p]^{-1/2}.
inline double anisotropic_static_green(const Vec3& x, const Vec3& y,
                                       const AnisotropicTensor& tensor) {
  const Vec3 d = x - y;
  if (d.norm() == 0.0)
    throw std::domain_error("anisotropic_static_green: coincident points");
  const double det = tensor.a.determinant();
  const double quad = d.dot(tensor.a.ldlt().solve(d));
  return 1.0 / (4.0 * pi * std::sqrt(det)) / std::sqrt(quad);
}

// ---------------------------------------------------------------------------
// Background medium
// ---------------------------------------------------------------------------

/// Wavenumber plus a sampled refraction index n(x) on a box D, with n = 1
/// outside D. Samples live at cell centers and interpolate trilinearly.
class BackgroundMedium {
 public:
  static BackgroundMedium homogeneous(double k) {
    BackgroundMedium m;
    m.k_ = check_k(k);
    return m;
  }

  static BackgroundMedium sampled(double k, const RegularGrid& grid,
                                  std::vector<double> n_samples) {
    if (static_cast<int>(n_samples.size()) != grid.size())
      throw std::invalid_argument("BackgroundMedium: sample count != grid size");
    for (double v : n_samples)
      if (!std::isfinite(v))
        throw std::invalid_argument("BackgroundMedium: non-finite n sample");
    BackgroundMedium m;
    m.k_ = check_k(k);
    m.grid_ = grid;
    m.n_ = std::move(n_samples);
    bool unit = true;
    for (double v : m.n_)
      if (std::abs(v - 1.0) > 1e-15) unit = false;
    if (unit) m.grid_.reset(), m.n_.clear();
    return m;
  }

  /// Constant index n_const inside the box, 1 outside.
  static BackgroundMedium constant_in_box(double k, const Box& box, double n_const,
                                          int cells_per_axis) {
    RegularGrid g(box, cells_per_axis, cells_per_axis, cells_per_axis);
    return sampled(k, g, std::vector<double>(g.size(), n_const));
  }

  double k() const { return k_; }
  bool is_homogeneous() const { return !grid_.has_value(); }
  const RegularGrid& sample_grid() const {
    if (!grid_) throw std::logic_error("BackgroundMedium: homogeneous, no grid");
    return *grid_;
  }
  const Box& box() const { return sample_grid().box; }

  double n(const Vec3& x) const {
    if (!grid_ || !grid_->box.contains(x)) return 1.0;
    return trilinear(*grid_, n_, x);
  }
  /// q(x) = k^2 (1 - n(x)); vanishes outside the box.
  double q(const Vec3& x) const { return k_ * k_ * (1.0 - n(x)); }

 private:
  static double check_k(double k) {
    if (!(k > 0.0)) throw std::invalid_argument("BackgroundMedium: k must be > 0");
    return k;
  }
  double k_ = 0.0;
  std::optional<RegularGrid> grid_;
  std::vector<double> n_;
};

// ---------------------------------------------------------------------------
// Variable-index Green function evaluator
// ---------------------------------------------------------------------------

struct FarFieldRatio {
  Cplx value;
  bool inside_domain = false;  // set when x or y lies in D; ratio ~ 1 not guaranteed
};

/// Nystrom discretization of G = g - T G over the medium box, factorized
/// once; each new source point costs one back-substitution. Immutable after
/// construction; evaluation is const and guarded for concurrent use.
class GreensEvaluator {
 public:
  /// quadrature_order: Nystrom nodes per axis (<= 0 uses the medium's own
  /// sample grid). Homogeneous media need no discretization at all.
  explicit GreensEvaluator(const BackgroundMedium& medium, int quadrature_order = 0)
      : medium_(medium) {
    if (medium_.is_homogeneous()) return;
    const Box box = medium_.box();
    if (quadrature_order > 0) {
      qgrid_ = RegularGrid(box, quadrature_order, quadrature_order, quadrature_order);
    } else {
      qgrid_ = medium_.sample_grid();
    }
    const int n = qgrid_.size();
    qvals_.resize(n);
    for (int i = 0; i < n; ++i) qvals_[i] = medium_.q(qgrid_.node(i));

    const double k = medium_.k();
    const double w = qgrid_.cell_volume();
    const Cplx diag = ball_integral_g(k, w);
    Eigen::MatrixXcd a(n, n);
    for (int j = 0; j < n; ++j) {
      const Vec3 yj = qgrid_.node(j);
      for (int i = 0; i < n; ++i) {
        const Cplx kern = i == j ? diag : free_space_green(qgrid_.node(i), yj, k) * w;
        a(i, j) = kern * qvals_[j];
      }
      a(j, j) += 1.0;
    }
    lu_ = std::make_unique<Eigen::PartialPivLU<Eigen::MatrixXcd>>(a);
    const auto piv = lu_->matrixLU().diagonal();
    double pmin = std::numeric_limits<double>::infinity(), pmax = 0.0;
    for (int i = 0; i < n; ++i) {
      pmin = std::min(pmin, std::abs(piv(i)));
      pmax = std::max(pmax, std::abs(piv(i)));
    }
    pivot_ratio_ = pmax > 0 ? pmin / pmax : 0.0;
    if (pivot_ratio_ < 1e-14)
      throw std::runtime_error(
          "GreensEvaluator: discretized (I+T) numerically singular, pivot ratio " +
          std::to_string(pivot_ratio_));
  }

  const BackgroundMedium& medium() const { return medium_; }
  double k() const { return medium_.k(); }
  bool is_homogeneous() const { return medium_.is_homogeneous(); }
  /// min/max pivot magnitude of the factorization; 1 means perfectly scaled.
  double pivot_ratio() const { return is_homogeneous() ? 1.0 : pivot_ratio_; }
  const RegularGrid& quadrature_grid() const { return qgrid_; }
  const std::vector<double>& q_at_nodes() const { return qvals_; }

  /// G(x, y). Exactly g when the medium is homogeneous.
  Cplx green(const Vec3& x, const Vec3& y) const {
    const double k = medium_.k();
    if (is_homogeneous()) return free_space_green(x, y, k);
    const Eigen::VectorXcd& gy = solution_for_source(y);
    return represent(x, y, gy);
  }

  /// grad_y G(x,y): closed form for homogeneous media, otherwise central
  /// finite differences with step max(1e-4, h/10).
  Eigen::Vector3cd grad_y_green(const Vec3& x, const Vec3& y) const {
    const double k = medium_.k();
    if (is_homogeneous()) return grad_y_free_space_green(x, y, k);
    const double step = fd_step();
    Eigen::Vector3cd grad;
    for (int q = 0; q < 3; ++q) {
      Vec3 yp = y, ym = y;
      yp[q] += step;
      ym[q] -= step;
      grad(q) = (green(x, yp) - green(x, ym)) / (2.0 * step);
    }
    return grad;
  }

  /// grad_x G(x,y): closed form for homogeneous media, central differences
  /// otherwise (cheap, the factorized solve for source y is reused).
  Eigen::Vector3cd grad_x_green(const Vec3& x, const Vec3& y) const {
    if (is_homogeneous()) return grad_y_free_space_green(y, x, medium_.k());
    const double step = fd_step();
    Eigen::Vector3cd grad;
    for (int i = 0; i < 3; ++i) {
      Vec3 xp = x, xm = x;
      xp[i] += step;
      xm[i] -= step;
      grad(i) = (green(xp, y) - green(xm, y)) / (2.0 * step);
    }
    return grad;
  }

  /// Mixed derivatives d^2 G / dx_i dy_q; finite differences in x of
  /// grad_y G when the medium is inhomogeneous.
  Eigen::Matrix3cd mixed_hessian_green(const Vec3& x, const Vec3& y) const {
    if (is_homogeneous()) return mixed_hessian_free_space_green(x, y, medium_.k());
    const double step = fd_step();
    Eigen::Matrix3cd h;
    for (int i = 0; i < 3; ++i) {
      Vec3 xp = x, xm = x;
      xp[i] += step;
      xm[i] -= step;
      h.row(i) = ((grad_y_green(xp, y) - grad_y_green(xm, y)) / (2.0 * step)).transpose();
    }
    return h;
  }

  /// Scattering solution for an incident plane wave of direction beta:
  /// U0 = e^{ik beta.x} - int g q U0. Plane wave itself when homogeneous.
  Cplx incident(const Vec3& beta, const Vec3& x) const {
    const double k = medium_.k();
    const Cplx plane = std::exp(iu * k * beta.dot(x));
    if (is_homogeneous()) return plane;
    const Eigen::VectorXcd& u0 = incident_solution(beta);
    const double w = qgrid_.cell_volume();
    const double req = std::cbrt(3.0 * w / (4.0 * pi));
    Cplx s = 0.0;
    for (int j = 0; j < qgrid_.size(); ++j) {
      if (qvals_[j] == 0.0) continue;
      const Vec3 xj = qgrid_.node(j);
      const double r = (x - xj).norm();
      const Cplx kern = r < req ? ball_integral_g(k, w) : free_space_green(x, xj, k) * w;
      s += kern * qvals_[j] * u0(j);
    }
    return plane - s;
  }

  Eigen::Vector3cd incident_gradient(const Vec3& beta, const Vec3& x) const {
    const double k = medium_.k();
    const Cplx plane = std::exp(iu * k * beta.dot(x));
    const Eigen::Vector3cd plane_grad = (iu * k * plane) * beta.cast<Cplx>();
    if (is_homogeneous()) return plane_grad;
    const Eigen::VectorXcd& u0 = incident_solution(beta);
    const double w = qgrid_.cell_volume();
    const double req = std::cbrt(3.0 * w / (4.0 * pi));
    Eigen::Vector3cd s = Eigen::Vector3cd::Zero();
    for (int j = 0; j < qgrid_.size(); ++j) {
      if (qvals_[j] == 0.0) continue;
      const Vec3 xj = qgrid_.node(j);
      if ((x - xj).norm() < req) continue;  // odd kernel, zero ball mean
      s += grad_y_free_space_green(xj, x, k) * (w * qvals_[j] * u0(j));
    }
    return plane_grad - s;
  }

  /// G(x,y)/g(x,y) with a flag when either point lies inside the medium box,
  /// where the ratio need not approach 1.
  FarFieldRatio far_field_ratio(const Vec3& x, const Vec3& y) const {
    FarFieldRatio r;
    if (!is_homogeneous()) {
      const Box& b = medium_.box();
      r.inside_domain = b.contains(x) || b.contains(y);
    }
    r.value = green(x, y) / free_space_green(x, y, medium_.k());
    return r;
  }

 private:
  double fd_step() const {
    const double h = qgrid_.spacing().minCoeff();
    return std::max(1e-4, h / 10.0);
  }

  Cplx represent(const Vec3& x, const Vec3& y, const Eigen::VectorXcd& gy) const {
    const double k = medium_.k();
    const double w = qgrid_.cell_volume();
    const double req = std::cbrt(3.0 * w / (4.0 * pi));
    const double ry = (x - y).norm();
    Cplx gxy;
    if (ry == 0.0) throw std::domain_error("GreensEvaluator: coincident points");
    gxy = free_space_green(x, y, k);
    Cplx s = 0.0;
    for (int j = 0; j < qgrid_.size(); ++j) {
      if (qvals_[j] == 0.0) continue;
      const Vec3 xj = qgrid_.node(j);
      const double r = (x - xj).norm();
      const Cplx kern = r < req ? ball_integral_g(k, w) : free_space_green(x, xj, k) * w;
      s += kern * qvals_[j] * gy(j);
    }
    return gxy - s;
  }

  const Eigen::VectorXcd& solution_for_source(const Vec3& y) const {
    const std::array<double, 3> key{y.x(), y.y(), y.z()};
    std::scoped_lock lock(mutex_);
    auto it = source_cache_.find(key);
    if (it != source_cache_.end()) return it->second;
    const double k = medium_.k();
    const double w = qgrid_.cell_volume();
    const double req = std::cbrt(3.0 * w / (4.0 * pi));
    const int n = qgrid_.size();
    Eigen::VectorXcd rhs(n);
    for (int i = 0; i < n; ++i) {
      const Vec3 xi = qgrid_.node(i);
      const double r = (xi - y).norm();
      // a source sitting on a node: use the quadrature-cell mean of g
      rhs(i) = r < 0.5 * req ? ball_integral_g(k, w) / w : free_space_green(xi, y, k);
    }
    auto [pos, ignored] = source_cache_.emplace(key, lu_->solve(rhs));
    return pos->second;
  }

  const Eigen::VectorXcd& incident_solution(const Vec3& beta) const {
    const std::array<double, 3> key{beta.x(), beta.y(), beta.z()};
    std::scoped_lock lock(mutex_);
    auto it = incident_cache_.find(key);
    if (it != incident_cache_.end()) return it->second;
    const double k = medium_.k();
    const int n = qgrid_.size();
    Eigen::VectorXcd rhs(n);
    for (int i = 0; i < n; ++i)
      rhs(i) = std::exp(iu * k * beta.dot(qgrid_.node(i)));
    auto [pos, ignored] = incident_cache_.emplace(key, lu_->solve(rhs));
    return pos->second;
  }

  BackgroundMedium medium_;
  RegularGrid qgrid_;
  std::vector<double> qvals_;
  std::unique_ptr<Eigen::PartialPivLU<Eigen::MatrixXcd>> lu_;
  double pivot_ratio_ = 1.0;
  mutable std::mutex mutex_;
  mutable std::map<std::array<double, 3>, Eigen::VectorXcd> source_cache_;
  mutable std::map<std::array<double, 3>, Eigen::VectorXcd> incident_cache_;
};

// ---------------------------------------------------------------------------
// Correction vector ik*nu and incident field
// ---------------------------------------------------------------------------

/// ik nu := grad_y G(x,y)|_{y=x_m} / G(x,x_m). Closed form for homogeneous
/// media: (ik - 1/r) (x_m - x)/r.
inline Eigen::Vector3cd correction_vector(double k, const Vec3& x, const Vec3& x_m) {
  const Vec3 d = x_m - x;
  const double r = d.norm();
  if (r == 0.0) throw std::domain_error("correction_vector: coincident points");
  return ((iu * k - 1.0 / r) / r) * d.cast<Cplx>();
}

inline Eigen::Vector3cd correction_vector(const GreensEvaluator& eval, const Vec3& x,
                                          const Vec3& x_m) {
  if (eval.is_homogeneous()) return correction_vector(eval.k(), x, x_m);
  const Cplx g = eval.green(x, x_m);
  const double scale = std::abs(free_space_green(x, x_m, eval.k()));
  if (std::abs(g) < 1e-10 * scale)
    throw std::domain_error("correction_vector: G(x,x_m) near zero");
  return eval.grad_y_green(x, x_m) / g;
}

/// Incident field: a plane-wave direction tied to a background medium.
/// Evaluates to e^{ik beta.x} for homogeneous media and to the
/// Lippmann-Schwinger scattering solution otherwise.
class IncidentField {
 public:
  IncidentField(Vec3 direction, std::shared_ptr<const GreensEvaluator> eval)
      : beta_(std::move(direction)), eval_(std::move(eval)) {
    const double nb = beta_.norm();
    if (nb == 0.0) throw std::invalid_argument("IncidentField: zero direction");
    beta_ /= nb;
    if (!eval_) throw std::invalid_argument("IncidentField: null evaluator");
  }

  const Vec3& direction() const { return beta_; }
  double k() const { return eval_->k(); }

  Cplx value(const Vec3& x) const { return eval_->incident(beta_, x); }
  Eigen::Vector3cd gradient(const Vec3& x) const {
    return eval_->incident_gradient(beta_, x);
  }

 private:
  Vec3 beta_;
  std::shared_ptr<const GreensEvaluator> eval_;
};

}  // namespace mscat
