// Independent ground-truth computations used by the test suites and the
// `oracle` CLI subcommand: exact partial-wave scattering series for
// sound-soft and sound-hard spheres, the first Born term of the limiting
// Dirichlet equation, and direct quadrature of the two-center decay integral.
#pragma once

#include "mscat/core.hpp"

namespace mscat::oracle {

// ---------------------------------------------------------------------------
// Spherical Bessel functions. j_l by Miller's downward recurrence normalized
// against j_0, y_l by upward recurrence; both are stable for the l <= ~25,
// x <= ~30 range needed here.
// ---------------------------------------------------------------------------

inline std::vector<double> spherical_jn(int lmax, double x) {
  std::vector<double> j(lmax + 1, 0.0);
  if (x == 0.0) {
    j[0] = 1.0;
    return j;
  }
  const double j0 = std::abs(x) < 1e-4
                        ? 1.0 - x * x / 6.0 * (1.0 - x * x / 20.0)
                        : std::sin(x) / x;
  const int start = lmax + 16 + static_cast<int>(std::ceil(std::abs(x)));
  double jp1 = 0.0, jc = 1e-300;
  std::vector<double> tmp(lmax + 1, 0.0);
  for (int l = start; l >= 1; --l) {
    const double jm1 = (2.0 * l + 1.0) / x * jc - jp1;
    jp1 = jc;
    jc = jm1;
    if (std::abs(jc) > 1e250) {  // rescale to avoid overflow
      const double s = 1e-250;
      jc *= s;
      jp1 *= s;
      for (auto& v : tmp) v *= s;
    }
    if (l - 1 <= lmax) tmp[l - 1] = jc;
    if (l <= lmax) tmp[l] = jp1;
  }
  const double scale = j0 / jc;
  for (int l = 0; l <= lmax; ++l) j[l] = tmp[l] * scale;
  return j;
}

inline std::vector<double> spherical_yn(int lmax, double x) {
  if (x <= 0.0) throw std::domain_error("spherical_yn: x must be positive");
  std::vector<double> y(lmax + 1);
  y[0] = -std::cos(x) / x;
  if (lmax >= 1) y[1] = -std::cos(x) / (x * x) - std::sin(x) / x;
  for (int l = 1; l < lmax; ++l)
    y[l + 1] = (2.0 * l + 1.0) / x * y[l] - y[l - 1];
  return y;
}

/// d/dx f_l via f_l' = f_{l-1} - (l+1)/x f_l (valid for j, y, h).
template <typename Seq>
inline auto bessel_derivative(const Seq& f, int l, double x) {
  if (l == 0) return -f[1] + 0.0 * f[0];  // j_0' = -j_1
  return f[l - 1] - (l + 1.0) / x * f[l];
}

inline double legendre_p(int l, double x) {
  double pm1 = 1.0, p = x;
  if (l == 0) return 1.0;
  for (int n = 1; n < l; ++n) {
    const double pn1 = ((2.0 * n + 1.0) * x * p - n * pm1) / (n + 1.0);
    pm1 = p;
    p = pn1;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Exact partial-wave series for a single sphere of radius a, ka = k*a.
// f(theta) = (1/(ik)) sum_l (2l+1) c_l P_l(cos theta), with
//   c_l = -j_l(ka)/h_l(ka)    (sound-soft, Dirichlet)
//   c_l = -j_l'(ka)/h_l'(ka)  (sound-hard, Neumann)
// The amplitude is returned in units of the sphere radius: set k and a
// through ka and scale externally (f has dimension length; we return
// f for k = ka/a with a = 1, i.e. f/a as a function of ka).
// ---------------------------------------------------------------------------

enum class BoundaryKind { Dirichlet, Neumann };

class PartialWaveSeries {
 public:
  /// Builds the series at truncation l_max; l_max <= 0 selects it
  /// automatically from the tail criterion |c_l| < 1e-12 |c_0|.
  PartialWaveSeries(double ka, BoundaryKind bc, int lmax = 0) : ka_(ka), bc_(bc) {
    if (ka <= 0.0) throw std::domain_error("PartialWaveSeries: ka must be positive");
    const bool auto_lmax = lmax <= 0;
    lmax_ = auto_lmax ? std::max(4, static_cast<int>(std::ceil(ka)) + 8) : lmax;
    for (int attempt = 0; attempt < 8; ++attempt) {
      compute_coefficients();
      if (tail_ok()) return;
      if (!auto_lmax)
        throw std::runtime_error(
            "PartialWaveSeries: l_max insufficient, |c_lmax|/|c_0| = " +
            std::to_string(std::abs(coeffs_.back()) / std::abs(coeffs_[0])));
      lmax_ += 6;
    }
    throw std::runtime_error("PartialWaveSeries: series did not reach tail tolerance");
  }

  /// Scattering amplitude per unit sphere radius at scattering angle theta.
  Cplx amplitude(double theta) const {
    const double k = ka_;  // a = 1 units
    const double ct = std::cos(theta);
    Cplx s = 0.0;
    for (int l = 0; l <= lmax_; ++l)
      s += (2.0 * l + 1.0) * coeffs_[l] * legendre_p(l, ct);
    return s / (iu * k);
  }

  int lmax() const { return lmax_; }
  const std::vector<Cplx>& coefficients() const { return coeffs_; }

  /// (k/4pi) * integral of |f|^2 over the sphere, by series orthogonality:
  /// = (1/k) sum (2l+1)|c_l|^2. Used for the optical-theorem sanity check.
  double scattering_cross_section_term() const {
    double s = 0.0;
    for (int l = 0; l <= lmax_; ++l)
      s += (2.0 * l + 1.0) * std::norm(coeffs_[l]);
    return s / ka_;
  }

 private:
  void compute_coefficients() {
    const double x = ka_;
    const auto j = spherical_jn(lmax_ + 1, x);
    const auto y = spherical_yn(lmax_ + 1, x);
    coeffs_.assign(lmax_ + 1, 0.0);
    for (int l = 0; l <= lmax_; ++l) {
      const Cplx h = Cplx{j[l], y[l]};
      if (bc_ == BoundaryKind::Dirichlet) {
        coeffs_[l] = -j[l] / h;
      } else {
        const double jp = l == 0 ? -j[1] : j[l - 1] - (l + 1.0) / x * j[l];
        const double yp = l == 0 ? (std::cos(x) / (x * x) + std::sin(x) / x)
                                 : y[l - 1] - (l + 1.0) / x * y[l];
        coeffs_[l] = -jp / Cplx{jp, yp};
      }
    }
  }
  bool tail_ok() const {
    return std::abs(coeffs_.back()) < 1e-12 * std::abs(coeffs_[0]);
  }

  double ka_;
  BoundaryKind bc_;
  int lmax_;
  std::vector<Cplx> coeffs_;
};

// ---------------------------------------------------------------------------
// First Born term for the limiting Dirichlet equation: -sum g(x,y_j) C_j U0(y_j) w.
// Direct quadrature over the density grid; homogeneous background only
// (the free-space kernel is the independent reference path).
// ---------------------------------------------------------------------------

template <typename DensityGrid, typename Incident>
Cplx born_first_term(double k, const Incident& u0, const DensityGrid& density,
                     const Vec3& x) {
  const auto& grid = density.grid;
  const double w = grid.cell_volume();
  const double req = std::cbrt(3.0 * w / (4.0 * pi));
  Cplx s = 0.0;
  for (int idx = 0; idx < grid.size(); ++idx) {
    const double c = density.values[idx];
    if (c == 0.0) continue;
    const Vec3 y = grid.node(idx);
    const double r = (x - y).norm();
    Cplx kernel;
    if (r < req) {
      // analytic integral of g over the equal-volume ball (not value*w)
      kernel = (std::exp(iu * k * req) * (1.0 - iu * k * req) - 1.0) / (k * k);
    } else {
      kernel = std::exp(iu * k * r) / (4.0 * pi * r) * w;
    }
    s += kernel * c * u0(y);
  }
  return -s;
}

// ---------------------------------------------------------------------------
// J(x,y) = integral over the box of dz / (|x-z| |z-y|), by midpoint
// quadrature with recursive subdivision of cells near either singular point.
// ---------------------------------------------------------------------------

namespace detail {
inline double j_integral_cell(const Vec3& x, const Vec3& y, const Vec3& lo,
                              const Vec3& hi, int depth) {
  const Vec3 c = 0.5 * (lo + hi);
  const Vec3 e = hi - lo;
  const double radius = 0.5 * e.norm();
  const double vol = e.x() * e.y() * e.z();
  const double rx = (x - c).norm();
  const double ry = (y - c).norm();
  const bool near_singular = rx < 2.0 * radius || ry < 2.0 * radius;
  if (!near_singular || depth >= 7) {
    if (rx < 1e-14 || ry < 1e-14) {
      // singular point at the cell center: integrate 1/|x-z| analytically
      // over the equal-volume ball, treat the other factor as constant
      const double req = std::cbrt(3.0 * vol / (4.0 * pi));
      const double ball = 2.0 * pi * req * req;  // integral of 1/r over the ball
      const double other = rx < 1e-14 ? std::max(ry, 1e-14) : std::max(rx, 1e-14);
      return ball / other;
    }
    return vol / (std::max(rx, 1e-300) * std::max(ry, 1e-300));
  }
  double s = 0.0;
  for (int oct = 0; oct < 8; ++oct) {
    const Vec3 clo{oct & 1 ? c.x() : lo.x(), oct & 2 ? c.y() : lo.y(),
                   oct & 4 ? c.z() : lo.z()};
    const Vec3 chi{oct & 1 ? hi.x() : c.x(), oct & 2 ? hi.y() : c.y(),
                   oct & 4 ? hi.z() : c.z()};
    s += j_integral_cell(x, y, clo, chi, depth + 1);
  }
  return s;
}
}  // namespace detail

inline double j_integral(const Vec3& x, const Vec3& y, const Box& domain,
                         int base_cells = 16) {
  const Vec3 h = domain.extent() / base_cells;
  double s = 0.0;
  for (int iz = 0; iz < base_cells; ++iz)
    for (int iy = 0; iy < base_cells; ++iy)
      for (int ix = 0; ix < base_cells; ++ix) {
        const Vec3 lo = domain.lo + Vec3{ix * h.x(), iy * h.y(), iz * h.z()};
        s += detail::j_integral_cell(x, y, lo, lo + h, 0);
      }
  return s;
}

}  // namespace mscat::oracle
