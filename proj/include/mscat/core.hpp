// Core types shared by every mscat module: scalar aliases, the regular
// grid used for media and densities, and a few small numeric helpers.
#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace mscat {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr Cplx iu{0.0, 1.0};

/// Axis-aligned box, the support of an inhomogeneous region or a binning grid.
struct Box {
  Vec3 lo{0, 0, 0};
  Vec3 hi{0, 0, 0};

  bool contains(const Vec3& x) const {
    return x.x() >= lo.x() && x.x() <= hi.x() && x.y() >= lo.y() &&
           x.y() <= hi.y() && x.z() >= lo.z() && x.z() <= hi.z();
  }
  Vec3 extent() const { return hi - lo; }
  Vec3 center() const { return 0.5 * (lo + hi); }
  double diameter() const { return extent().norm(); }
  double volume() const {
    const Vec3 e = extent();
    return e.x() * e.y() * e.z();
  }
};

/// Regular cell-centered grid over a box. Samples live at cell centers,
/// index order x-fastest: idx = ix + nx*(iy + ny*iz).
struct RegularGrid {
  Box box;
  int nx = 0, ny = 0, nz = 0;

  RegularGrid() = default;
  RegularGrid(const Box& b, int nx_, int ny_, int nz_)
      : box(b), nx(nx_), ny(ny_), nz(nz_) {
    if (nx <= 0 || ny <= 0 || nz <= 0)
      throw std::invalid_argument("RegularGrid: dims must be positive");
    if ((box.hi - box.lo).minCoeff() <= 0.0)
      throw std::invalid_argument("RegularGrid: box must have positive extent");
  }

  int size() const { return nx * ny * nz; }
  Vec3 spacing() const {
    const Vec3 e = box.extent();
    return {e.x() / nx, e.y() / ny, e.z() / nz};
  }
  double cell_volume() const {
    const Vec3 h = spacing();
    return h.x() * h.y() * h.z();
  }
  int index(int ix, int iy, int iz) const { return ix + nx * (iy + ny * iz); }
  std::array<int, 3> unpack(int idx) const {
    const int ix = idx % nx;
    const int iy = (idx / nx) % ny;
    const int iz = idx / (nx * ny);
    return {ix, iy, iz};
  }
  Vec3 node(int ix, int iy, int iz) const {
    const Vec3 h = spacing();
    return box.lo + Vec3{(ix + 0.5) * h.x(), (iy + 0.5) * h.y(), (iz + 0.5) * h.z()};
  }
  Vec3 node(int idx) const {
    const auto [ix, iy, iz] = unpack(idx);
    return node(ix, iy, iz);
  }
  /// Cell containing x, or -1 if outside the box.
  int cell_of(const Vec3& x) const {
    if (!box.contains(x)) return -1;
    const Vec3 h = spacing();
    auto clampi = [](int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); };
    const int ix = clampi(static_cast<int>((x.x() - box.lo.x()) / h.x()), nx);
    const int iy = clampi(static_cast<int>((x.y() - box.lo.y()) / h.y()), ny);
    const int iz = clampi(static_cast<int>((x.z() - box.lo.z()) / h.z()), nz);
    return index(ix, iy, iz);
  }
  bool same_layout(const RegularGrid& o) const {
    return nx == o.nx && ny == o.ny && nz == o.nz &&
           (box.lo - o.box.lo).norm() < 1e-12 && (box.hi - o.box.hi).norm() < 1e-12;
  }
};

/// Trilinear interpolation of cell-centered samples; clamps to the sample
/// hull so the value is defined on the whole box.
inline double trilinear(const RegularGrid& grid, const std::vector<double>& values,
                        const Vec3& x) {
  const Vec3 h = grid.spacing();
  auto axis = [](double t, int n) {
    double u = t - 0.5;  // cell-center coordinates
    if (u < 0) u = 0;
    if (u > n - 1) u = n - 1;
    int i0 = static_cast<int>(u);
    if (i0 > n - 2) i0 = n > 1 ? n - 2 : 0;
    const double f = n > 1 ? u - i0 : 0.0;
    return std::pair<int, double>{i0, f};
  };
  const auto [ix, fx] = axis((x.x() - grid.box.lo.x()) / h.x(), grid.nx);
  const auto [iy, fy] = axis((x.y() - grid.box.lo.y()) / h.y(), grid.ny);
  const auto [iz, fz] = axis((x.z() - grid.box.lo.z()) / h.z(), grid.nz);
  double v = 0.0;
  for (int dz = 0; dz <= 1; ++dz)
    for (int dy = 0; dy <= 1; ++dy)
      for (int dx = 0; dx <= 1; ++dx) {
        const double w = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy) * (dz ? fz : 1 - fz);
        if (w == 0.0) continue;
        v += w * values[grid.index(std::min(ix + dx, grid.nx - 1),
                                   std::min(iy + dy, grid.ny - 1),
                                   std::min(iz + dz, grid.nz - 1))];
      }
  return v;
}

/// Deterministic quasi-uniform points on the unit sphere (Fibonacci lattice).
inline std::vector<Vec3> fibonacci_sphere(int n) {
  std::vector<Vec3> pts;
  pts.reserve(n);
  const double ga = pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = ga * i;
    pts.push_back({r * std::cos(phi), r * std::sin(phi), z});
  }
  return pts;
}

/// Least-squares slope of log(y) vs log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("loglog_slope: need >= 2 samples");
  const int n = static_cast<int>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace mscat
