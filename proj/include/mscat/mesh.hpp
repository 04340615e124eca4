// Triangulated closed surfaces: the mesh container with derived panel data,
// geodesic sphere / ellipsoid generators, and the plain-text mesh format
// ("v x y z" vertex lines followed by "t i j k" triangle lines, 0-based).
#pragma once

#include "mscat/core.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace mscat {

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;

  // per-panel data, filled by finalize()
  std::vector<Vec3> centroids;
  std::vector<Vec3> normals;  // unit, outward
  std::vector<double> areas;

  int panel_count() const { return static_cast<int>(triangles.size()); }

  /// Signed enclosed volume (positive for outward-oriented closed meshes).
  double signed_volume() const {
    double v = 0.0;
    for (const auto& t : triangles) {
      const Vec3 &a = vertices[t[0]], &b = vertices[t[1]], &c = vertices[t[2]];
      v += a.dot(b.cross(c));
    }
    return v / 6.0;
  }

  /// Volume centroid via tetrahedral decomposition about the origin.
  Vec3 volume_centroid() const {
    double v = 0.0;
    Vec3 m{0, 0, 0};
    for (const auto& t : triangles) {
      const Vec3 &a = vertices[t[0]], &b = vertices[t[1]], &c = vertices[t[2]];
      const double vt = a.dot(b.cross(c)) / 6.0;
      v += vt;
      m += vt * (a + b + c) / 4.0;
    }
    if (std::abs(v) < 1e-300) throw std::invalid_argument("mesh: zero volume");
    return m / v;
  }

  double max_diameter() const {
    double d2 = 0.0;
    for (size_t i = 0; i < vertices.size(); ++i)
      for (size_t j = i + 1; j < vertices.size(); ++j)
        d2 = std::max(d2, (vertices[i] - vertices[j]).squaredNorm());
    return std::sqrt(d2);
  }

  /// Computes panel centroids/areas/normals and validates the mesh:
  /// closed (every edge shared by exactly two opposing half-edges),
  /// outward oriented (signed volume > 0), nondegenerate panels.
  void finalize() {
    if (triangles.empty()) throw std::invalid_argument("mesh: no triangles");
    std::map<std::pair<int, int>, int> half_edges;
    for (const auto& t : triangles)
      for (int e = 0; e < 3; ++e) {
        const int a = t[e], b = t[(e + 1) % 3];
        if (a == b) throw std::invalid_argument("mesh: degenerate triangle edge");
        ++half_edges[{a, b}];
      }
    for (const auto& [edge, count] : half_edges) {
      if (count != 1)
        throw std::invalid_argument("mesh: non-manifold edge (duplicated half-edge)");
      if (half_edges.find({edge.second, edge.first}) == half_edges.end())
        throw std::invalid_argument("mesh: open surface (unmatched edge)");
    }
    if (signed_volume() <= 0.0)
      throw std::invalid_argument("mesh: inverted orientation (signed volume <= 0)");

    const int n = panel_count();
    centroids.resize(n);
    normals.resize(n);
    areas.resize(n);
    for (int i = 0; i < n; ++i) {
      const auto& t = triangles[i];
      const Vec3 &a = vertices[t[0]], &b = vertices[t[1]], &c = vertices[t[2]];
      const Vec3 cr = (b - a).cross(c - a);
      const double twice_area = cr.norm();
      if (twice_area < 1e-300) throw std::invalid_argument("mesh: zero-area panel");
      centroids[i] = (a + b + c) / 3.0;
      areas[i] = 0.5 * twice_area;
      normals[i] = cr / twice_area;
    }
  }

  double total_area() const {
    double s = 0.0;
    for (double a : areas) s += a;
    return s;
  }

  TriMesh scaled(const Vec3& factors) const {
    TriMesh m;
    m.vertices.reserve(vertices.size());
    for (const auto& v : vertices)
      m.vertices.push_back({v.x() * factors.x(), v.y() * factors.y(), v.z() * factors.z()});
    m.triangles = triangles;
    m.finalize();
    return m;
  }
};

/// Geodesic sphere: icosahedron faces subdivided with frequency f
/// (20*f^2 panels), vertices projected to the given radius. Centered at origin.
inline TriMesh geodesic_sphere(double radius, int frequency) {
  if (radius <= 0.0) throw std::invalid_argument("geodesic_sphere: radius <= 0");
  if (frequency < 1) throw std::invalid_argument("geodesic_sphere: frequency < 1");

  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> base = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& v : base) v.normalize();
  const std::array<std::array<int, 3>, 20> faces = {{
      {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
      {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
      {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}}};

  TriMesh mesh;
  std::map<std::array<long long, 3>, int> weld;
  auto add_vertex = [&](const Vec3& p) {
    const Vec3 u = p.normalized();
    const std::array<long long, 3> key = {
        static_cast<long long>(std::llround(u.x() * 1e12)),
        static_cast<long long>(std::llround(u.y() * 1e12)),
        static_cast<long long>(std::llround(u.z() * 1e12))};
    auto [it, inserted] = weld.try_emplace(key, static_cast<int>(mesh.vertices.size()));
    if (inserted) mesh.vertices.push_back(radius * u);
    return it->second;
  };

  const int f = frequency;
  for (const auto& face : faces) {
    const Vec3 &A = base[face[0]], &B = base[face[1]], &C = base[face[2]];
    // barycentric lattice on the face, row i has f-i+1 points
    std::vector<std::vector<int>> row_ids(f + 1);
    for (int i = 0; i <= f; ++i) {
      row_ids[i].resize(f - i + 1);
      for (int j = 0; j <= f - i; ++j) {
        const double u = static_cast<double>(i) / f;
        const double v = static_cast<double>(j) / f;
        row_ids[i][j] = add_vertex((1.0 - u - v) * A + u * B + v * C);
      }
    }
    for (int i = 0; i < f; ++i)
      for (int j = 0; j < f - i; ++j) {
        mesh.triangles.push_back({row_ids[i][j], row_ids[i + 1][j], row_ids[i][j + 1]});
        if (j < f - i - 1)
          mesh.triangles.push_back(
              {row_ids[i + 1][j], row_ids[i + 1][j + 1], row_ids[i][j + 1]});
      }
  }
  mesh.finalize();
  return mesh;
}

/// Ellipsoid mesh by anisotropic scaling of a geodesic sphere.
inline TriMesh ellipsoid_mesh(const Vec3& semi_axes, int frequency) {
  if (semi_axes.minCoeff() <= 0.0)
    throw std::invalid_argument("ellipsoid_mesh: semi-axes must be positive");
  return geodesic_sphere(1.0, frequency).scaled(semi_axes);
}

inline TriMesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("mesh: cannot open '" + path + "'");
  TriMesh mesh;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ss >> p.x() >> p.y() >> p.z()))
        throw std::invalid_argument("mesh: bad vertex line " + std::to_string(lineno) +
                                 " in '" + path + "'");
      mesh.vertices.push_back(p);
    } else if (tag == "t") {
      std::array<int, 3> t{};
      if (!(ss >> t[0] >> t[1] >> t[2]))
        throw std::invalid_argument("mesh: bad triangle line " + std::to_string(lineno) +
                                 " in '" + path + "'");
      for (int k : t)
        if (k < 0 || k >= static_cast<int>(mesh.vertices.size()))
          throw std::invalid_argument("mesh: triangle index out of range at line " +
                                   std::to_string(lineno) + " in '" + path + "'");
      mesh.triangles.push_back(t);
    } else {
      throw std::invalid_argument("mesh: unknown tag '" + tag + "' at line " +
                               std::to_string(lineno) + " in '" + path + "'");
    }
  }
  mesh.finalize();
  return mesh;
}

inline void save_mesh(const TriMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("mesh: cannot write '" + path + "'");
  out.precision(17);
  for (const auto& v : mesh.vertices)
    out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles)
    out << "t " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

}  // namespace mscat
