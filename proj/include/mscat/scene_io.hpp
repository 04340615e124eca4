// Scene files (JSON), result files (CSV), and density grid files. The JSON
// schema is strict: unknown keys are rejected by name, required keys produce
// named errors, and every violation of a Scene invariant surfaces before any
// solve. Result CSVs use 17-significant-digit formatting so reruns are
// byte-identical.
#pragma once

#include "mscat/continuum.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace mscat {

struct SolverSettings {
  std::string method = "direct";  // direct | iterative
  double tol = 1e-12;
  int max_iter = 200;
};

/// Parsed and validated scene file, one step before Scene construction.
struct SceneFile {
  BackgroundMedium medium = BackgroundMedium::homogeneous(1.0);
  Vec3 direction = Vec3::UnitZ();
  std::vector<Particle> particles;
  std::vector<Vec3> observation;
  SolverSettings solver;
};

namespace detail {

using nlohmann::json;

[[noreturn]] inline void scene_error(const std::string& msg) {
  throw std::invalid_argument("scene: " + msg);
}

inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& where) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (item.key() == a) ok = true;
    if (!ok) scene_error("unknown key '" + item.key() + "' in " + where);
  }
}

inline const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) scene_error("missing key '" + std::string(key) + "' in " + where);
  return j.at(key);
}

inline double number(const json& j, const std::string& where) {
  if (!j.is_number()) scene_error(where + " must be a number");
  return j.get<double>();
}

inline Vec3 vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) scene_error(where + " must be a 3-array");
  return {number(j[0], where), number(j[1], where), number(j[2], where)};
}

inline Box box(const json& j, const std::string& where) {
  if (!j.is_object()) scene_error(where + " must be an object");
  check_keys(j, {"lo", "hi"}, where);
  Box b{vec3(require(j, "lo", where), where + ".lo"),
        vec3(require(j, "hi", where), where + ".hi")};
  if (!((b.hi - b.lo).minCoeff() > 0.0)) scene_error(where + ": hi must exceed lo");
  return b;
}

inline BackgroundMedium parse_medium(const json& j) {
  if (!j.is_object()) scene_error("'medium' must be an object");
  check_keys(j, {"k", "n_const", "n_grid", "box", "cells"}, "medium");
  const double k = number(require(j, "k", "medium"), "medium.k");
  if (j.contains("n_grid")) {
    if (j.contains("n_const") || j.contains("box") || j.contains("cells"))
      scene_error("medium: n_grid excludes n_const/box/cells");
    const json& g = j.at("n_grid");
    check_keys(g, {"box", "dims", "values"}, "medium.n_grid");
    const Box b = box(require(g, "box", "medium.n_grid"), "medium.n_grid.box");
    const json& dims = require(g, "dims", "medium.n_grid");
    if (!dims.is_array() || dims.size() != 3)
      scene_error("medium.n_grid.dims must be a 3-array");
    RegularGrid grid(b, dims[0].get<int>(), dims[1].get<int>(), dims[2].get<int>());
    const json& vals = require(g, "values", "medium.n_grid");
    if (!vals.is_array() || static_cast<int>(vals.size()) != grid.size())
      scene_error("medium.n_grid.values must have nx*ny*nz entries");
    std::vector<double> n(vals.size());
    for (size_t i = 0; i < vals.size(); ++i)
      n[i] = number(vals[i], "medium.n_grid.values");
    return BackgroundMedium::sampled(k, grid, std::move(n));
  }
  if (j.contains("n_const")) {
    if (!j.contains("box")) scene_error("medium: n_const requires box");
    const double n = number(j.at("n_const"), "medium.n_const");
    const int cells = j.contains("cells") ? j.at("cells").get<int>() : 8;
    return BackgroundMedium::constant_in_box(k, box(j.at("box"), "medium.box"), n,
                                             cells);
  }
  if (j.contains("box") || j.contains("cells"))
    scene_error("medium: box/cells require n_const");
  return BackgroundMedium::homogeneous(k);
}

inline ParticleShape parse_shape(const json& j, const std::filesystem::path& base) {
  if (!j.is_object() || j.size() != 1)
    scene_error("particle shape must have exactly one of sphere/ellipsoid/mesh");
  check_keys(j, {"sphere", "ellipsoid", "mesh"}, "particle.shape");
  if (j.contains("sphere")) {
    const json& s = j.at("sphere");
    check_keys(s, {"a"}, "shape.sphere");
    const double a = number(require(s, "a", "shape.sphere"), "shape.sphere.a");
    if (!(a > 0.0)) scene_error("shape.sphere.a must be positive");
    return Sphere{a};
  }
  if (j.contains("ellipsoid")) {
    const json& e = j.at("ellipsoid");
    check_keys(e, {"axes"}, "shape.ellipsoid");
    const Vec3 axes = vec3(require(e, "axes", "shape.ellipsoid"), "shape.ellipsoid.axes");
    if (!(axes.minCoeff() > 0.0)) scene_error("shape.ellipsoid.axes must be positive");
    return Ellipsoid{axes};
  }
  const json& m = j.at("mesh");
  check_keys(m, {"path"}, "shape.mesh");
  const json& p = require(m, "path", "shape.mesh");
  if (!p.is_string()) scene_error("shape.mesh.path must be a string");
  std::filesystem::path mp = p.get<std::string>();
  if (mp.is_relative()) mp = base / mp;
  return load_mesh(mp.string());
}

inline BoundaryCondition parse_bc(const json& j) {
  if (!j.is_string()) scene_error("particle.bc must be a string");
  const std::string s = j.get<std::string>();
  if (s == "dirichlet") return BoundaryCondition::Dirichlet;
  if (s == "neumann") return BoundaryCondition::Neumann;
  scene_error("particle.bc must be 'dirichlet' or 'neumann', got '" + s + "'");
}

inline std::vector<Vec3> parse_observation(const json& j) {
  if (!j.is_object()) scene_error("'observation' must be an object");
  check_keys(j, {"points", "lattice"}, "observation");
  if (j.contains("points") == j.contains("lattice"))
    scene_error("observation needs exactly one of points/lattice");
  std::vector<Vec3> pts;
  if (j.contains("points")) {
    const json& arr = j.at("points");
    if (!arr.is_array()) scene_error("observation.points must be an array");
    pts.reserve(arr.size());
    for (size_t i = 0; i < arr.size(); ++i)
      pts.push_back(vec3(arr[i], "observation.points[" + std::to_string(i) + "]"));
    return pts;
  }
  const json& lat = j.at("lattice");
  check_keys(lat, {"box", "dims"}, "observation.lattice");
  const Box b = box(require(lat, "box", "observation.lattice"), "observation.lattice.box");
  const json& dims = require(lat, "dims", "observation.lattice");
  if (!dims.is_array() || dims.size() != 3)
    scene_error("observation.lattice.dims must be a 3-array");
  RegularGrid grid(b, dims[0].get<int>(), dims[1].get<int>(), dims[2].get<int>());
  pts.reserve(grid.size());
  for (int i = 0; i < grid.size(); ++i) pts.push_back(grid.node(i));
  return pts;
}

}  // namespace detail

inline SceneFile load_scene_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) detail::scene_error("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    detail::scene_error("malformed JSON in '" + path + "': " + e.what());
  }
  if (!j.is_object()) detail::scene_error("top level must be an object");
  detail::check_keys(j, {"medium", "incident", "particles", "observation", "solver"},
                     "top level");
  SceneFile f;
  f.medium = detail::parse_medium(detail::require(j, "medium", "top level"));

  const nlohmann::json& inc = detail::require(j, "incident", "top level");
  detail::check_keys(inc, {"direction"}, "incident");
  f.direction = detail::vec3(detail::require(inc, "direction", "incident"),
                             "incident.direction");
  if (f.direction.norm() == 0.0) detail::scene_error("incident.direction is zero");
  f.direction.normalize();

  const nlohmann::json& parts = detail::require(j, "particles", "top level");
  if (!parts.is_array()) detail::scene_error("'particles' must be an array");
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  for (size_t i = 0; i < parts.size(); ++i) {
    const nlohmann::json& p = parts[i];
    const std::string where = "particles[" + std::to_string(i) + "]";
    detail::check_keys(p, {"center", "shape", "bc"}, where);
    Particle part;
    part.center = detail::vec3(detail::require(p, "center", where), where + ".center");
    part.shape = detail::parse_shape(detail::require(p, "shape", where), base);
    part.bc = detail::parse_bc(detail::require(p, "bc", where));
    part.validate();
    f.particles.push_back(std::move(part));
  }

  if (j.contains("observation")) f.observation = detail::parse_observation(j.at("observation"));

  if (j.contains("solver")) {
    const nlohmann::json& s = j.at("solver");
    detail::check_keys(s, {"method", "tol", "max_iter"}, "solver");
    if (s.contains("method")) {
      f.solver.method = s.at("method").get<std::string>();
      if (f.solver.method != "direct" && f.solver.method != "iterative")
        detail::scene_error("solver.method must be 'direct' or 'iterative'");
    }
    if (s.contains("tol")) f.solver.tol = detail::number(s.at("tol"), "solver.tol");
    if (s.contains("max_iter")) f.solver.max_iter = s.at("max_iter").get<int>();
  }
  return f;
}

inline Scene make_scene(const SceneFile& f) {
  return Scene(f.medium, f.direction, f.particles);
}

inline Scene load_scene(const std::string& path) {
  return make_scene(load_scene_file(path));
}

// ---------------------------------------------------------------------------
// CSV writers and readers
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// CSV rows x,y,z,re_u,im_u,re_u0,im_u0,flag, one per observation point.
inline void write_field(const FieldGrid& grid, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_field: cannot write '" + path + "'");
  out << "x,y,z,re_u,im_u,re_u0,im_u0,flag\n";
  for (size_t i = 0; i < grid.points.size(); ++i) {
    const Vec3& p = grid.points[i];
    out << detail::fmt17(p.x()) << ',' << detail::fmt17(p.y()) << ','
        << detail::fmt17(p.z()) << ',' << detail::fmt17(grid.u(i).real()) << ','
        << detail::fmt17(grid.u(i).imag()) << ',' << detail::fmt17(grid.u0(i).real())
        << ',' << detail::fmt17(grid.u0(i).imag()) << ','
        << static_cast<int>(grid.flags[i]) << '\n';
  }
  if (!out) throw std::runtime_error("write_field: write failed for '" + path + "'");
}

inline FieldGrid read_field(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_field: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != "x,y,z,re_u,im_u,re_u0,im_u0,flag")
    throw std::runtime_error("read_field: bad header in '" + path + "'");
  FieldGrid g;
  std::vector<Cplx> u, u0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double x, y, z, ru, iu_, ru0, iu0;
    int flag;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%lf,%d", &x, &y, &z, &ru,
                    &iu_, &ru0, &iu0, &flag) != 8)
      throw std::runtime_error("read_field: bad row in '" + path + "'");
    g.points.emplace_back(x, y, z);
    u.emplace_back(ru, iu_);
    u0.emplace_back(ru0, iu0);
    g.flags.push_back(static_cast<std::uint8_t>(flag));
  }
  g.u = Eigen::Map<const Eigen::VectorXcd>(u.data(), u.size());
  g.u0 = Eigen::Map<const Eigen::VectorXcd>(u0.data(), u0.size());
  return g;
}

/// Dirichlet charges: index,re_q,im_q.
inline void write_charges(const ChargeSolution& sol, const std::string& path) {
  for (BoundaryCondition bc : sol.bcs)
    if (bc != BoundaryCondition::Dirichlet)
      throw std::invalid_argument("write_charges: non-Dirichlet particle, use write_moments");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_charges: cannot write '" + path + "'");
  out << "index,re_q,im_q\n";
  for (size_t m = 0; m < sol.bcs.size(); ++m) {
    const Cplx q = sol.charge(static_cast<int>(m));
    out << m << ',' << detail::fmt17(q.real()) << ',' << detail::fmt17(q.imag())
        << '\n';
  }
  if (!out) throw std::runtime_error("write_charges: write failed for '" + path + "'");
}

/// Per-particle unknowns for any boundary-condition mix. Dirichlet rows fill
/// the charge columns, Neumann rows the moment columns; the rest are zero.
inline void write_moments(const ChargeSolution& sol, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_moments: cannot write '" + path + "'");
  out << "index,bc,re_q,im_q,re_u,im_u,re_gx,im_gx,re_gy,im_gy,re_gz,im_gz\n";
  for (size_t m = 0; m < sol.bcs.size(); ++m) {
    const int mi = static_cast<int>(m);
    Cplx q{0, 0}, u{0, 0};
    Eigen::Vector3cd g = Eigen::Vector3cd::Zero();
    const char* bc;
    if (sol.bcs[m] == BoundaryCondition::Dirichlet) {
      bc = "dirichlet";
      q = sol.charge(mi);
    } else {
      bc = "neumann";
      u = sol.u_e(mi);
      g = sol.grad_u_e(mi);
    }
    out << m << ',' << bc << ',' << detail::fmt17(q.real()) << ','
        << detail::fmt17(q.imag()) << ',' << detail::fmt17(u.real()) << ','
        << detail::fmt17(u.imag());
    for (int i = 0; i < 3; ++i)
      out << ',' << detail::fmt17(g(i).real()) << ',' << detail::fmt17(g(i).imag());
    out << '\n';
  }
  if (!out) throw std::runtime_error("write_moments: write failed for '" + path + "'");
}

/// Density grid file: a grid description line, then x,y,z,value rows.
inline void write_density(const ScalarDensity& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_density: cannot write '" + path + "'");
  const Box& b = d.grid.box;
  out << "# grid";
  for (int i = 0; i < 3; ++i) out << ' ' << detail::fmt17(b.lo[i]);
  for (int i = 0; i < 3; ++i) out << ' ' << detail::fmt17(b.hi[i]);
  out << ' ' << d.grid.nx << ' ' << d.grid.ny << ' ' << d.grid.nz << '\n';
  out << "x,y,z,value\n";
  for (int i = 0; i < d.grid.size(); ++i) {
    const Vec3 p = d.grid.node(i);
    out << detail::fmt17(p.x()) << ',' << detail::fmt17(p.y()) << ','
        << detail::fmt17(p.z()) << ',' << detail::fmt17(d.values[i]) << '\n';
  }
  if (!out) throw std::runtime_error("write_density: write failed for '" + path + "'");
}

inline ScalarDensity read_density(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_density: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("read_density: empty file '" + path + "'");
  Box b;
  int nx, ny, nz;
  if (std::sscanf(line.c_str(), "# grid %lf %lf %lf %lf %lf %lf %d %d %d", &b.lo.x(),
                  &b.lo.y(), &b.lo.z(), &b.hi.x(), &b.hi.y(), &b.hi.z(), &nx, &ny,
                  &nz) != 9)
    throw std::runtime_error("read_density: bad grid line in '" + path + "'");
  if (!std::getline(in, line) || line != "x,y,z,value")
    throw std::runtime_error("read_density: bad header in '" + path + "'");
  ScalarDensity d;
  d.grid = RegularGrid(b, nx, ny, nz);
  d.values.reserve(d.grid.size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double x, y, z, v;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &x, &y, &z, &v) != 4)
      throw std::runtime_error("read_density: bad row in '" + path + "'");
    d.values.push_back(v);
  }
  if (static_cast<int>(d.values.size()) != d.grid.size())
    throw std::runtime_error("read_density: row count mismatch in '" + path + "'");
  return d;
}

}  // namespace mscat
