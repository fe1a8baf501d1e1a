// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#include "fimesh/trimesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "fimesh/common.hpp"

namespace fimesh {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  const std::uint32_t lo = std::min(a, b);
  const std::uint32_t hi = std::max(a, b);
  return (static_cast<std::uint64_t>(lo) << 32) | hi;
}

// Refines the faces listed in `refine` (ascending, unique) by one 4-to-1
// round; untouched faces are copied through in place. When `children` is
// non-null it receives, per refined face, the indices of its four children
// in the output face order.
TriMesh subdivide_selected(const TriMesh& mesh,
                           const std::vector<std::uint32_t>& refine,
                           std::vector<std::uint32_t>* children) {
  const std::int64_t nv = mesh.vertex_count();

  std::vector<std::uint64_t> keys;
  keys.reserve(refine.size() * 3);
  for (std::uint32_t f : refine) {
    const auto col = mesh.faces.col(f);
    keys.push_back(edge_key(col[0], col[1]));
    keys.push_back(edge_key(col[1], col[2]));
    keys.push_back(edge_key(col[2], col[0]));
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  // Midpoints are appended in sorted edge-key order, which makes the output
  // independent of the refine list's face order.
  const auto midpoint_id = [&](std::uint32_t a, std::uint32_t b) {
    const std::uint64_t k = edge_key(a, b);
    const auto it = std::lower_bound(keys.begin(), keys.end(), k);
    return static_cast<std::uint32_t>(nv + (it - keys.begin()));
  };

  TriMesh out;
  out.level = mesh.level + 1;
  out.kind = mesh.kind;
  out.coarse_vertex_count = nv;

  out.vertices.resize(3, nv + static_cast<std::int64_t>(keys.size()));
  out.vertices.leftCols(nv) = mesh.vertices;
  out.parent_edge.resize(2, out.vertices.cols());
  out.parent_edge.leftCols(nv) = mesh.parent_edge;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto a = static_cast<std::uint32_t>(keys[i] >> 32);
    const auto b = static_cast<std::uint32_t>(keys[i] & 0xffffffffu);
    out.vertices.col(nv + static_cast<std::int64_t>(i)) =
        (mesh.vertices.col(a) + mesh.vertices.col(b)).normalized();
    out.parent_edge(0, nv + static_cast<std::int64_t>(i)) = a;
    out.parent_edge(1, nv + static_cast<std::int64_t>(i)) = b;
  }

  out.faces.resize(3, mesh.face_count() + 3 * static_cast<std::int64_t>(refine.size()));
  if (children) {
    children->clear();
    children->reserve(refine.size() * 4);
  }
  std::int64_t next = 0;
  std::size_t ri = 0;
  for (std::int64_t f = 0; f < mesh.face_count(); ++f) {
    if (ri < refine.size() && refine[ri] == static_cast<std::uint32_t>(f)) {
      ++ri;
      const auto col = mesh.faces.col(f);
      const std::uint32_t a = col[0], b = col[1], c = col[2];
      const std::uint32_t mab = midpoint_id(a, b);
      const std::uint32_t mbc = midpoint_id(b, c);
      const std::uint32_t mca = midpoint_id(c, a);
      const std::uint32_t quad[4][3] = {{a, mab, mca},
                                        {b, mbc, mab},
                                        {c, mca, mbc},
                                        {mab, mbc, mca}};
      for (const auto& q : quad) {
        if (children) children->push_back(static_cast<std::uint32_t>(next));
        out.faces.col(next++) << q[0], q[1], q[2];
      }
    } else {
      out.faces.col(next++) = mesh.faces.col(f);
    }
  }
  return out;
}

}  // namespace

TriMesh make_icosahedron() {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  const double s = 1.0 / std::sqrt(1.0 + phi * phi);
  const double a = s, p = phi * s;

  TriMesh m;
  m.level = 0;
  m.kind = MeshKind::Full;
  m.vertices.resize(3, 12);
  const double vs[12][3] = {
      {-a, p, 0},  {a, p, 0},  {-a, -p, 0}, {a, -p, 0},
      {0, -a, p},  {0, a, p},  {0, -a, -p}, {0, a, -p},
      {p, 0, -a},  {p, 0, a},  {-p, 0, -a}, {-p, 0, a},
  };
  for (int i = 0; i < 12; ++i)
    m.vertices.col(i) << vs[i][0], vs[i][1], vs[i][2];

  m.faces.resize(3, 20);
  const std::uint32_t fs[20][3] = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
  };
  for (int i = 0; i < 20; ++i)
    m.faces.col(i) << fs[i][0], fs[i][1], fs[i][2];

  m.parent_edge.resize(2, 12);
  m.parent_edge.setConstant(kNoParent);
  m.coarse_vertex_count = 0;
  return m;
}

TriMesh subdivide(const TriMesh& mesh) {
  if (mesh.kind != MeshKind::Full)
    throw ConfigError("subdivide expects a full mesh; use make_focused for partial refinement");
  std::vector<std::uint32_t> all(static_cast<std::size_t>(mesh.face_count()));
  for (std::size_t i = 0; i < all.size(); ++i)
    all[i] = static_cast<std::uint32_t>(i);
  return subdivide_selected(mesh, all, nullptr);
}

TriMesh make_full(int level) {
  if (level < 0) throw ConfigError("mesh level must be non-negative");
  TriMesh m = make_icosahedron();
  for (int i = 0; i < level; ++i) m = subdivide(m);
  return m;
}

TriMesh make_focused(int level) {
  if (level < 1) throw ConfigError("focused mesh level must be at least 1");
  TriMesh m = subdivide(make_icosahedron());
  m.kind = MeshKind::Focused;
  std::vector<std::uint32_t> patch = {
      static_cast<std::uint32_t>(designated_face(m))};
  for (int r = 1; r < level; ++r) {
    std::vector<std::uint32_t> kids;
    m = subdivide_selected(m, patch, &kids);
    patch = std::move(kids);
  }
  return m;
}

std::int64_t full_vertex_count(int level) {
  return 10 * (std::int64_t{1} << (2 * level)) + 2;
}

std::int64_t full_face_count(int level) {
  return 20 * (std::int64_t{1} << (2 * level));
}

std::int64_t focused_vertex_count(int level) {
  if (level < 1) throw ConfigError("focused mesh level must be at least 1");
  if (level == 1) return 42;
  const std::int64_t n = std::int64_t{1} << (level - 1);
  return 42 + (n + 1) * (n + 2) / 2 - 3;
}

std::int64_t focused_face_count(int level) {
  if (level < 1) throw ConfigError("focused mesh level must be at least 1");
  const std::int64_t n = std::int64_t{1} << (level - 1);
  return 80 - 1 + n * n;
}

int designated_face(const TriMesh& level1) {
  if (level1.face_count() != 80)
    throw ConfigError("designated_face expects a Level-1 mesh");
  return face_of_point(level1, Eigen::Vector3d(1.0, 0.0, 0.0));
}

const TriMesh& canonical_level1() {
  static const TriMesh m = subdivide(make_icosahedron());
  return m;
}

std::vector<std::uint32_t> refined_face_ids(const TriMesh& mesh) {
  if (mesh.kind != MeshKind::Focused)
    throw ConfigError("refined_face_ids expects a focused mesh");
  const TriMesh& l1 = canonical_level1();
  const int d = designated_face(l1);
  const Eigen::Vector3d a = l1.vertices.col(l1.faces(0, d));
  const Eigen::Vector3d b = l1.vertices.col(l1.faces(1, d));
  const Eigen::Vector3d c = l1.vertices.col(l1.faces(2, d));
  constexpr double tol = 1e-9;

  std::vector<char> inside(static_cast<std::size_t>(mesh.vertex_count()));
  for (std::int64_t v = 0; v < mesh.vertex_count(); ++v) {
    const Eigen::Vector3d p = mesh.vertices.col(v);
    inside[static_cast<std::size_t>(v)] =
        a.cross(b).dot(p) >= -tol && b.cross(c).dot(p) >= -tol &&
        c.cross(a).dot(p) >= -tol;
  }
  std::vector<std::uint32_t> out;
  for (std::int64_t f = 0; f < mesh.face_count(); ++f) {
    if (inside[mesh.faces(0, f)] && inside[mesh.faces(1, f)] &&
        inside[mesh.faces(2, f)])
      out.push_back(static_cast<std::uint32_t>(f));
  }
  return out;
}

std::vector<std::uint32_t> refined_face_vertex_ids(const TriMesh& mesh) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t f : refined_face_ids(mesh)) {
    out.push_back(mesh.faces(0, f));
    out.push_back(mesh.faces(1, f));
    out.push_back(mesh.faces(2, f));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

int face_of_point(const TriMesh& mesh, const Eigen::Vector3d& p) {
  constexpr double tol = 1e-12;
  int best = 0;
  double best_min = -std::numeric_limits<double>::infinity();
  for (std::int64_t f = 0; f < mesh.face_count(); ++f) {
    const Eigen::Vector3d a = mesh.vertices.col(mesh.faces(0, f));
    const Eigen::Vector3d b = mesh.vertices.col(mesh.faces(1, f));
    const Eigen::Vector3d c = mesh.vertices.col(mesh.faces(2, f));
    const double d0 = a.cross(b).dot(p);
    const double d1 = b.cross(c).dot(p);
    const double d2 = c.cross(a).dot(p);
    const double mn = std::min({d0, d1, d2});
    if (mn >= -tol) return static_cast<int>(f);
    if (mn > best_min) {
      best_min = mn;
      best = static_cast<int>(f);
    }
  }
  return best;
}

EquivalentResolution equivalent_resolution(std::int64_t vertex_count) {
  if (vertex_count <= 0) throw ConfigError("vertex count must be positive");
  EquivalentResolution r;
  r.raw_width = std::sqrt(static_cast<double>(vertex_count) * kPi);
  const double k = std::round(r.raw_width / 360.0);
  if (k >= 1.0 && std::abs(k * 360.0 - r.raw_width) <= 0.02 * r.raw_width) {
    r.width = static_cast<int>(k) * 360;
  } else {
    r.width = 2 * std::max(1, static_cast<int>(std::lround(r.raw_width / 2.0)));
  }
  r.height = r.width / 2;
  return r;
}

double spherical_triangle_area(const Eigen::Vector3d& a,
                               const Eigen::Vector3d& b,
                               const Eigen::Vector3d& c) {
  const double num = a.dot(b.cross(c));
  const double den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
  return 2.0 * std::atan2(num, den);
}

Eigen::Vector3d latlon_to_unit(double lat, double lon) {
  const double cl = std::cos(lat);
  return {cl * std::cos(lon), cl * std::sin(lon), std::sin(lat)};
}

void unit_to_latlon(const Eigen::Vector3d& p, double& lat, double& lon) {
  lat = std::asin(std::clamp(p.z(), -1.0, 1.0));
  lon = std::atan2(p.y(), p.x());
}

namespace {
constexpr char kMeshMagic[9] = "FIMESH01";

void validate_mesh_counts(const TriMesh& m) {
  const std::int64_t v = m.kind == MeshKind::Full
                             ? full_vertex_count(m.level)
                             : focused_vertex_count(m.level);
  const std::int64_t f = m.kind == MeshKind::Full
                             ? full_face_count(m.level)
                             : focused_face_count(m.level);
  if (m.vertex_count() != v || m.face_count() != f)
    throw DataError("mesh header counts do not match its level and kind");
}
}  // namespace

void write_mesh(std::ostream& os, const TriMesh& mesh) {
  BinaryWriter w(os);
  w.magic(kMeshMagic);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(mesh.level));
  w.pod<std::uint8_t>(static_cast<std::uint8_t>(mesh.kind));
  w.pod<std::uint64_t>(static_cast<std::uint64_t>(mesh.vertex_count()));
  w.pod<std::uint64_t>(static_cast<std::uint64_t>(mesh.face_count()));
  w.bytes(mesh.vertices.data(), sizeof(double) * 3 * mesh.vertex_count());
  w.bytes(mesh.faces.data(), sizeof(std::uint32_t) * 3 * mesh.face_count());
  w.bytes(mesh.parent_edge.data(), sizeof(std::uint32_t) * 2 * mesh.vertex_count());
  w.pod<std::uint64_t>(static_cast<std::uint64_t>(mesh.coarse_vertex_count));
}

TriMesh read_mesh(std::istream& is) {
  BinaryReader r(is);
  r.expect_magic(kMeshMagic);
  TriMesh m;
  m.level = static_cast<int>(r.pod<std::uint32_t>());
  const auto kind = r.pod<std::uint8_t>();
  if (kind > 1) throw DataError("bad mesh kind");
  m.kind = static_cast<MeshKind>(kind);
  const auto nv = r.pod<std::uint64_t>();
  const auto nf = r.pod<std::uint64_t>();
  if (m.level > 24 || nv > (1ull << 33) || nf > (1ull << 34))
    throw DataError("implausible mesh header");
  m.vertices.resize(3, static_cast<std::int64_t>(nv));
  m.faces.resize(3, static_cast<std::int64_t>(nf));
  m.parent_edge.resize(2, static_cast<std::int64_t>(nv));
  r.bytes(m.vertices.data(), sizeof(double) * 3 * nv);
  r.bytes(m.faces.data(), sizeof(std::uint32_t) * 3 * nf);
  r.bytes(m.parent_edge.data(), sizeof(std::uint32_t) * 2 * nv);
  m.coarse_vertex_count = static_cast<std::int64_t>(r.pod<std::uint64_t>());
  validate_mesh_counts(m);
  return m;
}

void save_mesh(const std::filesystem::path& path, const TriMesh& mesh) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw MissingInputError("cannot open for writing: " + path.string());
  write_mesh(os, mesh);
}

TriMesh load_mesh(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingInputError("cannot open mesh file: " + path.string());
  return read_mesh(is);
}

std::uint64_t mesh_hash(const TriMesh& mesh) {
  std::uint64_t h = kFnvOffset;
  const auto mix = [&h](const void* p, std::size_t n) { h = fnv1a64(p, n, h); };
  const auto level = static_cast<std::uint32_t>(mesh.level);
  const auto kind = static_cast<std::uint8_t>(mesh.kind);
  const auto nv = static_cast<std::uint64_t>(mesh.vertex_count());
  const auto nf = static_cast<std::uint64_t>(mesh.face_count());
  const auto coarse = static_cast<std::uint64_t>(mesh.coarse_vertex_count);
  mix(&level, sizeof(level));
  mix(&kind, sizeof(kind));
  mix(&nv, sizeof(nv));
  mix(&nf, sizeof(nf));
  mix(mesh.vertices.data(), sizeof(double) * 3 * nv);
  mix(mesh.faces.data(), sizeof(std::uint32_t) * 3 * nf);
  mix(mesh.parent_edge.data(), sizeof(std::uint32_t) * 2 * nv);
  mix(&coarse, sizeof(coarse));
  return h;
}

}  // namespace fimesh
