// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <vector>

namespace fimesh {

enum class MeshKind : std::uint8_t { Full = 0, Focused = 1 };

inline constexpr std::uint32_t kNoParent = 0xffffffffu;

// Triangle mesh on the unit sphere, produced by recursive 4-to-1 subdivision
// of a base icosahedron with edge midpoints pushed back onto the sphere.
//
// Invariants:
//  * vertex columns are unit length;
//  * faces are counter-clockwise seen from outside;
//  * the vertices of the previous level are a bit-exact prefix of the vertex
//    array, and `coarse_vertex_count` is the length of that prefix;
//  * `parent_edge` stores, for every vertex created as an edge midpoint, the
//    (min, max) pair of its parent indices; base icosahedron vertices carry
//    (kNoParent, kNoParent).
//
// `kind == Focused` means only the designated Level-1 face (the one
// containing latitude 0, longitude 0) has been refined past Level 1; the
// rest of the sphere stays at Level 1, so patch-boundary midpoints are
// T-junctions rather than shared corners.
struct TriMesh {
  int level = 0;
  MeshKind kind = MeshKind::Full;
  Eigen::Matrix3Xd vertices;
  Eigen::Matrix<std::uint32_t, 3, Eigen::Dynamic> faces;
  Eigen::Matrix<std::uint32_t, 2, Eigen::Dynamic> parent_edge;
  std::int64_t coarse_vertex_count = 0;

  std::int64_t vertex_count() const { return vertices.cols(); }
  std::int64_t face_count() const { return faces.cols(); }
};

// Channel x vertex value array bound to the mesh it lives on.
struct MeshSignal {
  Eigen::MatrixXd values;
  std::shared_ptr<const TriMesh> mesh;

  std::int64_t channels() const { return values.rows(); }
  std::int64_t vertex_count() const { return values.cols(); }
};

TriMesh make_icosahedron();

// One full subdivision round; requires kind == Full.
TriMesh subdivide(const TriMesh& mesh);

// Full Level-k mesh (k >= 0).
TriMesh make_full(int level);

// Focused Level-k mesh (k >= 1): full Level-1 sphere with the designated
// face refined k-1 more times.
TriMesh make_focused(int level);

std::int64_t full_vertex_count(int level);
std::int64_t full_face_count(int level);
std::int64_t focused_vertex_count(int level);
std::int64_t focused_face_count(int level);

// The Level-1 face index whose closed spherical triangle contains the
// latitude 0, longitude 0 direction (ties resolved by lowest index).
int designated_face(const TriMesh& level1);

// Shared, lazily built full Level-1 mesh (42 vertices, 80 faces).
const TriMesh& canonical_level1();

// Leaf faces of a focused mesh that lie inside the designated Level-1 face,
// ascending. For focus level 1 this is the designated face alone.
std::vector<std::uint32_t> refined_face_ids(const TriMesh& mesh);

// Vertices incident to refined_face_ids(mesh), ascending.
// Count for focus level k >= 2: (2^(k-1)+1) * (2^(k-1)+2) / 2.
std::vector<std::uint32_t> refined_face_vertex_ids(const TriMesh& mesh);

// First face (by index) whose closed spherical triangle contains p;
// containment is three non-negative triple products with tolerance -1e-12.
// Falls back to the face maximizing the smallest triple product, so every
// unit vector maps to some face.
int face_of_point(const TriMesh& mesh, const Eigen::Vector3d& p);

struct EquivalentResolution {
  int width = 0;
  int height = 0;
  double raw_width = 0.0;  // sqrt(n * pi) before snapping
};

// Equirectangular resolution with the same pixel count as an n-vertex
// sphere: raw width sqrt(n * pi), snapped to the nearest multiple of 360
// when within 2%, otherwise rounded to the nearest even integer (min 2);
// height is always width / 2.
EquivalentResolution equivalent_resolution(std::int64_t vertex_count);

// Spherical excess area of the geodesic triangle (a, b, c); positive when
// counter-clockwise from outside.
double spherical_triangle_area(const Eigen::Vector3d& a,
                               const Eigen::Vector3d& b,
                               const Eigen::Vector3d& c);

Eigen::Vector3d latlon_to_unit(double lat, double lon);
void unit_to_latlon(const Eigen::Vector3d& p, double& lat, double& lon);

void write_mesh(std::ostream& os, const TriMesh& mesh);
TriMesh read_mesh(std::istream& is);
void save_mesh(const std::filesystem::path& path, const TriMesh& mesh);
TriMesh load_mesh(const std::filesystem::path& path);

// FNV-1a over the serialized layout; used to pair operator files with the
// mesh they were built from.
std::uint64_t mesh_hash(const TriMesh& mesh);

}  // namespace fimesh
