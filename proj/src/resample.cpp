// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#include "fimesh/resample.hpp"

#include <algorithm>
#include <cmath>

#include "fimesh/common.hpp"

namespace fimesh {

Eigen::MatrixXd sample_positions(const EquirectImage& img,
                                 const Eigen::Matrix3Xd& positions) {
  if (img.width != 2 * img.height)
    throw ConfigError("sample_positions expects a 2:1 image");
  Eigen::MatrixXd out(img.channels, positions.cols());
  for (std::int64_t v = 0; v < positions.cols(); ++v) {
    double lat, lon;
    unit_to_latlon(positions.col(v), lat, lon);
    const int x = lon_to_pixel_x(lon, img.width);
    const int y = lat_to_pixel_y(lat, img.height);
    out.col(v) = img.values.col(static_cast<std::int64_t>(y) * img.width + x);
  }
  return out;
}

MeshSignal sample_to_mesh(const EquirectImage& img, const RotationTable& table,
                          int face, std::shared_ptr<const TriMesh> mesh) {
  if (face < 0 || face >= table.face_count())
    throw ConfigError("face index out of range");
  if (!mesh || mesh->kind != MeshKind::Focused)
    throw ConfigError("sample_to_mesh expects a focused mesh");
  if (mesh->level > table.focused_level ||
      mesh->vertex_count() > table.vertex_count())
    throw ConfigError("mesh level exceeds the rotation table's");
  // focused levels are vertex prefixes of one another, so the table's
  // rotated positions cover any coarser focused mesh directly
  const auto positions =
      table.rotated_vertices[face].leftCols(mesh->vertex_count());
  return {sample_positions(img, positions), std::move(mesh)};
}

PatchLattice PatchLattice::build(std::shared_ptr<const TriMesh> focused) {
  if (!focused || focused->kind != MeshKind::Focused)
    throw ConfigError("PatchLattice expects a focused mesh");
  PatchLattice lat;
  lat.mesh_ = std::move(focused);
  const TriMesh& m = *lat.mesh_;
  lat.n_ = 1 << (m.level - 1);
  const int n = lat.n_;

  const TriMesh& l1 = canonical_level1();
  const int d = designated_face(l1);
  const std::uint32_t corner[3] = {l1.faces(0, d), l1.faces(1, d), l1.faces(2, d)};
  Eigen::Matrix3d corners;
  for (int j = 0; j < 3; ++j) corners.col(j) = m.vertices.col(corner[j]);
  lat.corner_inv_ = corners.inverse();

  lat.patch_.clear();
  for (std::uint32_t id : refined_face_vertex_ids(m)) lat.patch_.push_back(id);

  std::vector<std::int32_t> ci(m.vertex_count(), -1), cj(m.vertex_count(), -1);
  ci[corner[0]] = 0;
  cj[corner[0]] = 0;
  ci[corner[1]] = n;
  cj[corner[1]] = 0;
  ci[corner[2]] = 0;
  cj[corner[2]] = n;

  lat.grid_.assign(static_cast<std::size_t>(n + 1) * (n + 1), -1);
  std::size_t placed = 0;
  for (std::int64_t id : lat.patch_) {
    if (ci[id] < 0) {
      const std::uint32_t a = m.parent_edge(0, id);
      const std::uint32_t b = m.parent_edge(1, id);
      if (a == kNoParent || ci[a] < 0 || ci[b] < 0 ||
          (ci[a] + ci[b]) % 2 != 0 || (cj[a] + cj[b]) % 2 != 0)
        throw NumericError("patch vertex " + std::to_string(id) +
                           " has no lattice coordinate");
      ci[id] = (ci[a] + ci[b]) / 2;
      cj[id] = (cj[a] + cj[b]) / 2;
    }
    lat.grid_[static_cast<std::size_t>(ci[id]) * (n + 1) + cj[id]] = id;
    ++placed;
  }
  if (placed != static_cast<std::size_t>(n + 1) * (n + 2) / 2)
    throw NumericError("refined patch does not form a complete lattice");
  return lat;
}

std::int64_t PatchLattice::nearest_vertex(const Eigen::Vector3d& q) const {
  const int n = n_;
  Eigen::Vector3d w = corner_inv_ * q;
  w = w.cwiseMax(0.0);
  const double s = w.sum();
  int i = 0, j = 0;
  if (s > 0) {
    i = std::clamp(static_cast<int>(std::lround(w[1] / s * n)), 0, n);
    j = std::clamp(static_cast<int>(std::lround(w[2] / s * n)), 0, n - i);
  }

  const TriMesh& m = *mesh_;
  const auto dist2 = [&](int a, int b) {
    return (m.vertices.col(vertex_at(a, b)) - q).squaredNorm();
  };
  double best = dist2(i, j);
  for (int iter = 0; iter < 4 * n + 8; ++iter) {
    int bi = i, bj = j;
    for (int di = -2; di <= 2; ++di) {
      for (int dj = -2; dj <= 2; ++dj) {
        if (std::abs(di + dj) > 2 || (di == 0 && dj == 0)) continue;
        const int a = i + di, b = j + dj;
        if (a < 0 || b < 0 || a > n || b > n - a) continue;
        const double d = dist2(a, b);
        if (d < best) {
          best = d;
          bi = a;
          bj = b;
        }
      }
    }
    if (bi == i && bj == j) break;
    i = bi;
    j = bj;
  }
  return vertex_at(i, j);
}

std::int64_t PatchLattice::nearest_vertex_exhaustive(const Eigen::Vector3d& q) const {
  std::int64_t best = patch_[0];
  double bd = (mesh_->vertices.col(best) - q).squaredNorm();
  for (std::int64_t id : patch_) {
    const double d = (mesh_->vertices.col(id) - q).squaredNorm();
    if (d < bd) {
      bd = d;
      best = id;
    }
  }
  return best;
}

EquirectImage render_to_equirect(const MeshSignal& signal,
                                 const RotationTable& table,
                                 const std::vector<int>& faces, int width) {
  if (!signal.mesh || signal.vertex_count() != table.vertex_count())
    throw ConfigError("signal does not live on the rotation table's mesh");
  if (width <= 0 || width % 2 != 0) throw ConfigError("render width must be even");

  std::vector<char> wanted(80, 0);
  for (int f : faces) {
    if (f < 0 || f >= 80) throw ConfigError("face index out of range");
    wanted[f] = 1;
  }
  std::vector<Eigen::Matrix3d> inv(80);
  for (int f = 0; f < 80; ++f)
    if (wanted[f]) inv[f] = table.maps[f].inverse();

  const PatchLattice lattice = PatchLattice::build(signal.mesh);
  const TriMesh& l1 = canonical_level1();
  const int height = width / 2;
  EquirectImage out = make_image(width, height, static_cast<int>(signal.channels()));

  for (int y = 0; y < height; ++y) {
    const double lat = pixel_lat(y, height);
    for (int x = 0; x < width; ++x) {
      const Eigen::Vector3d p = latlon_to_unit(lat, pixel_lon(x, width));
      const int f = face_of_point(l1, p);
      if (!wanted[f]) continue;
      const Eigen::Vector3d q = (inv[f] * p).normalized();
      const std::int64_t v = lattice.nearest_vertex(q);
      out.values.col(static_cast<std::int64_t>(y) * width + x) =
          signal.values.col(v);
    }
  }
  return out;
}

std::vector<int> all_faces() {
  std::vector<int> f(80);
  for (int i = 0; i < 80; ++i) f[i] = i;
  return f;
}

}  // namespace fimesh
