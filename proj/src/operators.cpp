// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#include "fimesh/operators.hpp"

#include <Eigen/Geometry>
#include <fstream>
#include <string>
#include <vector>

#include "fimesh/common.hpp"

namespace fimesh {

namespace {

constexpr double kPoleTol = 1e-12;

bool is_pole(const Eigen::Vector3d& v) { return std::abs(v.z()) >= 1.0 - kPoleTol; }

void prune_zeros(Eigen::SparseMatrix<double>& m) {
  m.prune([](const Eigen::Index&, const Eigen::Index&, const double& v) {
    return v != 0.0;
  });
  m.makeCompressed();
}

}  // namespace

Eigen::Vector3d local_north(const Eigen::Vector3d& v) {
  if (is_pole(v)) return Eigen::Vector3d::Zero();
  const Eigen::Vector3d z(0, 0, 1);
  return (z - v.z() * v).normalized();
}

Eigen::Vector3d local_east(const Eigen::Vector3d& v) {
  if (is_pole(v)) return Eigen::Vector3d::Zero();
  return Eigen::Vector3d(0, 0, 1).cross(v).normalized();
}

Eigen::VectorXd vertex_masses(const TriMesh& mesh) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(mesh.vertex_count());
  for (std::int64_t f = 0; f < mesh.face_count(); ++f) {
    const Eigen::Vector3d p0 = mesh.vertices.col(mesh.faces(0, f));
    const Eigen::Vector3d p1 = mesh.vertices.col(mesh.faces(1, f));
    const Eigen::Vector3d p2 = mesh.vertices.col(mesh.faces(2, f));
    const double area = 0.5 * (p1 - p0).cross(p2 - p0).norm();
    for (int j = 0; j < 3; ++j) m[mesh.faces(j, f)] += area / 3.0;
  }
  return m;
}

OperatorSet build_operators(std::shared_ptr<const TriMesh> mesh,
                            const OperatorOptions& options) {
  if (!mesh) throw ConfigError("build_operators: null mesh");
  const TriMesh& m = *mesh;
  const std::int64_t nv = m.vertex_count();
  const std::int64_t nf = m.face_count();

  std::vector<Eigen::Vector3d> north(nv), east(nv);
  for (std::int64_t v = 0; v < nv; ++v) {
    north[v] = local_north(m.vertices.col(v));
    east[v] = local_east(m.vertices.col(v));
  }

  // pass 1: per-vertex normalization weights for the gradient average
  Eigen::VectorXd wsum = Eigen::VectorXd::Zero(nv);
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(nv);
  for (std::int64_t f = 0; f < nf; ++f) {
    const Eigen::Vector3d p0 = m.vertices.col(m.faces(0, f));
    const Eigen::Vector3d p1 = m.vertices.col(m.faces(1, f));
    const Eigen::Vector3d p2 = m.vertices.col(m.faces(2, f));
    const double area = 0.5 * (p1 - p0).cross(p2 - p0).norm();
    if (area < options.degenerate_area)
      throw NumericError("degenerate face " + std::to_string(f) +
                         " (area " + std::to_string(area) + ")");
    const double w =
        options.weighting == GradientWeighting::FaceArea ? area : 1.0;
    for (int j = 0; j < 3; ++j) {
      wsum[m.faces(j, f)] += w;
      mass[m.faces(j, f)] += area / 3.0;
    }
  }

  // pass 2: triplets, in face order so compression is deterministic
  using T = Eigen::Triplet<double>;
  std::vector<T> lat_t, lng_t, lap_t;
  lat_t.reserve(static_cast<std::size_t>(nf) * 9);
  lng_t.reserve(static_cast<std::size_t>(nf) * 9);
  lap_t.reserve(static_cast<std::size_t>(nf) * 12);

  for (std::int64_t f = 0; f < nf; ++f) {
    const std::uint32_t idx[3] = {m.faces(0, f), m.faces(1, f), m.faces(2, f)};
    const Eigen::Vector3d p[3] = {m.vertices.col(idx[0]),
                                  m.vertices.col(idx[1]),
                                  m.vertices.col(idx[2])};
    const Eigen::Vector3d nvec = (p[1] - p[0]).cross(p[2] - p[0]);
    const double twice_area = nvec.norm();
    const Eigen::Vector3d nhat = nvec / twice_area;
    const double area = 0.5 * twice_area;
    const double w =
        options.weighting == GradientWeighting::FaceArea ? area : 1.0;

    // in-plane gradient of the hat function of corner k
    Eigen::Vector3d grad[3];
    for (int k = 0; k < 3; ++k)
      grad[k] = nhat.cross(p[(k + 2) % 3] - p[(k + 1) % 3]) / twice_area;

    for (int j = 0; j < 3; ++j) {
      const std::uint32_t v = idx[j];
      if (north[v].isZero()) continue;  // pole: zero gradient row
      const double s = w / wsum[v];
      for (int k = 0; k < 3; ++k) {
        lat_t.emplace_back(v, idx[k], s * north[v].dot(grad[k]));
        lng_t.emplace_back(v, idx[k], s * east[v].dot(grad[k]));
      }
    }

    // cotangent weights; corner j faces the edge (j+1, j+2)
    for (int j = 0; j < 3; ++j) {
      const Eigen::Vector3d e1 = p[(j + 1) % 3] - p[j];
      const Eigen::Vector3d e2 = p[(j + 2) % 3] - p[j];
      const double cot = e1.dot(e2) / e1.cross(e2).norm();
      const std::uint32_t a = idx[(j + 1) % 3];
      const std::uint32_t b = idx[(j + 2) % 3];
      lap_t.emplace_back(a, b, 0.5 * cot);
      lap_t.emplace_back(b, a, 0.5 * cot);
      lap_t.emplace_back(a, a, -0.5 * cot);
      lap_t.emplace_back(b, b, -0.5 * cot);
    }
  }

  OperatorSet out;
  out.mesh = mesh;
  out.source_hash = mesh_hash(m);

  out.identity.matrix.resize(nv, nv);
  out.identity.matrix.setIdentity();
  out.identity.symmetric = true;

  out.grad_lat.matrix.resize(nv, nv);
  out.grad_lat.matrix.setFromTriplets(lat_t.begin(), lat_t.end());
  prune_zeros(out.grad_lat.matrix);

  out.grad_lng.matrix.resize(nv, nv);
  out.grad_lng.matrix.setFromTriplets(lng_t.begin(), lng_t.end());
  prune_zeros(out.grad_lng.matrix);

  out.laplacian.matrix.resize(nv, nv);
  out.laplacian.matrix.setFromTriplets(lap_t.begin(), lap_t.end());
  // normalize by barycentric mass row-wise; column-major storage, so walk
  // all stored values and divide by their row's mass
  for (int col = 0; col < out.laplacian.matrix.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(out.laplacian.matrix, col);
         it; ++it)
      it.valueRef() /= mass[it.row()];
  prune_zeros(out.laplacian.matrix);

  return out;
}

Eigen::MatrixXd apply(const SparseOp& op, const Eigen::MatrixXd& signal) {
  if (op.cols() != signal.cols())
    throw ConfigError("apply: operator size " + std::to_string(op.cols()) +
                      " vs signal vertex count " + std::to_string(signal.cols()));
  return (op.matrix * signal.transpose()).transpose();
}

MeshSignal apply(const SparseOp& op, const MeshSignal& signal) {
  return {apply(op, signal.values), signal.mesh};
}

namespace {

constexpr char kOpsMagic[9] = "FIOPS001";

void write_sparse(BinaryWriter& w, const SparseOp& op) {
  // CSR layout: convert from the column-major in-memory form
  Eigen::SparseMatrix<double, Eigen::RowMajor> rm = op.matrix;
  rm.makeCompressed();
  w.pod<std::uint8_t>(op.symmetric ? 1 : 0);
  w.pod<std::uint64_t>(static_cast<std::uint64_t>(rm.nonZeros()));
  for (std::int64_t r = 0; r <= rm.rows(); ++r)
    w.pod<std::uint64_t>(static_cast<std::uint64_t>(rm.outerIndexPtr()[r]));
  for (std::int64_t k = 0; k < rm.nonZeros(); ++k)
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(rm.innerIndexPtr()[k]));
  w.bytes(rm.valuePtr(), sizeof(double) * static_cast<std::size_t>(rm.nonZeros()));
}

SparseOp read_sparse(BinaryReader& r, std::int64_t n) {
  SparseOp op;
  op.symmetric = r.pod<std::uint8_t>() != 0;
  const auto nnz = static_cast<std::int64_t>(r.pod<std::uint64_t>());
  if (nnz < 0 || nnz > n * n) throw DataError("implausible operator nnz");
  std::vector<int> outer(static_cast<std::size_t>(n) + 1);
  std::vector<int> inner(static_cast<std::size_t>(nnz));
  std::vector<double> vals(static_cast<std::size_t>(nnz));
  for (auto& o : outer) {
    const auto v = r.pod<std::uint64_t>();
    if (v > static_cast<std::uint64_t>(nnz)) throw DataError("bad row pointer");
    o = static_cast<int>(v);
  }
  for (auto& i : inner) {
    const auto v = r.pod<std::uint32_t>();
    if (v >= static_cast<std::uint64_t>(n)) throw DataError("bad column index");
    i = static_cast<int>(v);
  }
  r.bytes(vals.data(), sizeof(double) * vals.size());
  Eigen::Map<const Eigen::SparseMatrix<double, Eigen::RowMajor>> map(
      n, n, nnz, outer.data(), inner.data(), vals.data());
  op.matrix = map;
  op.matrix.makeCompressed();
  return op;
}

}  // namespace

void save_operator_set(const std::filesystem::path& path, const OperatorSet& ops) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw MissingInputError("cannot open for writing: " + path.string());
  BinaryWriter w(os);
  w.magic(kOpsMagic);
  w.pod<std::uint64_t>(ops.source_hash);
  write_sparse(w, ops.identity);
  write_sparse(w, ops.grad_lat);
  write_sparse(w, ops.grad_lng);
  write_sparse(w, ops.laplacian);
}

OperatorSet load_operator_set(const std::filesystem::path& path,
                              std::shared_ptr<const TriMesh> mesh) {
  if (!mesh) throw ConfigError("load_operator_set: null mesh");
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingInputError("cannot open operator file: " + path.string());
  BinaryReader r(is);
  r.expect_magic(kOpsMagic);
  OperatorSet out;
  out.source_hash = r.pod<std::uint64_t>();
  if (out.source_hash != mesh_hash(*mesh))
    throw DataError("operator file was built from a different mesh");
  out.mesh = std::move(mesh);
  const std::int64_t n = out.mesh->vertex_count();
  out.identity = read_sparse(r, n);
  out.grad_lat = read_sparse(r, n);
  out.grad_lng = read_sparse(r, n);
  out.laplacian = read_sparse(r, n);
  return out;
}

}  // namespace fimesh
