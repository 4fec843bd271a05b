// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#include "msplat/trimesh.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace msplat {

void RigidTransform::validate() const {
    const Mat3 should_be_identity = rotation.transpose() * rotation;
    const double ortho_residual = (should_be_identity - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (ortho_residual > 1e-9) {
        throw DataError("rigid transform rotation is not orthonormal (residual " +
                        std::to_string(ortho_residual) + ")");
    }
    if (std::abs(rotation.determinant() - 1.0) > 1e-9) {
        throw DataError("rigid transform rotation has determinant != +1");
    }
}

RigidTransform RigidTransform::from_matrix(const Mat4& m) {
    RigidTransform t;
    t.rotation = m.block<3, 3>(0, 0);
    t.translation = m.block<3, 1>(0, 3);
    const Vec4 bottom = m.row(3);
    if ((bottom - Vec4(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-9) {
        throw DataError("4x4 transform has a non-trivial bottom row");
    }
    t.validate();
    return t;
}

Mat4 RigidTransform::to_matrix() const {
    Mat4 m = Mat4::Identity();
    m.block<3, 3>(0, 0) = rotation;
    m.block<3, 1>(0, 3) = translation;
    return m;
}

void TriMesh::validate() const {
    const std::size_t n = vertices.size();
    for (std::size_t f = 0; f < faces.size(); ++f) {
        for (int k = 0; k < 3; ++k) {
            if (faces[f][k] >= n) {
                throw DataError("face " + std::to_string(f) + " references vertex " +
                                std::to_string(faces[f][k]) + " but mesh has " +
                                std::to_string(n) + " vertices");
            }
        }
        if (face_area(f) <= 1e-12) {
            throw DataError("face " + std::to_string(f) + " is degenerate (area <= 1e-12 mm^2)");
        }
    }
}

double TriMesh::face_area(std::size_t f) const {
    const auto& tri = faces[f];
    const Vec3 e1 = vertices[tri[1]] - vertices[tri[0]];
    const Vec3 e2 = vertices[tri[2]] - vertices[tri[0]];
    return 0.5 * e1.cross(e2).norm();
}

Vec3 TriMesh::face_centroid(std::size_t f) const {
    const auto& tri = faces[f];
    return (vertices[tri[0]] + vertices[tri[1]] + vertices[tri[2]]) / 3.0;
}

double TriMesh::mean_edge_length() const {
    double total = 0.0;
    std::size_t count = 0;
    std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
    for (const auto& tri : faces) {
        for (int k = 0; k < 3; ++k) {
            std::uint32_t a = tri[k];
            std::uint32_t b = tri[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            if (seen.insert({a, b}).second) {
                total += (vertices[a] - vertices[b]).norm();
                ++count;
            }
        }
    }
    return count > 0 ? total / static_cast<double>(count) : 0.0;
}

double TriMesh::bbox_diagonal() const {
    if (vertices.empty()) return 0.0;
    Vec3 lo = vertices[0];
    Vec3 hi = vertices[0];
    for (const Vec3& v : vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    return (hi - lo).norm();
}

Adjacency build_adjacency(const TriMesh& mesh) {
    mesh.validate();
    const std::size_t n = mesh.vertex_count();
    Adjacency adj;
    adj.neighbors.resize(n);
    adj.incident_faces.resize(n);
    for (std::uint32_t f = 0; f < mesh.face_count(); ++f) {
        const auto& tri = mesh.faces[f];
        for (int k = 0; k < 3; ++k) {
            adj.incident_faces[tri[k]].push_back(f);
            adj.neighbors[tri[k]].push_back(tri[(k + 1) % 3]);
            adj.neighbors[tri[k]].push_back(tri[(k + 2) % 3]);
        }
    }
    for (std::size_t v = 0; v < n; ++v) {
        auto& nb = adj.neighbors[v];
        std::sort(nb.begin(), nb.end());
        nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    }
    for (std::uint32_t i = 0; i < n; ++i) {
        for (std::uint32_t j : adj.neighbors[i]) {
            adj.directed_edges.emplace_back(i, j);
        }
    }
    return adj;
}

FaceFrame face_frame(const TriMesh& mesh, const std::vector<Vec3>& positions, std::size_t face_id) {
    const auto& tri = mesh.faces[face_id];
    const Vec3& v0 = positions[tri[0]];
    const Vec3& v1 = positions[tri[1]];
    const Vec3& v2 = positions[tri[2]];
    const Vec3 e1 = v1 - v0;
    const Vec3 e2 = v2 - v0;
    const Vec3 n_raw = e1.cross(e2);
    const double e1_len = e1.norm();
    const double n_len = n_raw.norm();
    if (n_len <= 2e-12 || e1_len <= 1e-12) {
        throw DataError("face " + std::to_string(face_id) + " is degenerate in the given positions");
    }
    FaceFrame frame;
    const Vec3 tangent = e1 / e1_len;
    const Vec3 normal = n_raw / n_len;
    frame.rotation.col(0) = tangent;
    frame.rotation.col(2) = normal;
    frame.rotation.col(1) = normal.cross(tangent);
    frame.origin = (v0 + v1 + v2) / 3.0;
    return frame;
}

TriMesh apply_rigid(const TriMesh& mesh, const RigidTransform& t) {
    TriMesh out;
    out.faces = mesh.faces;
    out.vertices.resize(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        out.vertices[i] = t.apply(mesh.vertices[i]);
    }
    return out;
}

} // namespace msplat
