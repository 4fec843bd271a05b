// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msplat/common.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace msplat {

struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
    RigidTransform inverse() const {
        RigidTransform inv;
        inv.rotation = rotation.transpose();
        inv.translation = -(rotation.transpose() * translation);
        return inv;
    }

    // Throws DataError if the rotation is not orthonormal with det +1 (1e-9).
    void validate() const;

    static RigidTransform identity() { return RigidTransform{}; }
    static RigidTransform from_matrix(const Mat4& m);
    Mat4 to_matrix() const;
};

// Triangle mesh in millimeters. Faces are CCW vertex-index triples.
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> faces;

    std::size_t vertex_count() const { return vertices.size(); }
    std::size_t face_count() const { return faces.size(); }

    // Rejects out-of-range face indices and triangles with area <= 1e-12 mm^2.
    void validate() const;

    double face_area(std::size_t f) const;
    Vec3 face_centroid(std::size_t f) const;
    double mean_edge_length() const;
    double bbox_diagonal() const;
};

// Per-vertex neighbor lists (sorted, unique) and incident faces.
struct Adjacency {
    std::vector<std::vector<std::uint32_t>> neighbors;
    std::vector<std::vector<std::uint32_t>> incident_faces;
    // Directed edge list (i -> j for every neighbor pair, both directions),
    // in (i, j) lexicographic order.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> directed_edges;
};

Adjacency build_adjacency(const TriMesh& mesh);

// Orthonormal frame of a (deformed) face: column 0 = unit first edge,
// column 2 = unit normal, column 1 = their cross product. Origin = centroid.
struct FaceFrame {
    Mat3 rotation;
    Vec3 origin;
};

FaceFrame face_frame(const TriMesh& mesh, const std::vector<Vec3>& positions, std::size_t face_id);

TriMesh apply_rigid(const TriMesh& mesh, const RigidTransform& t);

} // namespace msplat
