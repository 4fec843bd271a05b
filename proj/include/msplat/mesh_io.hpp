// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msplat/trimesh.hpp"

#include <string>

namespace msplat {

// Dispatches on extension: .obj or .ply. Positions and faces only;
// normals, UVs and other attributes are ignored.
TriMesh load_mesh(const std::string& path);

TriMesh load_obj(const std::string& path);
TriMesh load_ply(const std::string& path); // ascii or binary_little_endian

// Binary little-endian PLY with float64 positions so that written meshes
// round-trip bitwise.
void save_ply(const TriMesh& mesh, const std::string& path);

// 4x4 row-major matrix, whitespace-separated, in a plain text file.
RigidTransform load_rigid_transform(const std::string& path);
void save_rigid_transform(const RigidTransform& t, const std::string& path);

} // namespace msplat
