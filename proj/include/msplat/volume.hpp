// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msplat/common.hpp"

#include <array>
#include <string>

namespace msplat {

// Voxel grid geometry in world millimeters. Values are stored x-fastest;
// the world position of voxel (i, j, k) is origin + direction * (spacing .* (i, j, k)).
struct GridGeometry {
    std::array<int, 3> dims = {1, 1, 1};
    Vec3 spacing = Vec3::Ones(); // mm / voxel
    Vec3 origin = Vec3::Zero();
    Mat3 direction = Mat3::Identity(); // orthonormal

    void validate() const;
    bool matches(const GridGeometry& other) const;

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }
    std::size_t flatten(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims[0]) *
                   (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * k);
    }
    Vec3 world_at(int i, int j, int k) const {
        return origin + direction * spacing.cwiseProduct(Vec3(i, j, k));
    }
    // World displacement expressed as a (fractional) index offset.
    Vec3 index_offset(const Vec3& displacement) const {
        return (direction.transpose() * displacement).cwiseQuotient(spacing);
    }
};

struct VolumeGrid {
    GridGeometry geom;
    std::vector<float> values; // HU or arbitrary intensity

    float min_value() const;
    float max_value() const;
};

struct DisplacementGrid {
    GridGeometry geom;
    std::vector<Vec3> values; // mm, world frame
};

// NRRD I/O (raw encoding). `.nrrd` writes an attached header, `.nhdr` a
// detached header next to a `.raw` payload, which doubles as the plain
// raw-plus-sidecar-metadata form.
VolumeGrid load_volume_nrrd(const std::string& path);
void save_volume_nrrd(const VolumeGrid& volume, const std::string& path);

DisplacementGrid load_displacement_nrrd(const std::string& path);
void save_displacement_nrrd(const DisplacementGrid& grid, const std::string& path);

} // namespace msplat
