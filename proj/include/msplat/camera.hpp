// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msplat/image.hpp"
#include "msplat/trimesh.hpp"

namespace msplat {

// Pinhole camera; pixel (ix, iy) covers [ix, ix+1) x [iy, iy+1) and its
// center is (ix + 0.5, iy + 0.5).
struct Camera {
    double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
    int width = 0, height = 0;
    RigidTransform world_to_camera;

    void validate() const;

    Vec3 to_camera(const Vec3& p_world) const { return world_to_camera.apply(p_world); }
    Vec2 project_point(const Vec3& p_cam) const {
        return Vec2(fx * p_cam[0] / p_cam[2] + cx, fy * p_cam[1] / p_cam[2] + cy);
    }
    Vec3 center_world() const {
        return -(world_to_camera.rotation.transpose() * world_to_camera.translation);
    }
};

struct FrameObservation {
    Image image;                     // H x W x 3, linear [0,1]
    std::vector<std::uint8_t> mask;  // H x W, 1 = supervise
    Camera camera;
    int index = 0;

    void validate() const;
};

} // namespace msplat
