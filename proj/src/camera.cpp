// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#include "msplat/camera.hpp"

namespace msplat {

void Camera::validate() const {
    if (fx <= 0.0 || fy <= 0.0) throw DataError("camera focal lengths must be positive");
    if (width < 1 || height < 1) throw DataError("camera image size must be at least 1x1");
    if (cx < -static_cast<double>(width) || cx > 2.0 * width || cy < -static_cast<double>(height) ||
        cy > 2.0 * height) {
        throw DataError("camera principal point lies outside a 2x margin of the image");
    }
    world_to_camera.validate();
}

void FrameObservation::validate() const {
    camera.validate();
    if (image.width != camera.width || image.height != camera.height || image.channels != 3) {
        throw DataError("frame image dimensions do not match the camera");
    }
    if (mask.size() != image.pixel_count()) {
        throw DataError("frame mask dimensions do not match the image");
    }
    for (double v : image.data) {
        if (v < 0.0 || v > 1.0) throw DataError("frame image values must lie in [0, 1]");
    }
}

} // namespace msplat
