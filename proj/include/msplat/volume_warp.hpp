// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msplat/image.hpp"
#include "msplat/trimesh.hpp"
#include "msplat/volume.hpp"

#include <optional>

namespace msplat {

// Surface-band propagation of vertex displacements into the grid:
// d(x) = sum_v phi(|x - v| / rho) (v' - v) / sum_v phi(|x - v| / rho),
// Wendland kernel, zero where no vertex is in range. The mesh must already
// live in the volume's world frame.
DisplacementGrid scatter_displacements(const TriMesh& ref_mesh, const std::vector<Vec3>& deformed,
                                       const GridGeometry& geometry, double influence_radius);

struct WarpStats {
    std::size_t in_support = 0;     // voxels with a nonzero forward displacement
    std::size_t non_converged = 0;  // fixed-point inversions that hit the cap
};

// Backward warping through fixed-point inversion of the forward field
// (max 20 iterations, tolerance 0.01 * min spacing), trilinear sampling,
// out-of-bounds reads take `fill` (default: minimum input intensity).
// Warns when more than 1% of in-support voxels fail to converge.
VolumeGrid warp_volume(const VolumeGrid& volume, const DisplacementGrid& disp,
                       std::optional<float> fill = std::nullopt, WarpStats* stats = nullptr);

enum class SlicePlane { Axial, Sagittal, Coronal }; // fixed k, i, j index

struct SliceResult {
    Image image; // single channel, window/level mapped to [0, 1]
    double window_lo = 0.0;
    double window_hi = 1.0;
};

// window_lo == window_hi requests the full data range of the volume.
SliceResult extract_slice(const VolumeGrid& volume, SlicePlane plane, int index,
                          double window_lo = 0.0, double window_hi = 0.0);

} // namespace msplat
