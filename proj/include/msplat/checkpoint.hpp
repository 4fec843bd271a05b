// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msplat/deformation.hpp"
#include "msplat/rigging.hpp"

#include <optional>
#include <string>

namespace msplat {

// Binary checkpoint container.
//
// Layout (all integers and floats little-endian):
//   bytes 0..7   magic "MSPLATCP"
//   u32          version (currently 1)
//   u32          section count
//   per section: u32 tag, u64 payload byte length, payload
//
// Section 'GAUS' (0x47415553):
//   u32 n_gaussians, u32 sh_count
//   u32 parent_face[n]
//   f32 bary[3n], f32 log_scale_uv[2n], f32 opacity_logit[n],
//   f32 init_scale[n], f32 sh[n * sh_count]
//
// Section 'FELD' (0x46454C44):
//   u32 n_anchors, u8 kernel tag, f32 support_radius
//   u32 anchor_ids[n], f32 deltas[3n]
//
// Field weight rows are not stored; rebuild them against the mesh after
// loading. save(load(path)) reproduces the file bytes exactly.
struct Checkpoint {
    std::vector<RiggedGaussian> gaussians;
    std::optional<DeformationField> field; // weights empty until rebuilt
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

} // namespace msplat
