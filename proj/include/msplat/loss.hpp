// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msplat/camera.hpp"
#include "msplat/renderer.hpp"

namespace msplat {

enum class PhotometricNorm { L1, L2 };

struct LossWeights {
    double lambda_arap = 10.0;
    double lambda_rel = 1.0;
    double lambda_vis = 100.0;
    PhotometricNorm norm = PhotometricNorm::L1;
};

struct PhotometricResult {
    double loss = 0.0;
    Image grad; // d loss / d rendered pixel, zero on masked pixels
};

// Mean over supervised pixels and channels of |diff| (L1) or diff^2 (L2).
// An all-zero mask yields loss 0 with a warning.
PhotometricResult photometric_loss(const Image& rendered, const FrameObservation& obs,
                                   PhotometricNorm norm);

} // namespace msplat
