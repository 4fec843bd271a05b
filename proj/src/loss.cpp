// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#include "msplat/loss.hpp"

#include <cmath>

namespace msplat {

PhotometricResult photometric_loss(const Image& rendered, const FrameObservation& obs,
                                   PhotometricNorm norm) {
    const Image& observed = obs.image;
    if (rendered.width != observed.width || rendered.height != observed.height ||
        rendered.channels != 3 || observed.channels != 3) {
        throw DataError("photometric_loss: image dimensions do not match");
    }
    if (obs.mask.size() != rendered.pixel_count()) {
        throw DataError("photometric_loss: mask dimensions do not match");
    }

    PhotometricResult out;
    out.grad = Image(rendered.width, rendered.height, 3);

    std::size_t supervised = 0;
    for (std::uint8_t m : obs.mask) supervised += m != 0;
    if (supervised == 0) {
        warn("photometric_loss: mask is empty, loss is 0");
        return out;
    }
    const double inv_n = 1.0 / (static_cast<double>(supervised) * 3.0);

    double loss = 0.0;
    for (int y = 0; y < rendered.height; ++y) {
        for (int x = 0; x < rendered.width; ++x) {
            if (obs.mask[static_cast<std::size_t>(y) * rendered.width + x] == 0) continue;
            for (int c = 0; c < 3; ++c) {
                const double diff = rendered.at(x, y, c) - observed.at(x, y, c);
                if (norm == PhotometricNorm::L1) {
                    loss += std::abs(diff);
                    out.grad.at(x, y, c) = (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) * inv_n;
                } else {
                    loss += diff * diff;
                    out.grad.at(x, y, c) = 2.0 * diff * inv_n;
                }
            }
        }
    }
    out.loss = loss * inv_n;
    return out;
}

} // namespace msplat
