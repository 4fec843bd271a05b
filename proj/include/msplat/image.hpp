// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msplat/common.hpp"

#include <string>

namespace msplat {

// Row-major, channel-interleaved image with linear values.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * h * c, fill) {}

    double& at(int x, int y, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int x, int y, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

double srgb_to_linear(double s);
double linear_to_srgb(double l);

// 8-bit PNG. Gray and RGB(A) PNGs load as 1 or 3 channels (alpha dropped).
// With srgb=true values pass through the sRGB transfer curve.
Image load_png(const std::string& path, bool srgb);
void save_png(const Image& image, const std::string& path, bool srgb);

// Mask loading: 0 -> 0 (ignore), anything else -> 1 (supervise).
std::vector<std::uint8_t> load_mask_png(const std::string& path, int expect_w, int expect_h);

// Minimal NPY v1.0 float32 arrays, shape (H, W, C) or (H, W); values kept linear.
Image load_npy(const std::string& path);
void save_npy(const Image& image, const std::string& path);

} // namespace msplat
