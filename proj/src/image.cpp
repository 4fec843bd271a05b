// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#include "msplat/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace msplat {

double srgb_to_linear(double s) {
    if (s <= 0.04045) return s / 12.92;
    return std::pow((s + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double l) {
    if (l <= 0.0031308) return 12.92 * l;
    return 1.055 * std::pow(l, 1.0 / 2.4) - 0.055;
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::vector<std::uint8_t> read_png_bytes(const std::string& path, int& width, int& height,
                                         int& channels) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw DataError("cannot open image '" + path + "'");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("libpng: failed to allocate read struct");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("libpng: failed to allocate info struct");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("failed to decode PNG '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    const png_byte color_type = png_get_color_type(png, info);
    const png_byte bit_depth = png_get_bit_depth(png, info);

    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_read_update_info(png, info);

    channels = static_cast<int>(png_get_channels(png, info));
    const std::size_t row_bytes = png_get_rowbytes(png, info);
    std::vector<std::uint8_t> bytes(row_bytes * height);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y) rows[y] = bytes.data() + row_bytes * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return bytes;
}

} // namespace

Image load_png(const std::string& path, bool srgb) {
    int width, height, channels;
    const std::vector<std::uint8_t> bytes = read_png_bytes(path, width, height, channels);

    const int out_channels = channels >= 3 ? 3 : 1;
    Image image(width, height, out_channels);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const std::uint8_t* px = bytes.data() + (static_cast<std::size_t>(y) * width + x) * channels;
            for (int c = 0; c < out_channels; ++c) {
                const double v = px[c] / 255.0;
                image.at(x, y, c) = srgb ? srgb_to_linear(v) : v;
            }
        }
    }
    return image;
}

void save_png(const Image& image, const std::string& path, bool srgb) {
    if (image.channels != 1 && image.channels != 3) {
        throw DataError("save_png supports 1 or 3 channels, got " + std::to_string(image.channels));
    }
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw DataError("cannot write image '" + path + "'");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("libpng: failed to allocate write struct");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("libpng: failed to allocate info struct");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("failed to encode PNG '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, image.width, image.height, 8,
                 image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<std::uint8_t> row(static_cast<std::size_t>(image.width) * image.channels);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            for (int c = 0; c < image.channels; ++c) {
                double v = image.at(x, y, c);
                if (srgb) v = linear_to_srgb(v);
                v = std::min(std::max(v, 0.0), 1.0);
                row[static_cast<std::size_t>(x) * image.channels + c] =
                    static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

std::vector<std::uint8_t> load_mask_png(const std::string& path, int expect_w, int expect_h) {
    int width, height, channels;
    const std::vector<std::uint8_t> bytes = read_png_bytes(path, width, height, channels);
    if (width != expect_w || height != expect_h) {
        throw DataError("mask '" + path + "' is " + std::to_string(width) + "x" +
                        std::to_string(height) + " but the frame is " + std::to_string(expect_w) +
                        "x" + std::to_string(expect_h));
    }
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(width) * height);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = bytes[i * channels] != 0 ? 1 : 0;
    }
    return mask;
}

Image load_npy(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open array file '" + path + "'");
    char magic[6];
    in.read(magic, 6);
    if (!in || std::memcmp(magic, "\x93NUMPY", 6) != 0) {
        throw DataError("'" + path + "' is not an NPY file");
    }
    std::uint8_t version[2];
    in.read(reinterpret_cast<char*>(version), 2);
    std::uint16_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), 2);
    std::string header(header_len, '\0');
    in.read(header.data(), header_len);
    if (!in) throw DataError("truncated NPY header in '" + path + "'");

    if (header.find("'<f4'") == std::string::npos) {
        throw DataError("NPY '" + path + "' must be little-endian float32");
    }
    if (header.find("'fortran_order': False") == std::string::npos) {
        throw DataError("NPY '" + path + "' must be C-contiguous");
    }
    const auto shape_pos = header.find("'shape':");
    const auto open = header.find('(', shape_pos);
    const auto close = header.find(')', open);
    if (shape_pos == std::string::npos || open == std::string::npos || close == std::string::npos) {
        throw DataError("malformed NPY header in '" + path + "'");
    }
    std::vector<std::size_t> shape;
    std::string dims = header.substr(open + 1, close - open - 1);
    for (std::size_t start = 0; start < dims.size();) {
        const auto comma = dims.find(',', start);
        const std::string token = dims.substr(start, comma == std::string::npos ? std::string::npos
                                                                                : comma - start);
        if (token.find_first_of("0123456789") != std::string::npos) {
            shape.push_back(std::stoull(token));
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (shape.size() != 2 && shape.size() != 3) {
        throw DataError("NPY '" + path + "' must have shape (H, W) or (H, W, C)");
    }
    const int h = static_cast<int>(shape[0]);
    const int w = static_cast<int>(shape[1]);
    const int c = shape.size() == 3 ? static_cast<int>(shape[2]) : 1;

    Image image(w, h, c);
    std::vector<float> buffer(image.data.size());
    in.read(reinterpret_cast<char*>(buffer.data()),
            static_cast<std::streamsize>(buffer.size() * sizeof(float)));
    if (!in) throw DataError("truncated NPY payload in '" + path + "'");
    for (std::size_t i = 0; i < buffer.size(); ++i) image.data[i] = buffer[i];
    return image;
}

void save_npy(const Image& image, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write array file '" + path + "'");
    std::string shape = "(" + std::to_string(image.height) + ", " + std::to_string(image.width);
    if (image.channels > 1) shape += ", " + std::to_string(image.channels);
    else shape += ",";
    shape += ")";
    std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': " + shape + ", }";
    // Pad so that the total header block is a multiple of 64 bytes.
    const std::size_t unpadded = 10 + header.size() + 1;
    header.append((64 - unpadded % 64) % 64, ' ');
    header.push_back('\n');

    out.write("\x93NUMPY", 6);
    const std::uint8_t version[2] = {1, 0};
    out.write(reinterpret_cast<const char*>(version), 2);
    const std::uint16_t header_len = static_cast<std::uint16_t>(header.size());
    out.write(reinterpret_cast<const char*>(&header_len), 2);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));

    std::vector<float> buffer(image.data.size());
    for (std::size_t i = 0; i < buffer.size(); ++i) buffer[i] = static_cast<float>(image.data[i]);
    out.write(reinterpret_cast<const char*>(buffer.data()),
              static_cast<std::streamsize>(buffer.size() * sizeof(float)));
    if (!out) throw DataError("failed while writing '" + path + "'");
}

} // namespace msplat
