// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#include "msplat/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace msplat {

namespace {

constexpr char kMagic[8] = {'M', 'S', 'P', 'L', 'A', 'T', 'C', 'P'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kTagGaussians = 0x47415553; // 'GAUS'
constexpr std::uint32_t kTagField = 0x46454C44;     // 'FELD'

class Writer {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void f32(double v) {
        const float f = static_cast<float>(v);
        raw(&f, 4);
    }
    const std::vector<std::uint8_t>& bytes() const { return bytes_; }

private:
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        bytes_.insert(bytes_.end(), b, b + n);
    }
    std::vector<std::uint8_t> bytes_;
};

class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
    std::uint8_t u8() { return *take(1); }
    std::uint32_t u32() {
        std::uint32_t v;
        std::memcpy(&v, take(4), 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        std::memcpy(&v, take(8), 8);
        return v;
    }
    double f32() {
        float v;
        std::memcpy(&v, take(4), 4);
        return static_cast<double>(v);
    }
    std::size_t remaining() const { return size_ - pos_; }

private:
    const std::uint8_t* take(std::size_t n) {
        if (pos_ + n > size_) throw DataError("checkpoint payload truncated");
        const std::uint8_t* p = data_ + pos_;
        pos_ += n;
        return p;
    }
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    Writer gaus;
    gaus.u32(static_cast<std::uint32_t>(ckpt.gaussians.size()));
    const std::uint32_t sh_count =
        ckpt.gaussians.empty() ? 0 : static_cast<std::uint32_t>(ckpt.gaussians[0].sh_coeffs.size());
    gaus.u32(sh_count);
    for (const auto& g : ckpt.gaussians) gaus.u32(g.parent_face);
    for (const auto& g : ckpt.gaussians) {
        for (int k = 0; k < 3; ++k) gaus.f32(g.bary[k]);
    }
    for (const auto& g : ckpt.gaussians) {
        gaus.f32(g.log_scale_uv[0]);
        gaus.f32(g.log_scale_uv[1]);
    }
    for (const auto& g : ckpt.gaussians) gaus.f32(g.opacity_logit);
    for (const auto& g : ckpt.gaussians) gaus.f32(g.init_scale);
    for (const auto& g : ckpt.gaussians) {
        if (g.sh_coeffs.size() != sh_count) {
            throw DataError("checkpoint: inconsistent SH coefficient counts");
        }
        for (double c : g.sh_coeffs) gaus.f32(c);
    }

    Writer out;
    out.u32(kVersion);
    out.u32(ckpt.field ? 2 : 1);
    out.u32(kTagGaussians);
    out.u64(gaus.bytes().size());
    for (std::uint8_t b : gaus.bytes()) out.u8(b);

    if (ckpt.field) {
        Writer feld;
        const DeformationField& f = *ckpt.field;
        feld.u32(static_cast<std::uint32_t>(f.anchor_count()));
        feld.u8(static_cast<std::uint8_t>(f.kernel));
        feld.f32(f.support_radius);
        for (std::uint32_t id : f.anchor_ids) feld.u32(id);
        for (const Vec3& d : f.deltas) {
            for (int k = 0; k < 3; ++k) feld.f32(d[k]);
        }
        out.u32(kTagField);
        out.u64(feld.bytes().size());
        for (std::uint8_t b : feld.bytes()) out.u8(b);
    }

    std::ofstream file(path, std::ios::binary);
    if (!file) throw DataError("cannot write checkpoint '" + path + "'");
    file.write(kMagic, 8);
    file.write(reinterpret_cast<const char*>(out.bytes().data()),
               static_cast<std::streamsize>(out.bytes().size()));
    if (!file) throw DataError("failed while writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw DataError("cannot open checkpoint '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(file)),
                                    std::istreambuf_iterator<char>());
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
        throw DataError("'" + path + "' is not a checkpoint file");
    }
    Reader in(bytes.data() + 8, bytes.size() - 8);
    const std::uint32_t version = in.u32();
    if (version != kVersion) {
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint32_t n_sections = in.u32();

    Checkpoint ckpt;
    for (std::uint32_t s = 0; s < n_sections; ++s) {
        const std::uint32_t tag = in.u32();
        const std::uint64_t length = in.u64();
        if (length > in.remaining()) throw DataError("checkpoint section overruns the file");
        if (tag == kTagGaussians) {
            const std::uint32_t n = in.u32();
            const std::uint32_t sh_count = in.u32();
            ckpt.gaussians.assign(n, RiggedGaussian{});
            for (auto& g : ckpt.gaussians) g.parent_face = in.u32();
            for (auto& g : ckpt.gaussians) {
                for (int k = 0; k < 3; ++k) g.bary[k] = in.f32();
            }
            for (auto& g : ckpt.gaussians) {
                g.log_scale_uv[0] = in.f32();
                g.log_scale_uv[1] = in.f32();
            }
            for (auto& g : ckpt.gaussians) g.opacity_logit = in.f32();
            for (auto& g : ckpt.gaussians) g.init_scale = in.f32();
            for (auto& g : ckpt.gaussians) {
                g.sh_coeffs.resize(sh_count);
                for (std::uint32_t k = 0; k < sh_count; ++k) g.sh_coeffs[k] = in.f32();
            }
        } else if (tag == kTagField) {
            DeformationField f;
            const std::uint32_t n = in.u32();
            f.kernel = static_cast<DeformationKernel>(in.u8());
            f.support_radius = in.f32();
            f.anchor_ids.resize(n);
            for (auto& id : f.anchor_ids) id = in.u32();
            f.deltas.resize(n);
            for (auto& d : f.deltas) {
                for (int k = 0; k < 3; ++k) d[k] = in.f32();
            }
            ckpt.field = std::move(f);
        } else {
            throw DataError("unknown checkpoint section tag");
        }
    }
    return ckpt;
}

} // namespace msplat
