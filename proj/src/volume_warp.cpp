// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#include "msplat/volume_warp.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace msplat {

namespace {

// Integer cell key for a hash grid with cell size = influence radius.
std::int64_t cell_key(int cx, int cy, int cz) {
    // Offset into non-negative range; grids are far smaller than 2^20 cells.
    const std::int64_t bias = 1 << 20;
    return ((cx + bias) << 42) | ((cy + bias) << 21) | (cz + bias);
}

struct VertexHash {
    double cell_size;
    std::unordered_map<std::int64_t, std::vector<std::uint32_t>> cells;

    VertexHash(const std::vector<Vec3>& points, double size) : cell_size(size) {
        for (std::uint32_t i = 0; i < points.size(); ++i) {
            cells[key_of(points[i])].push_back(i);
        }
    }
    std::int64_t key_of(const Vec3& p) const {
        return cell_key(static_cast<int>(std::floor(p[0] / cell_size)),
                        static_cast<int>(std::floor(p[1] / cell_size)),
                        static_cast<int>(std::floor(p[2] / cell_size)));
    }
    // Visits candidate vertex indices from the 27 neighboring cells in
    // fixed cell-then-insertion order.
    template <typename F>
    void visit(const Vec3& p, F&& f) const {
        const int cx = static_cast<int>(std::floor(p[0] / cell_size));
        const int cy = static_cast<int>(std::floor(p[1] / cell_size));
        const int cz = static_cast<int>(std::floor(p[2] / cell_size));
        for (int dz = -1; dz <= 1; ++dz) {
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const auto it = cells.find(cell_key(cx + dx, cy + dy, cz + dz));
                    if (it == cells.end()) continue;
                    for (std::uint32_t v : it->second) f(v);
                }
            }
        }
    }
};

Vec3 sample_displacement(const DisplacementGrid& disp, const Vec3& idx) {
    // Border-replicate trilinear sampling in index space.
    const auto clampd = [](double x, double lo, double hi) { return std::min(std::max(x, lo), hi); };
    const double fx = clampd(idx[0], 0.0, disp.geom.dims[0] - 1.0);
    const double fy = clampd(idx[1], 0.0, disp.geom.dims[1] - 1.0);
    const double fz = clampd(idx[2], 0.0, disp.geom.dims[2] - 1.0);
    const int x0 = std::min(static_cast<int>(fx), disp.geom.dims[0] - 1);
    const int y0 = std::min(static_cast<int>(fy), disp.geom.dims[1] - 1);
    const int z0 = std::min(static_cast<int>(fz), disp.geom.dims[2] - 1);
    const int x1 = std::min(x0 + 1, disp.geom.dims[0] - 1);
    const int y1 = std::min(y0 + 1, disp.geom.dims[1] - 1);
    const int z1 = std::min(z0 + 1, disp.geom.dims[2] - 1);
    const double tx = fx - x0, ty = fy - y0, tz = fz - z0;

    const auto at = [&](int i, int j, int k) { return disp.values[disp.geom.flatten(i, j, k)]; };
    const Vec3 c00 = at(x0, y0, z0) + tx * (at(x1, y0, z0) - at(x0, y0, z0));
    const Vec3 c10 = at(x0, y1, z0) + tx * (at(x1, y1, z0) - at(x0, y1, z0));
    const Vec3 c01 = at(x0, y0, z1) + tx * (at(x1, y0, z1) - at(x0, y0, z1));
    const Vec3 c11 = at(x0, y1, z1) + tx * (at(x1, y1, z1) - at(x0, y1, z1));
    const Vec3 c0 = c00 + ty * (c10 - c00);
    const Vec3 c1 = c01 + ty * (c11 - c01);
    return c0 + tz * (c1 - c0);
}

} // namespace

DisplacementGrid scatter_displacements(const TriMesh& ref_mesh, const std::vector<Vec3>& deformed,
                                       const GridGeometry& geometry, double influence_radius) {
    geometry.validate();
    if (deformed.size() != ref_mesh.vertex_count()) {
        throw DataError("scatter_displacements: deformed position count does not match the mesh");
    }
    if (influence_radius <= 0.0) throw ConfigError("scatter_displacements: radius must be positive");

    DisplacementGrid grid;
    grid.geom = geometry;
    grid.values.assign(geometry.voxel_count(), Vec3::Zero());

    const VertexHash hash(ref_mesh.vertices, influence_radius);

#pragma omp parallel for schedule(static)
    for (std::int64_t k = 0; k < geometry.dims[2]; ++k) {
        for (int j = 0; j < geometry.dims[1]; ++j) {
            for (int i = 0; i < geometry.dims[0]; ++i) {
                const Vec3 x = geometry.world_at(i, static_cast<int>(j), static_cast<int>(k));
                Vec3 weighted = Vec3::Zero();
                double total = 0.0;
                hash.visit(x, [&](std::uint32_t v) {
                    const double dist = (x - ref_mesh.vertices[v]).norm();
                    const double phi = wendland_c2(dist / influence_radius);
                    if (phi > 0.0) {
                        weighted += phi * (deformed[v] - ref_mesh.vertices[v]);
                        total += phi;
                    }
                });
                if (total > 0.0) {
                    grid.values[geometry.flatten(i, j, static_cast<int>(k))] = weighted / total;
                }
            }
        }
    }
    return grid;
}

VolumeGrid warp_volume(const VolumeGrid& volume, const DisplacementGrid& disp,
                       std::optional<float> fill, WarpStats* stats) {
    if (!volume.geom.matches(disp.geom)) {
        throw DataError("warp_volume: displacement grid geometry does not match the volume");
    }
    const GridGeometry& geom = volume.geom;
    const float fill_value = fill.value_or(volume.min_value());
    const double tolerance = 0.01 * geom.spacing.minCoeff();
    constexpr int kMaxInversionIters = 20;

    VolumeGrid out;
    out.geom = geom;
    out.values.assign(geom.voxel_count(), fill_value);

    std::vector<std::uint8_t> converged_flags(geom.voxel_count(), 1);
    std::vector<std::uint8_t> support_flags(geom.voxel_count(), 0);

#pragma omp parallel for schedule(static)
    for (std::int64_t k = 0; k < geom.dims[2]; ++k) {
        for (int j = 0; j < geom.dims[1]; ++j) {
            for (int i = 0; i < geom.dims[0]; ++i) {
                const std::size_t voxel = geom.flatten(i, j, static_cast<int>(k));
                const Vec3 idx(static_cast<double>(i), static_cast<double>(j),
                               static_cast<double>(k));

                // Fixed-point inversion of the forward field at this voxel:
                // solve d_inv = d(x - d_inv) in index space.
                Vec3 d_inv = disp.values[voxel];
                if (d_inv.squaredNorm() != 0.0) support_flags[voxel] = 1;
                bool converged = false;
                for (int it = 0; it < kMaxInversionIters; ++it) {
                    const Vec3 probe = idx - geom.index_offset(d_inv);
                    const Vec3 next = sample_displacement(disp, probe);
                    const double change = (next - d_inv).norm();
                    d_inv = next;
                    if (change <= tolerance) {
                        converged = true;
                        break;
                    }
                }
                if (!converged) converged_flags[voxel] = 0;

                const Vec3 sample_idx = idx - geom.index_offset(d_inv);
                if (sample_idx[0] < 0.0 || sample_idx[0] > geom.dims[0] - 1.0 ||
                    sample_idx[1] < 0.0 || sample_idx[1] > geom.dims[1] - 1.0 ||
                    sample_idx[2] < 0.0 || sample_idx[2] > geom.dims[2] - 1.0) {
                    continue; // fill value stays
                }
                // Trilinear sample of the input volume.
                const int x0 = std::min(static_cast<int>(sample_idx[0]), geom.dims[0] - 1);
                const int y0 = std::min(static_cast<int>(sample_idx[1]), geom.dims[1] - 1);
                const int z0 = std::min(static_cast<int>(sample_idx[2]), geom.dims[2] - 1);
                const int x1 = std::min(x0 + 1, geom.dims[0] - 1);
                const int y1 = std::min(y0 + 1, geom.dims[1] - 1);
                const int z1 = std::min(z0 + 1, geom.dims[2] - 1);
                const double tx = sample_idx[0] - x0;
                const double ty = sample_idx[1] - y0;
                const double tz = sample_idx[2] - z0;
                const auto at = [&](int a, int b, int c) {
                    return static_cast<double>(volume.values[geom.flatten(a, b, c)]);
                };
                const double c00 = at(x0, y0, z0) + tx * (at(x1, y0, z0) - at(x0, y0, z0));
                const double c10 = at(x0, y1, z0) + tx * (at(x1, y1, z0) - at(x0, y1, z0));
                const double c01 = at(x0, y0, z1) + tx * (at(x1, y0, z1) - at(x0, y0, z1));
                const double c11 = at(x0, y1, z1) + tx * (at(x1, y1, z1) - at(x0, y1, z1));
                const double c0 = c00 + ty * (c10 - c00);
                const double c1 = c01 + ty * (c11 - c01);
                out.values[voxel] = static_cast<float>(c0 + tz * (c1 - c0));
            }
        }
    }

    WarpStats local;
    for (std::size_t v = 0; v < geom.voxel_count(); ++v) {
        if (support_flags[v]) {
            ++local.in_support;
            if (!converged_flags[v]) ++local.non_converged;
        }
    }
    if (local.in_support > 0 &&
        static_cast<double>(local.non_converged) > 0.01 * static_cast<double>(local.in_support)) {
        warn("warp_volume: fixed-point inversion failed to converge on " +
             std::to_string(local.non_converged) + " of " + std::to_string(local.in_support) +
             " in-support voxels");
    }
    if (stats) *stats = local;
    return out;
}

SliceResult extract_slice(const VolumeGrid& volume, SlicePlane plane, int index, double window_lo,
                          double window_hi) {
    const auto& dims = volume.geom.dims;
    int axis = 0;
    switch (plane) {
        case SlicePlane::Sagittal: axis = 0; break;
        case SlicePlane::Coronal: axis = 1; break;
        case SlicePlane::Axial: axis = 2; break;
    }
    if (index < 0 || index >= dims[axis]) {
        throw ConfigError("extract_slice: index " + std::to_string(index) +
                          " out of range for axis with " + std::to_string(dims[axis]) + " voxels");
    }
    SliceResult out;
    if (window_lo == window_hi) {
        out.window_lo = volume.min_value();
        out.window_hi = volume.max_value();
        if (out.window_lo == out.window_hi) out.window_hi = out.window_lo + 1.0;
    } else {
        out.window_lo = window_lo;
        out.window_hi = window_hi;
    }

    const int u_axis = axis == 0 ? 1 : 0;
    const int v_axis = axis == 2 ? 1 : 2;
    out.image = Image(dims[u_axis], dims[v_axis], 1);
    const double scale = 1.0 / (out.window_hi - out.window_lo);
    for (int v = 0; v < dims[v_axis]; ++v) {
        for (int u = 0; u < dims[u_axis]; ++u) {
            int ijk[3];
            ijk[axis] = index;
            ijk[u_axis] = u;
            ijk[v_axis] = v;
            const double value = volume.values[volume.geom.flatten(ijk[0], ijk[1], ijk[2])];
            out.image.at(u, v, 0) = std::min(std::max((value - out.window_lo) * scale, 0.0), 1.0);
        }
    }
    return out;
}

} // namespace msplat
