// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#include "msplat/deformation.hpp"

#include <algorithm>
#include <cmath>

namespace msplat {

std::vector<Vec3> DeformationField::apply(const TriMesh& mesh) const {
    if (weights.size() != mesh.vertex_count()) {
        throw DataError("deformation field weights were not built for this mesh");
    }
    std::vector<Vec3> out(mesh.vertex_count());
#pragma omp parallel for schedule(static)
    for (std::int64_t v = 0; v < static_cast<std::int64_t>(mesh.vertex_count()); ++v) {
        Vec3 displacement = Vec3::Zero();
        for (const auto& [slot, w] : weights[v]) {
            displacement += w * deltas[slot];
        }
        out[v] = mesh.vertices[v] + displacement;
    }
    return out;
}

std::vector<Vec3> DeformationField::apply_backward(const std::vector<Vec3>& upstream) const {
    if (upstream.size() != weights.size()) {
        throw DataError("apply_backward: upstream gradient count does not match the mesh");
    }
    std::vector<Vec3> grads(deltas.size(), Vec3::Zero());
    for (std::size_t v = 0; v < weights.size(); ++v) {
        for (const auto& [slot, w] : weights[v]) {
            grads[slot] += w * upstream[v];
        }
    }
    return grads;
}

bool VisibilitySet::vertex_visible(std::uint32_t v) const {
    return std::binary_search(visible_vertices.begin(), visible_vertices.end(), v);
}

VisibilitySet visibility_to_vertices(const std::vector<std::uint32_t>& visible,
                                     const std::vector<RiggedGaussian>& gaussians,
                                     const TriMesh& mesh) {
    VisibilitySet out;
    out.visible_gaussians = visible;
    std::sort(out.visible_gaussians.begin(), out.visible_gaussians.end());
    out.visible_gaussians.erase(
        std::unique(out.visible_gaussians.begin(), out.visible_gaussians.end()),
        out.visible_gaussians.end());
    for (std::uint32_t gi : out.visible_gaussians) {
        if (gi >= gaussians.size()) throw DataError("visibility_to_vertices: Gaussian index out of range");
        const auto& tri = mesh.faces[gaussians[gi].parent_face];
        out.visible_vertices.push_back(tri[0]);
        out.visible_vertices.push_back(tri[1]);
        out.visible_vertices.push_back(tri[2]);
    }
    std::sort(out.visible_vertices.begin(), out.visible_vertices.end());
    out.visible_vertices.erase(std::unique(out.visible_vertices.begin(), out.visible_vertices.end()),
                               out.visible_vertices.end());
    return out;
}

std::vector<std::uint32_t> select_anchors(const VisibilitySet& vis, std::uint32_t k,
                                          std::uint64_t seed) {
    const std::uint32_t n = static_cast<std::uint32_t>(vis.visible_vertices.size());
    if (k > n) {
        throw ConfigError("select_anchors: requested " + std::to_string(k) + " anchors but only " +
                          std::to_string(n) + " vertices are visible");
    }
    if (k == 0) warn("select_anchors: k = 0 produces an empty deformation field");
    Rng rng(seed);
    const std::vector<std::uint32_t> picks = sample_without_replacement(n, k, rng);
    std::vector<std::uint32_t> anchors(k);
    for (std::uint32_t i = 0; i < k; ++i) anchors[i] = vis.visible_vertices[picks[i]];
    return anchors;
}

namespace {

double kernel_value(DeformationKernel kernel, double distance, double radius) {
    if (distance >= radius) return 0.0;
    const double x = distance / radius;
    if (kernel == DeformationKernel::Wendland) return wendland_c2(x);
    // Shepard-style inverse distance squared with compact support.
    constexpr double kEps = 1e-6;
    const double shape = (1.0 - x) / (x + kEps);
    return shape * shape;
}

} // namespace

DeformationField build_field(const TriMesh& mesh, std::vector<std::uint32_t> anchors,
                             double support_radius, DeformationKernel kernel) {
    if (anchors.empty()) throw ConfigError("build_field: anchor list is empty");
    if (support_radius <= 0.0) throw ConfigError("build_field: support radius must be positive");
    {
        std::vector<std::uint32_t> check = anchors;
        std::sort(check.begin(), check.end());
        if (std::adjacent_find(check.begin(), check.end()) != check.end()) {
            throw DataError("build_field: duplicate anchor ids");
        }
        if (check.back() >= mesh.vertex_count()) {
            throw DataError("build_field: anchor id out of range");
        }
    }

    DeformationField field;
    field.anchor_ids = std::move(anchors);
    field.deltas.assign(field.anchor_ids.size(), Vec3::Zero());
    field.support_radius = support_radius;
    field.kernel = kernel;
    field.weights.resize(mesh.vertex_count());

#pragma omp parallel for schedule(static)
    for (std::int64_t v = 0; v < static_cast<std::int64_t>(mesh.vertex_count()); ++v) {
        auto& row = field.weights[v];
        double total = 0.0;
        for (std::uint32_t slot = 0; slot < field.anchor_ids.size(); ++slot) {
            const double dist = (mesh.vertices[v] - mesh.vertices[field.anchor_ids[slot]]).norm();
            const double phi = kernel_value(kernel, dist, support_radius);
            if (phi > 0.0) {
                row.emplace_back(slot, phi);
                total += phi;
            }
        }
        for (auto& [slot, w] : row) w /= total;
    }
    return field;
}

PenaltyResult neighbor_relative_penalty(const TriMesh& ref, const Adjacency& adj,
                                        const std::vector<Vec3>& deformed) {
    if (deformed.size() != ref.vertex_count()) {
        throw DataError("neighbor_relative_penalty: position count does not match the mesh");
    }
    PenaltyResult out;
    out.vertex_grads.assign(ref.vertex_count(), Vec3::Zero());
    std::vector<double> energy_per_vertex(ref.vertex_count(), 0.0);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(ref.vertex_count()); ++i) {
        Vec3 g = Vec3::Zero();
        double e = 0.0;
        for (std::uint32_t j : adj.neighbors[i]) {
            const Vec3 residual = (deformed[i] - deformed[j]) - (ref.vertices[i] - ref.vertices[j]);
            e += residual.squaredNorm();
            // Both directed edges (i,j) and (j,i) contribute to vertex i.
            g += 4.0 * residual;
        }
        out.vertex_grads[i] = g;
        energy_per_vertex[i] = e;
    }
    // Summed in vertex order so the result is thread-count independent.
    for (double e : energy_per_vertex) out.energy += e;
    return out;
}

PenaltyResult invisible_penalty(const VisibilitySet& vis, const TriMesh& ref,
                                const std::vector<Vec3>& deformed) {
    if (deformed.size() != ref.vertex_count()) {
        throw DataError("invisible_penalty: position count does not match the mesh");
    }
    PenaltyResult out;
    out.vertex_grads.assign(ref.vertex_count(), Vec3::Zero());
    double energy = 0.0;
    for (std::size_t v = 0; v < ref.vertex_count(); ++v) {
        if (vis.vertex_visible(static_cast<std::uint32_t>(v))) continue;
        const Vec3 displacement = deformed[v] - ref.vertices[v];
        energy += displacement.squaredNorm();
        out.vertex_grads[v] = 2.0 * displacement;
    }
    out.energy = energy;
    return out;
}

} // namespace msplat
