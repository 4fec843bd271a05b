// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msplat/rigging.hpp"
#include "msplat/trimesh.hpp"

namespace msplat {

enum class DeformationKernel : std::uint8_t { Wendland = 0, InverseDistanceP2 = 1 };

// Sparse anchor-vertex deformation field. Every vertex carries a normalized
// nonnegative weight row over the anchors whose support reaches it; vertices
// outside all supports have an empty row and never move.
struct DeformationField {
    std::vector<std::uint32_t> anchor_ids;
    std::vector<Vec3> deltas; // mm, learnable
    double support_radius = 0.0;
    DeformationKernel kernel = DeformationKernel::Wendland;
    // Per-vertex rows of (anchor slot, weight); weights of a nonempty row sum to 1.
    std::vector<std::vector<std::pair<std::uint32_t, double>>> weights;

    std::size_t anchor_count() const { return anchor_ids.size(); }

    std::vector<Vec3> apply(const TriMesh& mesh) const;

    // Exact adjoint of the linear part of apply:
    // d_delta_k = sum_v w_k(v) * upstream_v.
    std::vector<Vec3> apply_backward(const std::vector<Vec3>& upstream) const;
};

struct VisibilitySet {
    std::vector<std::uint32_t> visible_vertices;  // sorted, unique
    std::vector<std::uint32_t> visible_gaussians; // sorted, unique

    bool vertex_visible(std::uint32_t v) const;
};

// Union of the three parent-face vertices of every visible Gaussian.
VisibilitySet visibility_to_vertices(const std::vector<std::uint32_t>& visible,
                                     const std::vector<RiggedGaussian>& gaussians,
                                     const TriMesh& mesh);

// k distinct vertices sampled uniformly without replacement from the
// visible set; deterministic given the seed.
std::vector<std::uint32_t> select_anchors(const VisibilitySet& vis, std::uint32_t k,
                                          std::uint64_t seed);

// Builds normalized kernel weight rows for all mesh vertices.
DeformationField build_field(const TriMesh& mesh, std::vector<std::uint32_t> anchors,
                             double support_radius, DeformationKernel kernel);

struct PenaltyResult {
    double energy = 0.0;             // mm^2
    std::vector<Vec3> vertex_grads;  // d energy / d deformed position
};

// E_rel = sum over directed edges ||(v'_i - v'_j) - (v_i - v_j)||^2.
PenaltyResult neighbor_relative_penalty(const TriMesh& ref, const Adjacency& adj,
                                        const std::vector<Vec3>& deformed);

// E_vis = sum over invisible vertices ||v' - v||^2; the per-delta gradient
// is obtained by chaining vertex_grads through apply_backward.
PenaltyResult invisible_penalty(const VisibilitySet& vis, const TriMesh& ref,
                                const std::vector<Vec3>& deformed);

} // namespace msplat
