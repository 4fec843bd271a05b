// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msplat/trimesh.hpp"

namespace msplat {

enum class EdgeWeighting { Cotangent, Uniform };

// Symmetric per-edge weights stored as rows aligned with Adjacency::neighbors.
struct EdgeWeights {
    std::vector<std::vector<double>> rows;

    double weight(const Adjacency& adj, std::uint32_t i, std::uint32_t j) const;
};

// w(i,j) = max(0, 1/2 (cot a_ij + cot b_ij)); boundary edges use the single
// available cotangent. Nonnegative and symmetric by construction.
EdgeWeights cotangent_weights(const TriMesh& mesh, const Adjacency& adj);

// w(i,j) = 1 for every edge.
EdgeWeights uniform_weights(const TriMesh& mesh, const Adjacency& adj);

EdgeWeights edge_weights(const TriMesh& mesh, const Adjacency& adj, EdgeWeighting scheme);

// Per-vertex rotations fitted by SVD plus the total energy
//   E = sum_i sum_j w_ij || (v'_i - v'_j) - R_i (v_i - v_j) ||^2
// over directed edges.
struct ArapState {
    std::vector<Mat3> rotations;
    double energy = 0.0;
};

// Fits R_i minimizing the local covariance misfit, with the smallest-
// singular-value column negated when the best fit is a reflection.
// A vertex with zero total edge weight gets the identity and a warning.
ArapState arap_fit_rotations(const TriMesh& ref, const Adjacency& adj, const EdgeWeights& weights,
                             const std::vector<Vec3>& deformed);

// Gradient of the energy w.r.t. deformed positions with rotations held fixed:
//   grad_i = sum_j 4 w_ij ((v'_i - v'_j) - 1/2 (R_i + R_j)(v_i - v_j))
std::vector<Vec3> arap_gradient(const TriMesh& ref, const Adjacency& adj, const EdgeWeights& weights,
                                const std::vector<Vec3>& deformed, const ArapState& state);

} // namespace msplat
