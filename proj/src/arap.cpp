// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#include "msplat/arap.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace msplat {

double EdgeWeights::weight(const Adjacency& adj, std::uint32_t i, std::uint32_t j) const {
    const auto& nb = adj.neighbors[i];
    const auto it = std::lower_bound(nb.begin(), nb.end(), j);
    if (it == nb.end() || *it != j) return 0.0;
    return rows[i][static_cast<std::size_t>(it - nb.begin())];
}

namespace {

// cot of the angle at vertex `apex` in triangle (apex, a, b).
double cot_at(const Vec3& apex, const Vec3& a, const Vec3& b) {
    const Vec3 u = a - apex;
    const Vec3 v = b - apex;
    const double cross_norm = u.cross(v).norm();
    if (cross_norm < 1e-300) return 0.0;
    return u.dot(v) / cross_norm;
}

std::size_t neighbor_slot(const Adjacency& adj, std::uint32_t i, std::uint32_t j) {
    const auto& nb = adj.neighbors[i];
    const auto it = std::lower_bound(nb.begin(), nb.end(), j);
    return static_cast<std::size_t>(it - nb.begin());
}

} // namespace

EdgeWeights cotangent_weights(const TriMesh& mesh, const Adjacency& adj) {
    EdgeWeights w;
    w.rows.resize(adj.neighbors.size());
    for (std::size_t i = 0; i < adj.neighbors.size(); ++i) {
        w.rows[i].assign(adj.neighbors[i].size(), 0.0);
    }
    // Accumulate 1/2 cot(opposite angle) per face onto both directed slots.
    for (const auto& tri : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            const std::uint32_t a = tri[k];
            const std::uint32_t b = tri[(k + 1) % 3];
            const std::uint32_t c = tri[(k + 2) % 3];
            const double half_cot = 0.5 * cot_at(mesh.vertices[c], mesh.vertices[a], mesh.vertices[b]);
            w.rows[a][neighbor_slot(adj, a, b)] += half_cot;
            w.rows[b][neighbor_slot(adj, b, a)] += half_cot;
        }
    }
    for (auto& row : w.rows) {
        for (double& value : row) value = std::max(value, 0.0);
    }
    return w;
}

EdgeWeights uniform_weights(const TriMesh& mesh, const Adjacency& adj) {
    (void)mesh;
    EdgeWeights w;
    w.rows.resize(adj.neighbors.size());
    for (std::size_t i = 0; i < adj.neighbors.size(); ++i) {
        w.rows[i].assign(adj.neighbors[i].size(), 1.0);
    }
    return w;
}

EdgeWeights edge_weights(const TriMesh& mesh, const Adjacency& adj, EdgeWeighting scheme) {
    return scheme == EdgeWeighting::Cotangent ? cotangent_weights(mesh, adj)
                                              : uniform_weights(mesh, adj);
}

ArapState arap_fit_rotations(const TriMesh& ref, const Adjacency& adj, const EdgeWeights& weights,
                             const std::vector<Vec3>& deformed) {
    if (deformed.size() != ref.vertex_count()) {
        throw DataError("arap_fit_rotations: deformed position count does not match mesh");
    }
    const std::size_t n = ref.vertex_count();
    ArapState state;
    state.rotations.resize(n, Mat3::Identity());

    std::size_t zero_weight_vertices = 0;
#pragma omp parallel for schedule(static) reduction(+ : zero_weight_vertices)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        const auto& nb = adj.neighbors[i];
        Mat3 cov = Mat3::Zero();
        double total_weight = 0.0;
        for (std::size_t s = 0; s < nb.size(); ++s) {
            const std::uint32_t j = nb[s];
            const double wij = weights.rows[i][s];
            total_weight += wij;
            const Vec3 e_ref = ref.vertices[i] - ref.vertices[j];
            const Vec3 e_def = deformed[i] - deformed[j];
            cov += wij * (e_ref * e_def.transpose());
        }
        if (total_weight <= 0.0) {
            ++zero_weight_vertices;
            continue; // identity stays
        }
        Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
        Mat3 v = svd.matrixV();
        const Mat3 u = svd.matrixU();
        Mat3 r = v * u.transpose();
        if (r.determinant() < 0.0) {
            v.col(2) = -v.col(2); // singular values are sorted descending
            r = v * u.transpose();
        }
        state.rotations[i] = r;
    }
    if (zero_weight_vertices > 0) {
        warn("arap_fit_rotations: " + std::to_string(zero_weight_vertices) +
             " vertices with zero total edge weight were assigned the identity rotation");
    }

    double energy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& nb = adj.neighbors[i];
        for (std::size_t s = 0; s < nb.size(); ++s) {
            const std::uint32_t j = nb[s];
            const Vec3 e_ref = ref.vertices[i] - ref.vertices[j];
            const Vec3 e_def = deformed[i] - deformed[j];
            energy += weights.rows[i][s] * (e_def - state.rotations[i] * e_ref).squaredNorm();
        }
    }
    state.energy = energy;
    return state;
}

std::vector<Vec3> arap_gradient(const TriMesh& ref, const Adjacency& adj, const EdgeWeights& weights,
                                const std::vector<Vec3>& deformed, const ArapState& state) {
    const std::size_t n = ref.vertex_count();
    std::vector<Vec3> grad(n, Vec3::Zero());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        const auto& nb = adj.neighbors[i];
        Vec3 g = Vec3::Zero();
        for (std::size_t s = 0; s < nb.size(); ++s) {
            const std::uint32_t j = nb[s];
            const double wij = weights.rows[i][s];
            const Vec3 e_ref = ref.vertices[i] - ref.vertices[j];
            const Vec3 e_def = deformed[i] - deformed[j];
            g += 4.0 * wij * (e_def - 0.5 * (state.rotations[i] + state.rotations[j]) * e_ref);
        }
        grad[i] = g;
    }
    return grad;
}

} // namespace msplat
