// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#include "msplat/rigging.hpp"

#include <cmath>

namespace msplat {

std::vector<RiggedGaussian> rig(const TriMesh& mesh, const RiggingConfig& config, std::uint64_t seed) {
    if (mesh.face_count() == 0) throw DataError("rig: mesh has no faces");
    if (config.gaussians_per_face < 1) throw ConfigError("rig: gaussians_per_face must be >= 1");
    if (config.sh_degree < 0 || config.sh_degree > 3) throw ConfigError("rig: sh_degree must be in [0, 3]");
    mesh.validate();

    Rng rng(seed);
    const std::size_t sh_n = sh_coeff_count(config.sh_degree);
    std::vector<RiggedGaussian> gaussians;
    gaussians.reserve(mesh.face_count() * static_cast<std::size_t>(config.gaussians_per_face));
    for (std::uint32_t f = 0; f < mesh.face_count(); ++f) {
        const double init_scale = 0.5 * std::sqrt(mesh.face_area(f));
        for (int k = 0; k < config.gaussians_per_face; ++k) {
            RiggedGaussian g;
            g.parent_face = f;
            if (k == 0) {
                g.bary = Vec3(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0);
            } else {
                double u = rng.uniform();
                double v = rng.uniform();
                if (u + v > 1.0) {
                    u = 1.0 - u;
                    v = 1.0 - v;
                }
                g.bary = Vec3(1.0 - u - v, u, v);
            }
            g.log_scale_uv = Vec2(std::log(init_scale), std::log(init_scale));
            g.opacity_logit = 0.0;
            g.sh_coeffs.assign(sh_n, 0.0);
            g.init_scale = init_scale;
            gaussians.push_back(std::move(g));
        }
    }
    return gaussians;
}

WorldGaussian realize(const RiggedGaussian& g, const TriMesh& mesh,
                      const std::vector<Vec3>& positions, const RiggingConfig& config) {
    const auto& tri = mesh.faces[g.parent_face];
    WorldGaussian w;
    w.mean = g.bary[0] * positions[tri[0]] + g.bary[1] * positions[tri[1]] +
             g.bary[2] * positions[tri[2]];
    w.rotation = face_frame(mesh, positions, g.parent_face).rotation;
    w.scales = Vec3(std::exp(g.log_scale_uv[0]), std::exp(g.log_scale_uv[1]),
                    config.normal_scale_fraction * g.init_scale);
    w.opacity = sigmoid(g.opacity_logit);
    w.sh_coeffs = g.sh_coeffs.data();
    w.sh_count = g.sh_coeffs.size();
    return w;
}

RiggedGaussianGrad realize_backward(const RiggedGaussian& g, const TriMesh& mesh,
                                    const std::vector<Vec3>& positions,
                                    const WorldGaussianGrad& upstream, const RiggingConfig& config) {
    const auto& tri = mesh.faces[g.parent_face];
    const Vec3& v0 = positions[tri[0]];
    const Vec3& v1 = positions[tri[1]];
    const Vec3& v2 = positions[tri[2]];

    RiggedGaussianGrad out;

    // Mean pathway: mean = sum_k b_k v_k is bilinear.
    out.d_bary = Vec3(v0.dot(upstream.d_mean), v1.dot(upstream.d_mean), v2.dot(upstream.d_mean));
    out.d_vertex[0] = g.bary[0] * upstream.d_mean;
    out.d_vertex[1] = g.bary[1] * upstream.d_mean;
    out.d_vertex[2] = g.bary[2] * upstream.d_mean;

    // Scale pathway: scales[0..1] = exp(log_scale_uv); scales[2] is frozen.
    out.d_log_scale_uv[0] = upstream.d_scales[0] * std::exp(g.log_scale_uv[0]);
    out.d_log_scale_uv[1] = upstream.d_scales[1] * std::exp(g.log_scale_uv[1]);

    const double opacity = sigmoid(g.opacity_logit);
    out.d_opacity_logit = upstream.d_opacity * opacity * (1.0 - opacity);

    out.d_sh = upstream.d_sh;
    out.d_sh.resize(g.sh_coeffs.size(), 0.0);

    // Rotation pathway: the frame columns are t = e1/|e1|, n = (e1 x e2)/|.|,
    // b = n x t with e1 = v1 - v0, e2 = v2 - v0.
    if (config.rotation_gradient && upstream.d_rotation.cwiseAbs().maxCoeff() != 0.0) {
        const Vec3 e1 = v1 - v0;
        const Vec3 e2 = v2 - v0;
        const Vec3 n_raw = e1.cross(e2);
        const double e1_len = e1.norm();
        const double n_len = n_raw.norm();
        const Vec3 t_hat = e1 / e1_len;
        const Vec3 n_hat = n_raw / n_len;

        const Vec3 g_t = upstream.d_rotation.col(0);
        const Vec3 g_b = upstream.d_rotation.col(1);
        const Vec3 g_n = upstream.d_rotation.col(2);

        // b = n x t folds into the tangent and normal gradients.
        const Vec3 total_t = g_t + g_b.cross(n_hat);
        const Vec3 total_n = g_n + t_hat.cross(g_b);

        // Normalization Jacobians (I - uu^T)/|u|.
        const Vec3 d_e1_from_t = (total_t - t_hat * t_hat.dot(total_t)) / e1_len;
        const Vec3 d_n_raw = (total_n - n_hat * n_hat.dot(total_n)) / n_len;

        // n_raw = e1 x e2: d/de1^T g = e2 x g, d/de2^T g = g x e1.
        const Vec3 d_e1 = d_e1_from_t + e2.cross(d_n_raw);
        const Vec3 d_e2 = d_n_raw.cross(e1);

        out.d_vertex[0] += -d_e1 - d_e2;
        out.d_vertex[1] += d_e1;
        out.d_vertex[2] += d_e2;
    }
    return out;
}

void project_constraints(RiggedGaussian& g, double kappa) {
    g.bary = project_to_simplex(g.bary);
    const double lo = std::log(g.init_scale / kappa);
    const double hi = std::log(g.init_scale * kappa);
    for (int k = 0; k < 2; ++k) {
        g.log_scale_uv[k] = std::min(std::max(g.log_scale_uv[k], lo), hi);
    }
}

} // namespace msplat
