// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msplat/trimesh.hpp"

namespace msplat {

// A Gaussian bound to a parent mesh face. The mean lives in the face via
// barycentric coordinates; orientation follows the face frame; the scale
// normal to the face is frozen at a fraction of init_scale.
struct RiggedGaussian {
    std::uint32_t parent_face = 0;
    Vec3 bary = Vec3(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0);
    Vec2 log_scale_uv = Vec2::Zero(); // log of in-plane stddevs relative to mm
    double opacity_logit = 0.0;
    std::vector<double> sh_coeffs;  // 3 * (degree+1)^2, channel-major per band
    double init_scale = 1.0;        // mm, frozen at rigging time
};

struct WorldGaussian {
    Vec3 mean = Vec3::Zero();
    Mat3 rotation = Mat3::Identity(); // column 2 = face normal
    Vec3 scales = Vec3::Ones();       // mm; scales[2] is the fixed normal scale
    double opacity = 0.5;
    const double* sh_coeffs = nullptr; // borrowed from the rigged Gaussian
    std::size_t sh_count = 0;
};

struct RiggingConfig {
    int gaussians_per_face = 1;
    double scale_cap_factor = 2.0;       // kappa
    double normal_scale_fraction = 0.05; // sigma_n = fraction * init_scale
    int sh_degree = 0;                   // 0..3
    bool rotation_gradient = true;       // vertex gradients through the face frame
};

inline std::size_t sh_coeff_count(int degree) {
    return 3u * static_cast<std::size_t>((degree + 1) * (degree + 1));
}

// One Gaussian per face at the centroid, extra ones at seeded-random simplex
// points. init_scale = 1/2 sqrt(face area); opacity starts at 0.5 and color
// at mid-gray (zero DC offset under the renderer's 0.5 + C0*dc convention).
std::vector<RiggedGaussian> rig(const TriMesh& mesh, const RiggingConfig& config, std::uint64_t seed);

// Realizes world-space parameters against deformed vertex positions.
WorldGaussian realize(const RiggedGaussian& g, const TriMesh& mesh,
                      const std::vector<Vec3>& positions, const RiggingConfig& config);

// Upstream gradients w.r.t. the world-space parameters.
struct WorldGaussianGrad {
    Vec3 d_mean = Vec3::Zero();
    Mat3 d_rotation = Mat3::Zero();
    Vec3 d_scales = Vec3::Zero();
    double d_opacity = 0.0;
    std::vector<double> d_sh;
};

struct RiggedGaussianGrad {
    Vec3 d_bary = Vec3::Zero();
    Vec2 d_log_scale_uv = Vec2::Zero();
    double d_opacity_logit = 0.0;
    std::vector<double> d_sh;
    // Gradients for the three deformed parent-face vertices, in face order.
    Vec3 d_vertex[3] = {Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
};

// Chain rule through realize(). The rotation pathway (face frame as a
// function of the vertices) is included unless config.rotation_gradient
// is off. scales[2] is constant, so its upstream gradient is dropped.
RiggedGaussianGrad realize_backward(const RiggedGaussian& g, const TriMesh& mesh,
                                    const std::vector<Vec3>& positions,
                                    const WorldGaussianGrad& upstream, const RiggingConfig& config);

// Projects bary onto the probability simplex and clamps log_scale_uv to
// [log(init/kappa), log(kappa*init)]. Idempotent.
void project_constraints(RiggedGaussian& g, double kappa);

} // namespace msplat
