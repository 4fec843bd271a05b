// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msplat/camera.hpp"
#include "msplat/rigging.hpp"

namespace msplat {

// Compositing rules shared by the tiled renderer and its documentation:
//  - Gaussians are composited front to back in increasing view depth,
//    ties broken by input index.
//  - weight = min(0.99, opacity * exp(-q/2)) with q the screen-space
//    Mahalanobis distance squared; points with q > 9 and weights below
//    1/255 are skipped.
//  - Compositing stops once transmittance drops below 1e-7.
struct RenderOutput {
    Image image;                 // H x W x 3
    Image alpha;                 // H x W
    std::vector<double> contrib; // per-Gaussian accumulated weight*transmittance
};

struct ProjectedGaussian {
    bool culled = true;
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Zero();    // includes the 0.3 px^2 low-pass floor
    double depth = 0.0;           // view-space z, mm
};

// EWA projection of one Gaussian; culled when behind the 1 mm near plane or
// when the 3-sigma screen box misses the image.
ProjectedGaussian project(const WorldGaussian& g, const Camera& cam);

// Projects, depth-sorts and tile-bins once; forward and backward share it.
class RenderContext {
public:
    RenderContext(const std::vector<WorldGaussian>& gaussians, const Camera& cam, int sh_degree);

    RenderOutput forward(const Vec3& background) const;

    // Analytic gradients of sum(upstream .* image) w.r.t. every world-Gaussian
    // parameter. `upstream` must be H x W x 3 (masked pixels simply carry
    // zero upstream gradient).
    std::vector<WorldGaussianGrad> backward(const Vec3& background, const Image& upstream) const;

private:
    struct Splat {
        std::uint32_t index;  // position in the input list
        Vec2 mean2d;
        Mat2 cov2d;
        Mat2 cov2d_inv;
        double depth;
        double opacity;
        Vec3 color;
        Vec3 p_cam;
        int x_min, x_max, y_min, y_max; // pixel bbox of the 3-sigma extent
    };

    const std::vector<WorldGaussian>& gaussians_;
    Camera cam_;
    int sh_degree_;
    std::vector<Splat> splats_;               // depth-sorted survivors
    std::vector<std::vector<std::uint32_t>> tile_bins_; // slots into splats_
    int tiles_x_ = 0, tiles_y_ = 0;

    friend struct RenderContextTestAccess;
};

RenderOutput render(const std::vector<WorldGaussian>& gaussians, const Camera& cam,
                    const Vec3& background, int sh_degree = 0);

std::vector<WorldGaussianGrad> render_backward(const std::vector<WorldGaussian>& gaussians,
                                               const Camera& cam, const Vec3& background,
                                               const Image& upstream, int sh_degree = 0);

// Indices whose accumulated compositing weight exceeds the threshold.
std::vector<std::uint32_t> visible_gaussians(const std::vector<WorldGaussian>& gaussians,
                                             const Camera& cam, double threshold,
                                             const Vec3& background, int sh_degree = 0);

// Spherical harmonics up to degree 3 under the 0.5 + basis . coeffs
// convention; exposed for the synthetic generator and tests.
Vec3 eval_sh_color(const double* sh, std::size_t sh_count, int degree, const Vec3& view_dir);

} // namespace msplat
