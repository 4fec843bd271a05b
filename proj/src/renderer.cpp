// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#include "msplat/renderer.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace msplat {

namespace {

constexpr double kNearPlane = 1.0;        // mm
constexpr double kCovFloor = 0.3;         // px^2 low-pass dilation
constexpr double kMaxWeight = 0.99;
constexpr double kMinWeight = 1.0 / 255.0;
constexpr double kMaxMahalanobisSq = 9.0; // 3-sigma cutoff
constexpr double kMinTransmittance = 1e-7;
constexpr int kTileSize = 16;

constexpr double kSH0 = 0.28209479177387814;
constexpr double kSH1 = 0.4886025119029199;
constexpr double kSH2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                            -1.0925484305920792, 0.5462742152960396};
constexpr double kSH3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                            0.3731763325901154, -0.4570457994644658, 1.445305721320277,
                            -0.5900435899266435};

int basis_count(int degree) { return (degree + 1) * (degree + 1); }

// Fills the SH basis at a unit direction; when grad != nullptr also fills
// d(basis_k)/d(direction) rows.
void sh_basis(const Vec3& dir, int degree, double* basis, Vec3* grad) {
    const double x = dir[0], y = dir[1], z = dir[2];
    basis[0] = kSH0;
    if (grad) grad[0] = Vec3::Zero();
    if (degree < 1) return;

    basis[1] = -kSH1 * y;
    basis[2] = kSH1 * z;
    basis[3] = -kSH1 * x;
    if (grad) {
        grad[1] = Vec3(0.0, -kSH1, 0.0);
        grad[2] = Vec3(0.0, 0.0, kSH1);
        grad[3] = Vec3(-kSH1, 0.0, 0.0);
    }
    if (degree < 2) return;

    const double xx = x * x, yy = y * y, zz = z * z;
    basis[4] = kSH2[0] * x * y;
    basis[5] = kSH2[1] * y * z;
    basis[6] = kSH2[2] * (2.0 * zz - xx - yy);
    basis[7] = kSH2[3] * x * z;
    basis[8] = kSH2[4] * (xx - yy);
    if (grad) {
        grad[4] = kSH2[0] * Vec3(y, x, 0.0);
        grad[5] = kSH2[1] * Vec3(0.0, z, y);
        grad[6] = kSH2[2] * Vec3(-2.0 * x, -2.0 * y, 4.0 * z);
        grad[7] = kSH2[3] * Vec3(z, 0.0, x);
        grad[8] = kSH2[4] * Vec3(2.0 * x, -2.0 * y, 0.0);
    }
    if (degree < 3) return;

    basis[9] = kSH3[0] * y * (3.0 * xx - yy);
    basis[10] = kSH3[1] * x * y * z;
    basis[11] = kSH3[2] * y * (4.0 * zz - xx - yy);
    basis[12] = kSH3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    basis[13] = kSH3[4] * x * (4.0 * zz - xx - yy);
    basis[14] = kSH3[5] * z * (xx - yy);
    basis[15] = kSH3[6] * x * (xx - 3.0 * yy);
    if (grad) {
        grad[9] = kSH3[0] * Vec3(6.0 * x * y, 3.0 * xx - 3.0 * yy, 0.0);
        grad[10] = kSH3[1] * Vec3(y * z, x * z, x * y);
        grad[11] = kSH3[2] * Vec3(-2.0 * x * y, 4.0 * zz - xx - 3.0 * yy, 8.0 * y * z);
        grad[12] = kSH3[3] * Vec3(-6.0 * x * z, -6.0 * y * z, 6.0 * zz - 3.0 * xx - 3.0 * yy);
        grad[13] = kSH3[4] * Vec3(4.0 * zz - 3.0 * xx - yy, -2.0 * x * y, 8.0 * x * z);
        grad[14] = kSH3[5] * Vec3(2.0 * x * z, -2.0 * y * z, xx - yy);
        grad[15] = kSH3[6] * Vec3(3.0 * xx - 3.0 * yy, -6.0 * x * y, 0.0);
    }
}

Mat2 invert_2x2(const Mat2& a, bool& ok) {
    const double det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    ok = det > 0.0;
    Mat2 inv;
    if (!ok) return inv;
    inv << a(1, 1) / det, -a(0, 1) / det, -a(1, 0) / det, a(0, 0) / det;
    return inv;
}

// Projection Jacobian of the pinhole model at a camera-space point.
Eigen::Matrix<double, 2, 3> projection_jacobian(const Camera& cam, const Vec3& p) {
    const double z = p[2];
    Eigen::Matrix<double, 2, 3> j;
    j << cam.fx / z, 0.0, -cam.fx * p[0] / (z * z),
         0.0, cam.fy / z, -cam.fy * p[1] / (z * z);
    return j;
}

Mat3 world_covariance(const WorldGaussian& g) {
    const Vec3 s2 = g.scales.cwiseProduct(g.scales);
    return g.rotation * s2.asDiagonal() * g.rotation.transpose();
}

} // namespace

Vec3 eval_sh_color(const double* sh, std::size_t sh_count, int degree, const Vec3& view_dir) {
    double basis[16];
    sh_basis(view_dir, degree, basis, nullptr);
    const int nb = std::min<int>(basis_count(degree), static_cast<int>(sh_count / 3));
    Vec3 color(0.5, 0.5, 0.5);
    for (int k = 0; k < nb; ++k) {
        for (int c = 0; c < 3; ++c) color[c] += basis[k] * sh[3 * k + c];
    }
    return color;
}

ProjectedGaussian project(const WorldGaussian& g, const Camera& cam) {
    ProjectedGaussian out;
    const Vec3 p = cam.to_camera(g.mean);
    if (p[2] <= kNearPlane) return out; // culled

    const Mat3 w_rot = cam.world_to_camera.rotation;
    const Mat3 cov_cam = w_rot * world_covariance(g) * w_rot.transpose();
    const Eigen::Matrix<double, 2, 3> j = projection_jacobian(cam, p);
    Mat2 cov2d = j * cov_cam * j.transpose();
    cov2d(0, 0) += kCovFloor;
    cov2d(1, 1) += kCovFloor;

    const Vec2 mean2d = cam.project_point(p);
    // Exact axis-aligned extent of the 3-sigma ellipse.
    const double rx = 3.0 * std::sqrt(cov2d(0, 0));
    const double ry = 3.0 * std::sqrt(cov2d(1, 1));
    if (mean2d[0] + rx < 0.0 || mean2d[0] - rx > cam.width || mean2d[1] + ry < 0.0 ||
        mean2d[1] - ry > cam.height) {
        return out; // culled
    }
    out.culled = false;
    out.mean2d = mean2d;
    out.cov2d = cov2d;
    out.depth = p[2];
    return out;
}

RenderContext::RenderContext(const std::vector<WorldGaussian>& gaussians, const Camera& cam,
                             int sh_degree)
    : gaussians_(gaussians), cam_(cam), sh_degree_(sh_degree) {
    cam_.validate();
    const Vec3 cam_center = cam_.center_world();

    splats_.reserve(gaussians.size());
    for (std::uint32_t i = 0; i < gaussians.size(); ++i) {
        const WorldGaussian& g = gaussians[i];
        const ProjectedGaussian proj = project(g, cam_);
        if (proj.culled) continue;
        bool invertible = false;
        const Mat2 inv = invert_2x2(proj.cov2d, invertible);
        if (!invertible) continue;

        Splat sp;
        sp.index = i;
        sp.mean2d = proj.mean2d;
        sp.cov2d = proj.cov2d;
        sp.cov2d_inv = inv;
        sp.depth = proj.depth;
        sp.opacity = g.opacity;
        sp.p_cam = cam_.to_camera(g.mean);
        const Vec3 view_dir = (g.mean - cam_center).normalized();
        sp.color = eval_sh_color(g.sh_coeffs, g.sh_count, sh_degree_, view_dir);

        const double rx = 3.0 * std::sqrt(proj.cov2d(0, 0));
        const double ry = 3.0 * std::sqrt(proj.cov2d(1, 1));
        sp.x_min = std::max(0, static_cast<int>(std::floor(proj.mean2d[0] - rx - 0.5)));
        sp.x_max = std::min(cam_.width - 1, static_cast<int>(std::ceil(proj.mean2d[0] + rx - 0.5)));
        sp.y_min = std::max(0, static_cast<int>(std::floor(proj.mean2d[1] - ry - 0.5)));
        sp.y_max = std::min(cam_.height - 1, static_cast<int>(std::ceil(proj.mean2d[1] + ry - 0.5)));
        if (sp.x_min > sp.x_max || sp.y_min > sp.y_max) continue;
        splats_.push_back(sp);
    }

    std::sort(splats_.begin(), splats_.end(), [](const Splat& a, const Splat& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.index < b.index;
    });

    tiles_x_ = (cam_.width + kTileSize - 1) / kTileSize;
    tiles_y_ = (cam_.height + kTileSize - 1) / kTileSize;
    tile_bins_.assign(static_cast<std::size_t>(tiles_x_) * tiles_y_, {});
    for (std::uint32_t slot = 0; slot < splats_.size(); ++slot) {
        const Splat& sp = splats_[slot];
        const int tx0 = sp.x_min / kTileSize;
        const int tx1 = sp.x_max / kTileSize;
        const int ty0 = sp.y_min / kTileSize;
        const int ty1 = sp.y_max / kTileSize;
        for (int ty = ty0; ty <= ty1; ++ty) {
            for (int tx = tx0; tx <= tx1; ++tx) {
                tile_bins_[static_cast<std::size_t>(ty) * tiles_x_ + tx].push_back(slot);
            }
        }
    }
}

RenderOutput RenderContext::forward(const Vec3& background) const {
    RenderOutput out;
    out.image = Image(cam_.width, cam_.height, 3);
    out.alpha = Image(cam_.width, cam_.height, 1);
    out.contrib.assign(gaussians_.size(), 0.0);

    const int n_tiles = tiles_x_ * tiles_y_;
    std::vector<std::vector<double>> contrib_partials(n_tiles);

#pragma omp parallel for schedule(dynamic)
    for (int tile = 0; tile < n_tiles; ++tile) {
        const auto& bin = tile_bins_[tile];
        auto& contrib_local = contrib_partials[tile];
        contrib_local.assign(bin.size(), 0.0);
        const int tx = tile % tiles_x_;
        const int ty = tile / tiles_x_;
        const int x0 = tx * kTileSize;
        const int y0 = ty * kTileSize;
        const int x1 = std::min(x0 + kTileSize, cam_.width);
        const int y1 = std::min(y0 + kTileSize, cam_.height);

        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                const Vec2 pix(x + 0.5, y + 0.5);
                double transmittance = 1.0;
                Vec3 rgb = Vec3::Zero();
                for (std::size_t s = 0; s < bin.size(); ++s) {
                    const Splat& sp = splats_[bin[s]];
                    if (x < sp.x_min || x > sp.x_max || y < sp.y_min || y > sp.y_max) continue;
                    const Vec2 d = pix - sp.mean2d;
                    const double q = d.dot(sp.cov2d_inv * d);
                    if (q > kMaxMahalanobisSq) continue;
                    double w = sp.opacity * std::exp(-0.5 * q);
                    if (w > kMaxWeight) w = kMaxWeight;
                    if (w < kMinWeight) continue;
                    rgb += (w * transmittance) * sp.color;
                    contrib_local[s] += w * transmittance;
                    transmittance *= 1.0 - w;
                    if (transmittance < kMinTransmittance) break;
                }
                for (int c = 0; c < 3; ++c) {
                    out.image.at(x, y, c) = rgb[c] + transmittance * background[c];
                }
                out.alpha.at(x, y, 0) = 1.0 - transmittance;
            }
        }
    }

    // Deterministic reduction: tiles combined in index order.
    for (int tile = 0; tile < n_tiles; ++tile) {
        const auto& bin = tile_bins_[tile];
        for (std::size_t s = 0; s < bin.size(); ++s) {
            out.contrib[splats_[bin[s]].index] += contrib_partials[tile][s];
        }
    }
    return out;
}

std::vector<WorldGaussianGrad> RenderContext::backward(const Vec3& background,
                                                       const Image& upstream) const {
    if (upstream.width != cam_.width || upstream.height != cam_.height || upstream.channels != 3) {
        throw DataError("render_backward: upstream gradient dimensions do not match the camera");
    }

    const int n_tiles = tiles_x_ * tiles_y_;
    // Per-splat partials per tile: d_color(3), d_mean2d(2), d_cov2d sym(3), d_opacity(1).
    struct Partial {
        double d_color[3] = {0, 0, 0};
        double d_u[2] = {0, 0};
        double d_a[3] = {0, 0, 0}; // a00, a01(=a10), a11
        double d_opacity = 0;
    };
    std::vector<std::vector<Partial>> partials(n_tiles);

#pragma omp parallel for schedule(dynamic)
    for (int tile = 0; tile < n_tiles; ++tile) {
        const auto& bin = tile_bins_[tile];
        auto& local = partials[tile];
        local.assign(bin.size(), Partial{});
        const int tx = tile % tiles_x_;
        const int ty = tile / tiles_x_;
        const int x0 = tx * kTileSize;
        const int y0 = ty * kTileSize;
        const int x1 = std::min(x0 + kTileSize, cam_.width);
        const int y1 = std::min(y0 + kTileSize, cam_.height);

        struct Hit {
            std::uint32_t slot_in_bin;
            double w;
            double t_before;
        };
        std::vector<Hit> hits;
        hits.reserve(64);

        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                const Vec3 gu(upstream.at(x, y, 0), upstream.at(x, y, 1), upstream.at(x, y, 2));
                const Vec2 pix(x + 0.5, y + 0.5);

                // Replay the forward walk.
                hits.clear();
                double transmittance = 1.0;
                for (std::size_t s = 0; s < bin.size(); ++s) {
                    const Splat& sp = splats_[bin[s]];
                    if (x < sp.x_min || x > sp.x_max || y < sp.y_min || y > sp.y_max) continue;
                    const Vec2 d = pix - sp.mean2d;
                    const double q = d.dot(sp.cov2d_inv * d);
                    if (q > kMaxMahalanobisSq) continue;
                    double w = sp.opacity * std::exp(-0.5 * q);
                    if (w > kMaxWeight) w = kMaxWeight;
                    if (w < kMinWeight) continue;
                    hits.push_back({static_cast<std::uint32_t>(s), w, transmittance});
                    transmittance *= 1.0 - w;
                    if (transmittance < kMinTransmittance) break;
                }
                if (hits.empty() || (gu[0] == 0.0 && gu[1] == 0.0 && gu[2] == 0.0)) continue;

                // Suffix color behind each hit, walked back to front.
                Vec3 suffix = transmittance * background;
                for (std::size_t h = hits.size(); h-- > 0;) {
                    const Hit& hit = hits[h];
                    const Splat& sp = splats_[bin[hit.slot_in_bin]];
                    Partial& acc = local[hit.slot_in_bin];

                    const double wt = hit.w * hit.t_before;
                    for (int c = 0; c < 3; ++c) acc.d_color[c] += wt * gu[c];

                    const double d_w =
                        gu.dot(hit.t_before * sp.color - suffix / (1.0 - hit.w));
                    if (hit.w < kMaxWeight) { // clip kills the gradient when saturated
                        acc.d_opacity += (hit.w / sp.opacity) * d_w;
                        const double d_power = hit.w * d_w;
                        const Vec2 d = pix - sp.mean2d;
                        const Vec2 md = sp.cov2d_inv * d;
                        acc.d_u[0] += d_power * md[0];
                        acc.d_u[1] += d_power * md[1];
                        acc.d_a[0] += d_power * 0.5 * md[0] * md[0];
                        acc.d_a[1] += d_power * 0.5 * md[0] * md[1];
                        acc.d_a[2] += d_power * 0.5 * md[1] * md[1];
                    }
                    suffix = wt * sp.color + suffix;
                }
            }
        }
    }

    // Deterministic combine in tile order.
    std::vector<Partial> per_splat(splats_.size());
    for (int tile = 0; tile < n_tiles; ++tile) {
        const auto& bin = tile_bins_[tile];
        for (std::size_t s = 0; s < bin.size(); ++s) {
            const Partial& src = partials[tile][s];
            Partial& dst = per_splat[bin[s]];
            for (int k = 0; k < 3; ++k) dst.d_color[k] += src.d_color[k];
            dst.d_u[0] += src.d_u[0];
            dst.d_u[1] += src.d_u[1];
            for (int k = 0; k < 3; ++k) dst.d_a[k] += src.d_a[k];
            dst.d_opacity += src.d_opacity;
        }
    }

    // Chain 2D gradients to world-space parameters, independently per splat.
    std::vector<WorldGaussianGrad> grads(gaussians_.size());
    for (auto& g : grads) g.d_sh.clear();
    const Vec3 cam_center = cam_.center_world();
    const Mat3 w_rot = cam_.world_to_camera.rotation;

#pragma omp parallel for schedule(static)
    for (std::int64_t slot = 0; slot < static_cast<std::int64_t>(splats_.size()); ++slot) {
        const Splat& sp = splats_[slot];
        const Partial& acc = per_splat[slot];
        const WorldGaussian& g = gaussians_[sp.index];
        WorldGaussianGrad& out = grads[sp.index];

        const Vec2 d_u(acc.d_u[0], acc.d_u[1]);
        Mat2 d_a;
        d_a << acc.d_a[0], acc.d_a[1], acc.d_a[1], acc.d_a[2];
        const Vec3 d_color(acc.d_color[0], acc.d_color[1], acc.d_color[2]);

        const Eigen::Matrix<double, 2, 3> j = projection_jacobian(cam_, sp.p_cam);
        const Mat3 cov_world = world_covariance(g);
        const Mat3 cov_cam = w_rot * cov_world * w_rot.transpose();

        // rgb <- SH(view direction)
        double basis[16];
        Vec3 basis_grad[16];
        const Vec3 offset = g.mean - cam_center;
        const double dist = offset.norm();
        const Vec3 view_dir = offset / dist;
        sh_basis(view_dir, sh_degree_, basis, basis_grad);
        const int nb = std::min<int>(basis_count(sh_degree_), static_cast<int>(g.sh_count / 3));
        out.d_sh.assign(g.sh_count, 0.0);
        Vec3 d_view_dir = Vec3::Zero();
        for (int k = 0; k < nb; ++k) {
            for (int c = 0; c < 3; ++c) {
                out.d_sh[3 * k + c] = basis[k] * d_color[c];
                d_view_dir += d_color[c] * g.sh_coeffs[3 * k + c] * basis_grad[k];
            }
        }

        // cov2d = J cov_cam J^T + floor
        const Mat3 d_cov_cam = j.transpose() * d_a * j;
        const Eigen::Matrix<double, 2, 3> d_j = 2.0 * d_a * j * cov_cam;
        const Mat3 d_cov_world = w_rot.transpose() * d_cov_cam * w_rot;

        // cov_world = R diag(s^2) R^T
        const Mat3 s2 = g.scales.cwiseProduct(g.scales).asDiagonal();
        out.d_rotation = 2.0 * d_cov_world * g.rotation * s2;
        for (int k = 0; k < 3; ++k) {
            const Vec3 rk = g.rotation.col(k);
            out.d_scales[k] = 2.0 * g.scales[k] * rk.dot(d_cov_world * rk);
        }

        // Mean: through the projected center and through J's dependence on p.
        Vec3 d_p = j.transpose() * d_u;
        const double z = sp.p_cam[2];
        const double z2 = z * z;
        const double z3 = z2 * z;
        // dJ/dx and dJ/dy touch only the third column.
        d_p[0] += d_j(0, 2) * (-cam_.fx / z2);
        d_p[1] += d_j(1, 2) * (-cam_.fy / z2);
        d_p[2] += d_j(0, 0) * (-cam_.fx / z2) + d_j(0, 2) * (2.0 * cam_.fx * sp.p_cam[0] / z3) +
                  d_j(1, 1) * (-cam_.fy / z2) + d_j(1, 2) * (2.0 * cam_.fy * sp.p_cam[1] / z3);

        out.d_mean = w_rot.transpose() * d_p;
        // View-direction pathway of the SH color.
        out.d_mean += (d_view_dir - view_dir * view_dir.dot(d_view_dir)) / dist;
        out.d_opacity = acc.d_opacity;
    }
    return grads;
}

RenderOutput render(const std::vector<WorldGaussian>& gaussians, const Camera& cam,
                    const Vec3& background, int sh_degree) {
    return RenderContext(gaussians, cam, sh_degree).forward(background);
}

std::vector<WorldGaussianGrad> render_backward(const std::vector<WorldGaussian>& gaussians,
                                               const Camera& cam, const Vec3& background,
                                               const Image& upstream, int sh_degree) {
    return RenderContext(gaussians, cam, sh_degree).backward(background, upstream);
}

std::vector<std::uint32_t> visible_gaussians(const std::vector<WorldGaussian>& gaussians,
                                             const Camera& cam, double threshold,
                                             const Vec3& background, int sh_degree) {
    const RenderOutput out = render(gaussians, cam, background, sh_degree);
    std::vector<std::uint32_t> visible;
    for (std::uint32_t i = 0; i < out.contrib.size(); ++i) {
        if (out.contrib[i] > threshold) visible.push_back(i);
    }
    return visible;
}

} // namespace msplat
