// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#include "msplat/tracker.hpp"

#include <chrono>
#include <limits>
#include <cmath>

namespace msplat {

namespace {

struct FlatParams {
    std::vector<double> deltas;
    std::vector<double> bary;
    std::vector<double> log_scale;
    std::vector<double> opacity;
    std::vector<double> sh;
};

void gather(const DeformationField& field, const std::vector<RiggedGaussian>& gaussians,
            FlatParams& p) {
    p.deltas.resize(field.deltas.size() * 3);
    for (std::size_t k = 0; k < field.deltas.size(); ++k) {
        for (int c = 0; c < 3; ++c) p.deltas[3 * k + c] = field.deltas[k][c];
    }
    const std::size_t n = gaussians.size();
    const std::size_t sh_n = n > 0 ? gaussians[0].sh_coeffs.size() : 0;
    p.bary.resize(n * 3);
    p.log_scale.resize(n * 2);
    p.opacity.resize(n);
    p.sh.resize(n * sh_n);
    for (std::size_t i = 0; i < n; ++i) {
        const RiggedGaussian& g = gaussians[i];
        for (int c = 0; c < 3; ++c) p.bary[3 * i + c] = g.bary[c];
        p.log_scale[2 * i] = g.log_scale_uv[0];
        p.log_scale[2 * i + 1] = g.log_scale_uv[1];
        p.opacity[i] = g.opacity_logit;
        for (std::size_t k = 0; k < sh_n; ++k) p.sh[sh_n * i + k] = g.sh_coeffs[k];
    }
}

void scatter(const FlatParams& p, DeformationField& field, std::vector<RiggedGaussian>& gaussians) {
    for (std::size_t k = 0; k < field.deltas.size(); ++k) {
        for (int c = 0; c < 3; ++c) field.deltas[k][c] = p.deltas[3 * k + c];
    }
    const std::size_t n = gaussians.size();
    const std::size_t sh_n = n > 0 ? gaussians[0].sh_coeffs.size() : 0;
    for (std::size_t i = 0; i < n; ++i) {
        RiggedGaussian& g = gaussians[i];
        for (int c = 0; c < 3; ++c) g.bary[c] = p.bary[3 * i + c];
        g.log_scale_uv[0] = p.log_scale[2 * i];
        g.log_scale_uv[1] = p.log_scale[2 * i + 1];
        g.opacity_logit = p.opacity[i];
        for (std::size_t k = 0; k < sh_n; ++k) g.sh_coeffs[k] = p.sh[sh_n * i + k];
    }
}

} // namespace

Tracker::Tracker(TriMesh registered_mesh, OptimizerConfig config)
    : mesh_(std::move(registered_mesh)), config_(std::move(config)) {
    mesh_.validate();
    adj_ = build_adjacency(mesh_);
    edge_weights_ = edge_weights(mesh_, adj_, config_.arap_weighting);
    n_directed_edges_ = adj_.directed_edges.size();
}

void Tracker::initialize(const FrameObservation& frame0) {
    frame0.validate();
    gaussians_ = rig(mesh_, config_.rigging, config_.seed);

    // Single render on the undeformed mesh to find visible Gaussians.
    std::vector<WorldGaussian> world(gaussians_.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(gaussians_.size()); ++i) {
        world[i] = realize(gaussians_[i], mesh_, mesh_.vertices, config_.rigging);
    }
    const std::vector<std::uint32_t> visible = visible_gaussians(
        world, frame0.camera, config_.visibility_threshold, config_.background,
        config_.rigging.sh_degree);
    if (visible.empty()) {
        throw DataError("tracker: no visible Gaussians in frame 0; check camera and registration");
    }
    vis_ = visibility_to_vertices(visible, gaussians_, mesh_);

    const auto n_visible = static_cast<std::uint32_t>(vis_.visible_vertices.size());
    std::uint32_t k = static_cast<std::uint32_t>(
        std::lround(config_.anchor_fraction * static_cast<double>(n_visible)));
    k = std::max(k, config_.anchor_min);
    k = std::min(k, n_visible);
    const std::vector<std::uint32_t> anchors = select_anchors(vis_, k, config_.seed + 1);

    const double radius = config_.support_radius > 0.0
                              ? config_.support_radius
                              : config_.support_radius_scale * mesh_.mean_edge_length();
    field_ = build_field(mesh_, anchors, radius, config_.kernel);
    initialized_ = true;
}

void Tracker::check_invariants(const std::vector<Vec3>& deformed) const {
    for (std::size_t i = 0; i < gaussians_.size(); ++i) {
        const RiggedGaussian& g = gaussians_[i];
        const double sum = g.bary[0] + g.bary[1] + g.bary[2];
        if (g.bary.minCoeff() < 0.0 || std::abs(sum - 1.0) > 1e-9) {
            throw NumericalError("invariant violation: Gaussian " + std::to_string(i) +
                                 " barycentric coordinates off the simplex");
        }
        const double kappa = config_.rigging.scale_cap_factor;
        for (int k = 0; k < 2; ++k) {
            const double s = std::exp(g.log_scale_uv[k]);
            if (s < g.init_scale / kappa * (1.0 - 1e-12) || s > g.init_scale * kappa * (1.0 + 1e-12)) {
                throw NumericalError("invariant violation: Gaussian " + std::to_string(i) +
                                     " scale outside the cap");
            }
        }
        const WorldGaussian w = realize(g, mesh_, deformed, config_.rigging);
        const auto& tri = mesh_.faces[g.parent_face];
        const Vec3 reconstructed = g.bary[0] * deformed[tri[0]] + g.bary[1] * deformed[tri[1]] +
                                   g.bary[2] * deformed[tri[2]];
        if ((w.mean - reconstructed).norm() > 1e-9) {
            throw NumericalError("invariant violation: Gaussian " + std::to_string(i) +
                                 " mean left its parent face");
        }
        if (w.scales[2] != config_.rigging.normal_scale_fraction * g.init_scale) {
            throw NumericalError("invariant violation: Gaussian " + std::to_string(i) +
                                 " normal scale was modified");
        }
    }
}

Tracker::IterationResult Tracker::run_iteration(const FrameObservation& obs, int frame_index,
                                                int iter, bool allow_deltas, bool step_params) {
    const std::size_t n_gaussians = gaussians_.size();
    const std::size_t sh_n = n_gaussians > 0 ? gaussians_[0].sh_coeffs.size() : 0;

    // Forward.
    std::vector<Vec3> deformed = field_.apply(mesh_);
    const ArapState arap_state = arap_fit_rotations(mesh_, adj_, edge_weights_, deformed);

    std::vector<WorldGaussian> world(n_gaussians);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n_gaussians); ++i) {
        world[i] = realize(gaussians_[i], mesh_, deformed, config_.rigging);
    }
    const RenderContext ctx(world, obs.camera, config_.rigging.sh_degree);
    const RenderOutput rendered = ctx.forward(config_.background);

    const PhotometricResult photo = photometric_loss(rendered.image, obs, config_.weights.norm);
    const PenaltyResult rel = neighbor_relative_penalty(mesh_, adj_, deformed);
    const PenaltyResult vis_pen = invisible_penalty(vis_, mesh_, deformed);
    const std::size_t n_invisible =
        mesh_.vertex_count() - vis_.visible_vertices.size();

    const double edge_norm = n_directed_edges_ > 0 ? 1.0 / static_cast<double>(n_directed_edges_) : 0.0;
    const double vis_norm = n_invisible > 0 ? 1.0 / static_cast<double>(n_invisible) : 0.0;

    LossTraceRow row;
    row.frame = frame_index;
    row.iter = iter;
    row.photo = photo.loss;
    row.arap = arap_state.energy * edge_norm;
    row.rel = rel.energy * edge_norm;
    row.vis = vis_pen.energy * vis_norm;
    row.total = row.photo + config_.weights.lambda_arap * row.arap +
                config_.weights.lambda_rel * row.rel + config_.weights.lambda_vis * row.vis;
    if (!std::isfinite(row.total)) {
        throw NumericalError("frame " + std::to_string(frame_index) + " aborted at iteration " +
                             std::to_string(iter) + ": non-finite loss (photo=" +
                             std::to_string(row.photo) + ", arap=" + std::to_string(row.arap) +
                             ", rel=" + std::to_string(row.rel) + ", vis=" +
                             std::to_string(row.vis) + ")");
    }

    if (!step_params) {
        IterationResult early;
        early.row = row;
        early.deformed = std::move(deformed);
        return early;
    }

    // Backward.
    const std::vector<WorldGaussianGrad> world_grads =
        ctx.backward(config_.background, photo.grad);

    std::vector<RiggedGaussianGrad> rig_grads(n_gaussians);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n_gaussians); ++i) {
        rig_grads[i] =
            realize_backward(gaussians_[i], mesh_, deformed, world_grads[i], config_.rigging);
    }

    // Vertex gradients: rendering pathway plus the weighted regularizers.
    std::vector<Vec3> vertex_grads(mesh_.vertex_count(), Vec3::Zero());
    for (std::size_t i = 0; i < n_gaussians; ++i) {
        const auto& tri = mesh_.faces[gaussians_[i].parent_face];
        for (int k = 0; k < 3; ++k) vertex_grads[tri[k]] += rig_grads[i].d_vertex[k];
    }
    const std::vector<Vec3> arap_grads = arap_gradient(mesh_, adj_, edge_weights_, deformed, arap_state);
    const double w_arap = config_.weights.lambda_arap * edge_norm;
    const double w_rel = config_.weights.lambda_rel * edge_norm;
    const double w_vis = config_.weights.lambda_vis * vis_norm;
    for (std::size_t v = 0; v < mesh_.vertex_count(); ++v) {
        vertex_grads[v] += w_arap * arap_grads[v] + w_rel * rel.vertex_grads[v] +
                           w_vis * vis_pen.vertex_grads[v];
    }
    const std::vector<Vec3> delta_grads = field_.apply_backward(vertex_grads);

    // Flatten gradients in the same layout as the parameters.
    IterationResult out;
    out.row = row;
    out.deformed = std::move(deformed);
    out.g_deltas.resize(delta_grads.size() * 3);
    for (std::size_t k = 0; k < delta_grads.size(); ++k) {
        for (int c = 0; c < 3; ++c) out.g_deltas[3 * k + c] = delta_grads[k][c];
    }
    out.g_bary.resize(n_gaussians * 3);
    out.g_log_scale.resize(n_gaussians * 2);
    out.g_opacity.resize(n_gaussians);
    out.g_sh.resize(n_gaussians * sh_n);
    for (std::size_t i = 0; i < n_gaussians; ++i) {
        for (int c = 0; c < 3; ++c) out.g_bary[3 * i + c] = rig_grads[i].d_bary[c];
        out.g_log_scale[2 * i] = rig_grads[i].d_log_scale_uv[0];
        out.g_log_scale[2 * i + 1] = rig_grads[i].d_log_scale_uv[1];
        out.g_opacity[i] = rig_grads[i].d_opacity_logit;
        for (std::size_t k = 0; k < sh_n; ++k) out.g_sh[sh_n * i + k] = rig_grads[i].d_sh[k];
    }
    return out;
}

FrameResult Tracker::optimize_frame(const FrameObservation& obs, bool allow_deltas, int max_iters) {
    if (!initialized_) throw ConfigError("tracker: optimize_frame called before initialize");
    obs.validate();
    const auto t_start = std::chrono::steady_clock::now();

    FlatParams params;
    gather(field_, gaussians_, params);
    Adam adam_deltas(params.deltas.size(), config_.lr_deltas);
    Adam adam_bary(params.bary.size(), config_.lr_bary);
    Adam adam_scale(params.log_scale.size(), config_.lr_log_scale);
    Adam adam_opacity(params.opacity.size(), config_.lr_opacity);
    Adam adam_sh(params.sh.size(), config_.lr_sh);

    FrameResult result;
    double best = std::numeric_limits<double>::infinity();
    int stall = 0;
    int iters_done = 0;
    for (int iter = 0; iter < max_iters; ++iter) {
        IterationResult step = run_iteration(obs, obs.index, iter, allow_deltas, true);
        result.trace.push_back(step.row);
        ++iters_done;

        gather(field_, gaussians_, params);
        if (allow_deltas) adam_deltas.step(params.deltas, step.g_deltas);
        adam_bary.step(params.bary, step.g_bary);
        adam_scale.step(params.log_scale, step.g_log_scale);
        adam_opacity.step(params.opacity, step.g_opacity);
        adam_sh.step(params.sh, step.g_sh);
        scatter(params, field_, gaussians_);

        for (auto& g : gaussians_) project_constraints(g, config_.rigging.scale_cap_factor);
        if (config_.debug_checks) check_invariants(field_.apply(mesh_));

        // Early stop on stalled relative improvement.
        if (step.row.total < best) {
            const double improvement = (best - step.row.total) / std::max(best, 1e-30);
            stall = std::isfinite(improvement) && improvement < config_.rel_tol ? stall + 1 : 0;
            best = step.row.total;
        } else {
            ++stall;
        }
        if (stall >= config_.patience) break;
    }

    result.deformed = field_.apply(mesh_);
    result.iterations = iters_done;
    if (!result.trace.empty() && result.trace.back().total > result.trace.front().total) {
        warn("frame " + std::to_string(obs.index) + ": final loss exceeds the first-iteration loss");
    }
    result.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

TrackResult track_sequence(const FrameProvider& provider, int frame_count, const TriMesh& mesh,
                           const RigidTransform& registration, const OptimizerConfig& config,
                           const std::function<void(int, const Tracker&, const FrameResult&)>&
                               on_frame_done) {
    if (frame_count < 1) throw ConfigError("track_sequence: empty sequence");
    registration.validate();

    Tracker tracker(apply_rigid(mesh, registration), config);
    TrackResult result;
    for (int t = 0; t < frame_count; ++t) {
        FrameObservation obs = provider(t);
        obs.index = t;
        FrameResult fr;
        if (t == 0) {
            tracker.initialize(obs);
            fr = tracker.optimize_frame(obs, config.optimize_frame0_deltas, config.frame0_iters);
        } else {
            if (config.reset_deltas_per_frame) {
                std::fill(tracker.field().deltas.begin(), tracker.field().deltas.end(), Vec3::Zero());
            }
            fr = tracker.optimize_frame(obs, true, config.max_iters);
        }
        if (on_frame_done) on_frame_done(t, tracker, fr);
        result.frames.push_back(std::move(fr));
    }
    return result;
}

} // namespace msplat
