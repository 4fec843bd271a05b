// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msplat/adam.hpp"
#include "msplat/arap.hpp"
#include "msplat/deformation.hpp"
#include "msplat/loss.hpp"
#include "msplat/renderer.hpp"

#include <functional>

namespace msplat {

struct OptimizerConfig {
    LossWeights weights;
    EdgeWeighting arap_weighting = EdgeWeighting::Cotangent;
    int max_iters = 100;
    int frame0_iters = 300;
    int patience = 10;
    double rel_tol = 1e-4;
    double lr_deltas = 1e-2;
    double lr_bary = 2e-3;
    double lr_log_scale = 5e-3;
    double lr_opacity = 5e-2;
    double lr_sh = 2.5e-3;
    bool optimize_frame0_deltas = false;
    bool reset_deltas_per_frame = false;
    bool debug_checks = false;

    Vec3 background = Vec3::Zero();
    double visibility_threshold = 0.5;
    double anchor_fraction = 0.1;
    std::uint32_t anchor_min = 16;
    double support_radius = 0.0;       // mm; 0 derives it from the mesh
    double support_radius_scale = 4.0; // x mean edge length when derived
    DeformationKernel kernel = DeformationKernel::Wendland;

    RiggingConfig rigging;
    std::uint64_t seed = 1234;
};

struct LossTraceRow {
    int frame = 0;
    int iter = 0;
    double photo = 0.0;
    double arap = 0.0;
    double rel = 0.0;
    double vis = 0.0;
    double total = 0.0;
};

struct FrameResult {
    std::vector<Vec3> deformed;
    std::vector<LossTraceRow> trace;
    int iterations = 0;
    double wall_time_s = 0.0;
};

// Per-frame joint optimization of the deformation deltas and the Gaussian
// appearance parameters against one observation, with the ARAP, relative
// and invisibility regularizers. Owns the learnable state across frames.
class Tracker {
public:
    // `registered_mesh` is the preoperative mesh already in world coordinates.
    Tracker(TriMesh registered_mesh, OptimizerConfig config);

    // Frame-0 setup: rig Gaussians, render once for visibility, select
    // anchors and build interpolation weights.
    void initialize(const FrameObservation& frame0);

    FrameResult optimize_frame(const FrameObservation& obs, bool allow_deltas, int max_iters);

    const TriMesh& mesh() const { return mesh_; }
    const std::vector<RiggedGaussian>& gaussians() const { return gaussians_; }
    std::vector<RiggedGaussian>& gaussians() { return gaussians_; }
    const DeformationField& field() const { return field_; }
    DeformationField& field() { return field_; }
    const VisibilitySet& visibility() const { return vis_; }
    bool initialized() const { return initialized_; }

    // Throws NumericalError if any rigging invariant is violated.
    void check_invariants(const std::vector<Vec3>& deformed) const;

private:
    struct IterationResult {
        LossTraceRow row;
        std::vector<Vec3> deformed;
        // Flat gradients matching the optimizer's parameter layout.
        std::vector<double> g_deltas, g_bary, g_log_scale, g_opacity, g_sh;
    };
    IterationResult run_iteration(const FrameObservation& obs, int frame_index, int iter,
                                  bool allow_deltas, bool step_params);

    TriMesh mesh_;
    OptimizerConfig config_;
    Adjacency adj_;
    EdgeWeights edge_weights_;
    std::size_t n_directed_edges_ = 0;

    std::vector<RiggedGaussian> gaussians_;
    DeformationField field_;
    VisibilitySet vis_;
    bool initialized_ = false;
};

// Streams frames (time-ordered) from a provider, warm-starting each frame
// from the previous one. Emits one deformed mesh per frame.
struct TrackResult {
    std::vector<FrameResult> frames;
};

using FrameProvider = std::function<FrameObservation(int)>;

TrackResult track_sequence(const FrameProvider& provider, int frame_count, const TriMesh& mesh,
                           const RigidTransform& registration, const OptimizerConfig& config,
                           const std::function<void(int, const Tracker&, const FrameResult&)>&
                               on_frame_done = nullptr);

} // namespace msplat
