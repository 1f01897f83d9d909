#pragma once

#include "labelforge/geometry.hpp"
#include "labelforge/grid.hpp"
#include "labelforge/labels.hpp"
#include "labelforge/render.hpp"

namespace labelforge {

/// Binarization thresholds. A metric passes when it is strictly below its
/// threshold inside its effective region.
struct ThresholdConfig {
    double rc_nerf = 0.4;
    double rc_splat = 0.06;
    double vss = 0.1;
    double gc = 0.01;
    double occ_th = 0.3;
    double rc_low = 0.1;
    double rc_high = 0.9;

    /// Throws InvalidInput unless every value is in (0,1) and rc_low < rc_high.
    void validate() const;
    double rc_threshold(DepthMode mode) const { return mode == DepthMode::Nerf ? rc_nerf : rc_splat; }
    bool operator==(const ThresholdConfig&) const = default;
};

/// Spread of a ray's weight between its low and high cumulative quantiles,
/// (t_h - t_l) / (t_h + t_l). Rays that never accumulate rc_high score 1.
MetricMap reconstruction_confidence(const RayWeightField& field, DepthMode mode,
                                    const ThresholdConfig& cfg);

/// Confidence of a single ray.
double ray_confidence(std::span<const RaySample> samples, DepthMode mode,
                      const ThresholdConfig& cfg);

/// |Z1' - Z2(p1')| / (Z1' + Z2(p1')) with Z2 sampled bilinearly at the
/// reprojection of each frame-1 pixel.
MetricMap geometric_consistency(const DepthMap& depth1, const DepthMap& depth2,
                                const CameraIntrinsics& K, const RigidPose& pose1,
                                const RigidPose& pose2);

/// Bilinear depth lookup; false when any contributing neighbor is invalid.
bool sample_depth(const DepthMap& depth, double x, double y, double& out);

struct SsimOptions {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

/// Windowed SSIM over the pixels marked in `mask`; windows are truncated and
/// renormalized at borders and around masked-out pixels.
Grid<double> ssim_map(const GrayImage& a, const GrayImage& b, const BinaryMask& mask,
                      const SsimOptions& opts = {});

/// frame2 pulled back into frame 1 along the flow (bilinear); pixels whose
/// source leaves frame 2 or whose flow is invalid are cleared in `valid`.
RgbImage warp_backward(const RgbImage& frame2, const FlowField& flow, BinaryMask& valid);

/// 1 - clamp(SSIM(I1, warp(I2)), 0, 1) on the luma channel.
MetricMap visual_structural_similarity(const RgbImage& frame1, const RgbImage& frame2,
                                       const FlowField& flow, const SsimOptions& opts = {});

struct MaskSelection {
    bool rc = true;
    bool occ = true;
    bool vss = false;
    bool gc = true;
    bool operator==(const MaskSelection&) const = default;
};

struct QualityMaps {
    MetricMap rc;
    MetricMap gc;
    MetricMap vss;
    OcclusionMask occ;
};

/// Per-pixel pass/fail of each selected mask after binarization, ANDed.
/// RC covers the whole image; occlusion is gated by binarized RC; VSS and GC
/// are evaluated only where the occlusion mask is visible.
BinaryMask fused_validity(const QualityMaps& maps, const ThresholdConfig& cfg,
                          const MaskSelection& selection, DepthMode mode);

/// Label restricted to pixels passing every selected mask; invalid pixels
/// carry zero so they drop out of any loss.
FlowField fuse_labels(const FlowField& label, const QualityMaps& maps, const ThresholdConfig& cfg,
                      const MaskSelection& selection, DepthMode mode);
DisparityMap fuse_labels(const DisparityMap& label, const QualityMaps& maps,
                         const ThresholdConfig& cfg, const MaskSelection& selection,
                         DepthMode mode);

/// 100 x mean geometric consistency over visible pixels. Throws InvalidInput
/// when no pixel is both visible and scored.
double gc_l_score(const MetricMap& gc, const OcclusionMask& occ);

}  // namespace labelforge
