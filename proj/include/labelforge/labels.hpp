#pragma once

#include <utility>

#include "labelforge/geometry.hpp"
#include "labelforge/grid.hpp"
#include "labelforge/render.hpp"

namespace labelforge {

struct Flow {
    double u = 0.0;
    double v = 0.0;

    bool operator==(const Flow&) const = default;
    Flow operator+(const Flow& o) const { return {u + o.u, v + o.v}; }
    Flow operator-(const Flow& o) const { return {u - o.u, v - o.v}; }
    Flow operator*(double s) const { return {u * s, v * s}; }
    double squared_norm() const { return u * u + v * v; }
};

/// Per-pixel displacement from frame 1 to frame 2, in pixels.
struct FlowField {
    Grid<Flow> value;
    BinaryMask valid;

    FlowField() = default;
    FlowField(int width, int height) : value(width, height), valid(width, height, 0) {}

    int width() const { return value.width(); }
    int height() const { return value.height(); }
    bool is_valid(int x, int y) const { return valid(x, y) != 0; }
    void set(int x, int y, Flow f) {
        value(x, y) = f;
        valid(x, y) = 1;
    }
    void invalidate(int x, int y) {
        value(x, y) = {};
        valid(x, y) = 0;
    }
    std::size_t valid_count() const {
        std::size_t n = 0;
        for (auto v : valid) n += v != 0;
        return n;
    }
    bool operator==(const FlowField&) const = default;
};

/// 1 = visible in the other frame, 0 = occluded or leaving the frame.
struct OcclusionMask {
    BinaryMask visible;

    OcclusionMask() = default;
    OcclusionMask(int width, int height, std::uint8_t fill = 1) : visible(width, height, fill) {}
    explicit OcclusionMask(BinaryMask mask) : visible(std::move(mask)) {}
    int width() const { return visible.width(); }
    int height() const { return visible.height(); }
    bool is_visible(int x, int y) const { return visible(x, y) != 0; }
    bool operator==(const OcclusionMask&) const = default;
};

enum class Task { Flow, Stereo };

/// Frame-1 pixels carried into camera 2 through their depth.
struct Reprojection {
    Grid<PixelCoord> target;
    Grid<double> depth;    ///< camera-2 z-depth of the lifted point
    BinaryMask valid;      ///< source depth valid and target in front of camera 2
    BinaryMask in_frame;   ///< valid and target inside the image

    int width() const { return depth.width(); }
    int height() const { return depth.height(); }
};

Reprojection reproject(const DepthMap& depth1, const CameraIntrinsics& K, const RigidPose& pose1,
                       const RigidPose& pose2);

/// Flow from frame 1 to frame 2 induced by depth and camera motion. Pixels
/// without depth, behind camera 2 or leaving the frame are invalid.
FlowField flow_from_depth(const DepthMap& depth1, const CameraIntrinsics& K,
                          const RigidPose& pose1, const RigidPose& pose2);

/// |horizontal flow|; pixels with |vertical flow| above `max_vertical` are invalid.
DisparityMap disparity_from_flow(const FlowField& flow, double max_vertical = 0.01);

DisparityMap disparity_from_depth(const DepthMap& depth, double baseline, double fx);

/// Stereo flow (-d, 0) for a disparity map.
FlowField flow_from_disparity(const DisparityMap& disparity);

struct RayIntegralOcclusion {
    double threshold = 0.3;
    double margin = 0.0;  ///< depth margin in front of the target; 2 * step in practice
};

/// Visibility from the surface probability accumulated on camera 2's ray in
/// front of each reprojected point (nearest-pixel ray).
OcclusionMask occlusion_by_ray_integral(const RayWeightField& field2, const Reprojection& reproj,
                                        const RayIntegralOcclusion& opts);

/// Probability mass in front of `depth` on one ray; the quantity thresholded above.
double occluding_mass(std::span<const RaySample> samples, double depth, double margin);

struct ForwardBackwardCheck {
    double alpha = 0.01;
    double beta = 0.5;
};

/// Forward-backward consistency: occluded where
/// |f(p) + b(p + f(p))|^2 > alpha (|f|^2 + |b|^2) + beta.
OcclusionMask occlusion_by_fb_check(const FlowField& forward, const FlowField& backward,
                                    const ForwardBackwardCheck& opts = {});

/// Bilinear flow lookup that only blends valid neighbors.
bool sample_flow(const FlowField& flow, double x, double y, Flow& out);

/// Generated dataset unit. Stereo pairs keep their label as flow (-d, 0).
struct LabeledPair {
    Task task = Task::Flow;
    RgbImage frame1;
    RgbImage frame2;
    DepthMap depth1;
    DepthMap depth2;
    FlowField flow;
    OcclusionMask occlusion;

    int width() const { return frame1.width(); }
    int height() const { return frame1.height(); }
    DisparityMap disparity() const;
    bool operator==(const LabeledPair&) const = default;
};

}  // namespace labelforge
