#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "labelforge/geometry.hpp"
#include "labelforge/grid.hpp"
#include "labelforge/scene.hpp"

namespace labelforge {

/// Surface probability mass on one piece of a ray. Volumetric samples cover
/// [t_lo, t_hi); splat samples are degenerate with t_lo == t_hi == splat depth.
/// t is camera-frame depth (rays use unit-z directions).
struct RaySample {
    double t_lo = 0.0;
    double t_hi = 0.0;
    double weight = 0.0;
    Rgb color;

    double t_mid() const { return 0.5 * (t_lo + t_hi); }
};

/// Per-pixel ordered sample lists in compressed row storage. Samples with
/// zero weight are not stored.
class RayWeightField {
public:
    RayWeightField() = default;
    RayWeightField(int width, int height);

    int width() const { return width_; }
    int height() const { return height_; }

    std::span<const RaySample> ray(int x, int y) const;
    double total_weight(int x, int y) const;

    /// Appends samples for the next pixel in raster order.
    void push_ray(std::span<const RaySample> samples);
    bool complete() const;
    std::size_t sample_count() const { return samples_.size(); }

    /// Builds a 1x1 field holding a single ray, for evaluating per-ray operators.
    static RayWeightField single_ray(std::vector<RaySample> samples);

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::size_t> offsets_{0};
    std::vector<RaySample> samples_;
};

struct RenderResult {
    RgbImage image;
    RayWeightField field;
};

struct AnalyticRender {
    RgbImage image;
    DepthMap depth;
    Grid<int> primitive;  ///< index of the hit primitive, -1 for background
};

struct RaySampling {
    double near = 0.5;
    double far = 20.0;
    int steps = 512;  ///< number of uniform intervals in [near, far]

    /// Throws InvalidInput when near/far/steps are degenerate.
    void validate() const;
    double step() const { return (far - near) / steps; }
};

/// Volume rendering over uniform intervals. Interval opacities use the exact
/// integral of the piecewise-constant density over the interval.
RenderResult render_rayfield_nerf(const DensityScene& scene, const CameraIntrinsics& K,
                                  const RigidPose& pose, const RaySampling& sampling);

/// Samples of a single ray; exposed for per-ray tests and diagnostics.
std::vector<RaySample> march_ray(const DensityScene& scene, const Ray& ray,
                                 const RaySampling& sampling);

/// Rasterizer cut-offs: splats nearer than kSplatNear are culled, the
/// projection Jacobian is evaluated with x/z and y/z clamped to
/// kSplatFrustumSlack times the half field of view, contributions below
/// kSplatMinAlpha are skipped and a ray stops once transmittance falls
/// under kSplatMinTransmittance.
inline constexpr double kSplatNear = 0.2;
inline constexpr double kSplatFrustumSlack = 1.3;
inline constexpr double kSplatMinAlpha = 1.0 / 255.0;
inline constexpr double kSplatMinTransmittance = 1e-4;

/// EWA splatting with front-to-back alpha compositing sorted by camera depth.
RenderResult render_rayfield_splats(const SplatScene& scene, const CameraIntrinsics& K,
                                    const RigidPose& pose);

/// Exact first-hit ray casting; pixels that hit nothing are invalid.
AnalyticRender render_analytic(const AnalyticScene& scene, const CameraIntrinsics& K,
                               const RigidPose& pose);

enum class DepthMode { Nerf, Splat };

struct DepthOptions {
    double mean_weight_floor = 0.05;
};

/// Weighted mean of sample midpoints (not normalized by the total weight).
DepthMap mean_depth(const RayWeightField& field, const DepthOptions& opts = {});

/// Depth where cumulative weight reaches one half. Nerf mode interpolates
/// linearly inside the crossing interval; splat mode takes the sample whose
/// cumulative weight is closest to one half. Rays with total weight below
/// one half are invalid.
DepthMap median_depth(const RayWeightField& field, DepthMode mode);

/// Per-ray quantile helpers shared with the confidence metric.
double interpolate_cumulative(std::span<const RaySample> samples, double level);
std::size_t closest_cumulative_index(std::span<const RaySample> samples, double level);

}  // namespace labelforge
