#include "labelforge/labels.hpp"

#include <cmath>

#include "labelforge/error.hpp"

namespace labelforge {

Reprojection reproject(const DepthMap& depth1, const CameraIntrinsics& K, const RigidPose& pose1,
                       const RigidPose& pose2) {
    const int w = depth1.width();
    const int h = depth1.height();
    Reprojection r{Grid<PixelCoord>(w, h), Grid<double>(w, h, 0.0), BinaryMask(w, h, 0),
                   BinaryMask(w, h, 0)};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!depth1.is_valid(x, y)) continue;
            const double z = depth1.value(x, y);
            if (!(z > 0.0) || !std::isfinite(z)) continue;
            const Vec3 world = backproject({double(x), double(y)}, z, K, pose1);
            const Projection p = project(world, K, pose2);
            if (p.behind_camera) continue;
            r.target(x, y) = p.pixel;
            r.depth(x, y) = p.depth;
            r.valid(x, y) = 1;
            r.in_frame(x, y) = in_frame(p.pixel, K) ? 1 : 0;
        }
    }
    return r;
}

FlowField flow_from_depth(const DepthMap& depth1, const CameraIntrinsics& K,
                          const RigidPose& pose1, const RigidPose& pose2) {
    const Reprojection r = reproject(depth1, K, pose1, pose2);
    FlowField flow(depth1.width(), depth1.height());
    for (int y = 0; y < flow.height(); ++y)
        for (int x = 0; x < flow.width(); ++x)
            if (r.in_frame(x, y))
                flow.set(x, y, {r.target(x, y).u - x, r.target(x, y).v - y});
    return flow;
}

DisparityMap disparity_from_flow(const FlowField& flow, double max_vertical) {
    DisparityMap d(flow.width(), flow.height());
    for (int y = 0; y < flow.height(); ++y) {
        for (int x = 0; x < flow.width(); ++x) {
            if (!flow.is_valid(x, y)) continue;
            const Flow f = flow.value(x, y);
            if (std::abs(f.v) > max_vertical) continue;
            d.set(x, y, std::abs(f.u));
        }
    }
    return d;
}

DisparityMap disparity_from_depth(const DepthMap& depth, double baseline, double fx) {
    if (!(baseline > 0.0)) throw InvalidInput("baseline must be positive");
    DisparityMap d(depth.width(), depth.height());
    for (int y = 0; y < depth.height(); ++y)
        for (int x = 0; x < depth.width(); ++x)
            if (depth.is_valid(x, y) && depth.value(x, y) > 0.0)
                d.set(x, y, baseline * fx / depth.value(x, y));
    return d;
}

FlowField flow_from_disparity(const DisparityMap& disparity) {
    FlowField f(disparity.width(), disparity.height());
    for (int y = 0; y < f.height(); ++y)
        for (int x = 0; x < f.width(); ++x)
            if (disparity.is_valid(x, y)) f.set(x, y, {-disparity.value(x, y), 0.0});
    return f;
}

double occluding_mass(std::span<const RaySample> samples, double depth, double margin) {
    double mass = 0.0;
    for (const auto& s : samples) {
        if (!(s.t_mid() < depth - margin)) break;
        mass += s.weight;
    }
    return mass;
}

OcclusionMask occlusion_by_ray_integral(const RayWeightField& field2, const Reprojection& reproj,
                                        const RayIntegralOcclusion& opts) {
    OcclusionMask mask(reproj.width(), reproj.height(), 0);
    for (int y = 0; y < reproj.height(); ++y) {
        for (int x = 0; x < reproj.width(); ++x) {
            if (!reproj.in_frame(x, y)) continue;
            const PixelCoord t = reproj.target(x, y);
            int px = 0;
            int py = 0;
            if (!nearest_pixel(field2.width(), field2.height(), t.u, t.v, px, py)) continue;
            const double occ = occluding_mass(field2.ray(px, py), reproj.depth(x, y), opts.margin);
            mask.visible(x, y) = occ > opts.threshold ? 0 : 1;
        }
    }
    return mask;
}

bool sample_flow(const FlowField& flow, double x, double y, Flow& out) {
    if (!clamp_into_grid(flow.width(), flow.height(), x, y)) return false;
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0;
    const double fy = y - y0;
    Flow acc;
    double wsum = 0.0;
    for (int dy = 0; dy <= 1; ++dy) {
        for (int dx = 0; dx <= 1; ++dx) {
            const double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
            if (w == 0.0) continue;
            const int xi = x0 + dx;
            const int yi = y0 + dy;
            if (!flow.value.contains(xi, yi) || !flow.is_valid(xi, yi)) continue;
            acc = acc + flow.value(xi, yi) * w;
            wsum += w;
        }
    }
    if (!(wsum > 0.0)) return false;
    out = wsum == 1.0 ? acc : acc * (1.0 / wsum);
    return true;
}

OcclusionMask occlusion_by_fb_check(const FlowField& forward, const FlowField& backward,
                                    const ForwardBackwardCheck& opts) {
    if (!forward.value.same_shape(backward.value))
        throw InvalidInput("forward and backward flows must share the grid");
    OcclusionMask mask(forward.width(), forward.height(), 0);
    for (int y = 0; y < forward.height(); ++y) {
        for (int x = 0; x < forward.width(); ++x) {
            if (!forward.is_valid(x, y)) continue;
            const Flow f = forward.value(x, y);
            Flow b;
            if (!sample_flow(backward, x + f.u, y + f.v, b)) continue;
            const double residual = (f + b).squared_norm();
            const double bound = opts.alpha * (f.squared_norm() + b.squared_norm()) + opts.beta;
            mask.visible(x, y) = residual > bound ? 0 : 1;
        }
    }
    return mask;
}

DisparityMap LabeledPair::disparity() const {
    DisparityMap d(flow.width(), flow.height());
    for (int y = 0; y < flow.height(); ++y)
        for (int x = 0; x < flow.width(); ++x)
            if (flow.is_valid(x, y)) d.set(x, y, std::abs(flow.value(x, y).u));
    return d;
}

}  // namespace labelforge
