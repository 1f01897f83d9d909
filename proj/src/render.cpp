#include "labelforge/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "labelforge/error.hpp"

namespace labelforge {

RayWeightField::RayWeightField(int width, int height) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw InvalidInput("ray field dimensions must be non-negative");
    offsets_.reserve(static_cast<std::size_t>(width) * height + 1);
}

std::span<const RaySample> RayWeightField::ray(int x, int y) const {
    const std::size_t i = static_cast<std::size_t>(y) * width_ + x;
    return {samples_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
}

double RayWeightField::total_weight(int x, int y) const {
    double sum = 0.0;
    for (const auto& s : ray(x, y)) sum += s.weight;
    return sum;
}

void RayWeightField::push_ray(std::span<const RaySample> samples) {
    if (complete()) throw InvalidInput("ray field already holds every pixel");
    samples_.insert(samples_.end(), samples.begin(), samples.end());
    offsets_.push_back(samples_.size());
}

bool RayWeightField::complete() const {
    return offsets_.size() == static_cast<std::size_t>(width_) * height_ + 1;
}

RayWeightField RayWeightField::single_ray(std::vector<RaySample> samples) {
    RayWeightField f(1, 1);
    f.push_ray(samples);
    return f;
}

void RaySampling::validate() const {
    if (!(near > 0.0) || !(far > near) || !std::isfinite(far))
        throw InvalidInput("ray sampling requires 0 < near < far");
    if (steps < 2) throw InvalidInput("ray sampling requires at least two steps");
}

namespace {

struct IntervalMass {
    int index = 0;
    double tau = 0.0;        // optical depth contributed to the interval
    double color_w = 0.0;    // weight used for color averaging
    Rgb color_acc;
};

}  // namespace

std::vector<RaySample> march_ray(const DensityScene& scene, const Ray& ray,
                                 const RaySampling& sampling) {
    const double dt = sampling.step();
    auto boundary = [&](int i) {
        return i >= sampling.steps ? sampling.far : sampling.near + dt * i;
    };

    std::vector<IntervalMass> parts;
    for (const auto& seg : scene.segments(ray, sampling.near, sampling.far)) {
        int first = static_cast<int>(std::floor((seg.t0 - sampling.near) / dt));
        int last = static_cast<int>(std::ceil((seg.t1 - sampling.near) / dt)) - 1;
        first = std::clamp(first, 0, sampling.steps - 1);
        last = std::clamp(last, 0, sampling.steps - 1);
        const auto& prim = scene.primitives[seg.primitive].primitive;
        for (int i = first; i <= last; ++i) {
            const double a = std::max(seg.t0, boundary(i));
            const double b = std::min(seg.t1, boundary(i + 1));
            if (!(b > a)) continue;
            const double overlap = b - a;
            IntervalMass m;
            m.index = i;
            m.tau = seg.sigma * overlap;
            m.color_w = std::min(seg.sigma, 1e12) * overlap;
            m.color_acc = albedo_at(prim, ray.at(0.5 * (a + b))) * m.color_w;
            parts.push_back(m);
        }
    }
    std::sort(parts.begin(), parts.end(),
              [](const IntervalMass& a, const IntervalMass& b) { return a.index < b.index; });

    std::vector<RaySample> out;
    double optical_depth = 0.0;
    for (std::size_t k = 0; k < parts.size();) {
        IntervalMass merged = parts[k];
        std::size_t j = k + 1;
        for (; j < parts.size() && parts[j].index == merged.index; ++j) {
            merged.tau += parts[j].tau;
            merged.color_w += parts[j].color_w;
            merged.color_acc += parts[j].color_acc;
        }
        k = j;
        const double transmittance = std::exp(-optical_depth);
        const double opacity = -std::expm1(-merged.tau);
        const double w = opacity * transmittance;
        if (w > 0.0) {
            RaySample s;
            s.t_lo = boundary(merged.index);
            s.t_hi = boundary(merged.index + 1);
            s.weight = w;
            s.color = merged.color_w > 0.0 ? merged.color_acc * (1.0 / merged.color_w) : Rgb{};
            out.push_back(s);
        }
        optical_depth += merged.tau;
        if (optical_depth > 60.0) break;  // remaining transmittance < 1e-26
    }
    return out;
}

RenderResult render_rayfield_nerf(const DensityScene& scene, const CameraIntrinsics& K,
                                  const RigidPose& pose, const RaySampling& sampling) {
    K.validate();
    sampling.validate();
    RenderResult out{RgbImage(K.width, K.height), RayWeightField(K.width, K.height)};
    for (int y = 0; y < K.height; ++y) {
        for (int x = 0; x < K.width; ++x) {
            const Ray ray = pixel_ray({static_cast<double>(x), static_cast<double>(y)}, K, pose);
            const auto samples = march_ray(scene, ray, sampling);
            Rgb c;
            for (const auto& s : samples) c += s.color * s.weight;
            out.image(x, y) = c;
            out.field.push_ray(samples);
        }
    }
    return out;
}

namespace {

struct SplatHit {
    std::uint32_t pixel;
    std::uint32_t splat;
    double depth;
    double alpha;  // opacity times the projected gaussian
};

}  // namespace

RenderResult render_rayfield_splats(const SplatScene& scene, const CameraIntrinsics& K,
                                    const RigidPose& pose) {
    K.validate();
    if (scene.splats.empty()) throw InvalidInput("splat scene is empty");

    const Mat3 world_to_cam = pose.rotation.transpose();
    const double lim_x = kSplatFrustumSlack * std::max(K.cx + 0.5, K.width - 0.5 - K.cx) / K.fx;
    const double lim_y = kSplatFrustumSlack * std::max(K.cy + 0.5, K.height - 0.5 - K.cy) / K.fy;
    std::vector<SplatHit> hits;
    for (std::size_t k = 0; k < scene.splats.size(); ++k) {
        const SplatPrimitive& sp = scene.splats[k];
        const Vec3 cam = pose.to_camera(sp.mean);
        const double z = cam.z();
        if (!(z > kSplatNear)) continue;

        const Mat3 cov_cam = world_to_cam * sp.covariance() * world_to_cam.transpose();
        const double tx = std::clamp(cam.x() / z, -lim_x, lim_x);
        const double ty = std::clamp(cam.y() / z, -lim_y, lim_y);
        Eigen::Matrix<double, 2, 3> J;
        J << K.fx / z, 0.0, -K.fx * tx / z, 0.0, K.fy / z, -K.fy * ty / z;
        const Mat2 cov2 = J * cov_cam * J.transpose();
        const double det = cov2.determinant();
        if (!(det > 1e-18)) continue;
        const Mat2 conic = cov2.inverse();

        const double u = K.fx * cam.x() / z + K.cx;
        const double v = K.fy * cam.y() / z + K.cy;
        const double mid = 0.5 * (cov2(0, 0) + cov2(1, 1));
        const double lambda_max =
            mid + std::sqrt(std::max(0.0, mid * mid - det));
        const double radius = 3.5 * std::sqrt(lambda_max);
        const int x0 = std::max(0, static_cast<int>(std::ceil(u - radius)));
        const int x1 = std::min(K.width - 1, static_cast<int>(std::floor(u + radius)));
        const int y0 = std::max(0, static_cast<int>(std::ceil(v - radius)));
        const int y1 = std::min(K.height - 1, static_cast<int>(std::floor(v + radius)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double dx = x - u;
                const double dy = y - v;
                const double q = dx * dx * conic(0, 0) + 2.0 * dx * dy * conic(0, 1) +
                                 dy * dy * conic(1, 1);
                const double a = sp.opacity * std::exp(-0.5 * q);
                if (!(a >= kSplatMinAlpha)) continue;
                hits.push_back({static_cast<std::uint32_t>(y * K.width + x),
                                static_cast<std::uint32_t>(k), z, a});
            }
        }
    }

    // Full-key ordering so the result does not depend on the input order.
    std::sort(hits.begin(), hits.end(), [&](const SplatHit& a, const SplatHit& b) {
        const Rgb& ca = scene.splats[a.splat].color;
        const Rgb& cb = scene.splats[b.splat].color;
        return std::tie(a.pixel, a.depth, a.alpha, ca.r, ca.g, ca.b) <
               std::tie(b.pixel, b.depth, b.alpha, cb.r, cb.g, cb.b);
    });

    RenderResult out{RgbImage(K.width, K.height), RayWeightField(K.width, K.height)};
    std::vector<RaySample> samples;
    std::size_t h = 0;
    const auto pixels = static_cast<std::uint32_t>(K.width * K.height);
    for (std::uint32_t p = 0; p < pixels; ++p) {
        samples.clear();
        double transmittance = 1.0;
        Rgb c;
        for (; h < hits.size() && hits[h].pixel == p; ++h) {
            if (transmittance < kSplatMinTransmittance) continue;
            const double w = hits[h].alpha * transmittance;
            transmittance *= 1.0 - hits[h].alpha;
            if (!(w > 0.0)) continue;
            const Rgb& color = scene.splats[hits[h].splat].color;
            samples.push_back({hits[h].depth, hits[h].depth, w, color});
            c += color * w;
        }
        out.image[p] = c;
        out.field.push_ray(samples);
    }
    return out;
}

AnalyticRender render_analytic(const AnalyticScene& scene, const CameraIntrinsics& K,
                               const RigidPose& pose) {
    K.validate();
    AnalyticRender out{RgbImage(K.width, K.height), DepthMap(K.width, K.height),
                       Grid<int>(K.width, K.height, -1)};
    for (int y = 0; y < K.height; ++y) {
        for (int x = 0; x < K.width; ++x) {
            const Ray ray = pixel_ray({static_cast<double>(x), static_cast<double>(y)}, K, pose);
            const auto hit = scene.first_hit(ray);
            if (!hit) continue;
            out.depth.set(x, y, hit->t);
            out.primitive(x, y) = static_cast<int>(hit->primitive);
            out.image(x, y) = albedo_at(scene.primitives[hit->primitive], ray.at(hit->t));
        }
    }
    return out;
}

DepthMap mean_depth(const RayWeightField& field, const DepthOptions& opts) {
    DepthMap out(field.width(), field.height());
    for (int y = 0; y < field.height(); ++y) {
        for (int x = 0; x < field.width(); ++x) {
            double total = 0.0;
            double acc = 0.0;
            for (const auto& s : field.ray(x, y)) {
                total += s.weight;
                acc += s.weight * s.t_mid();
            }
            if (total >= opts.mean_weight_floor && acc > 0.0) out.set(x, y, acc);
        }
    }
    return out;
}

double interpolate_cumulative(std::span<const RaySample> samples, double level) {
    double cum = 0.0;
    for (const auto& s : samples) {
        if (cum + s.weight >= level) {
            const double frac = std::clamp((level - cum) / s.weight, 0.0, 1.0);
            return s.t_lo + frac * (s.t_hi - s.t_lo);
        }
        cum += s.weight;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

std::size_t closest_cumulative_index(std::span<const RaySample> samples, double level) {
    double cum = 0.0;
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_index = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        cum += samples[i].weight;
        const double d = std::abs(cum - level);
        if (d < best) {  // strict: ties keep the smaller index
            best = d;
            best_index = i;
        }
    }
    return best_index;
}

DepthMap median_depth(const RayWeightField& field, DepthMode mode) {
    DepthMap out(field.width(), field.height());
    for (int y = 0; y < field.height(); ++y) {
        for (int x = 0; x < field.width(); ++x) {
            const auto samples = field.ray(x, y);
            double total = 0.0;
            for (const auto& s : samples) total += s.weight;
            if (total < 0.5 || samples.empty()) continue;
            const double depth =
                mode == DepthMode::Nerf
                    ? interpolate_cumulative(samples, 0.5)
                    : samples[closest_cumulative_index(samples, 0.5)].t_mid();
            if (std::isfinite(depth) && depth > 0.0) out.set(x, y, depth);
        }
    }
    return out;
}

}  // namespace labelforge
