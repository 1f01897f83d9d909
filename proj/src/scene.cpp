#include "labelforge/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "labelforge/error.hpp"
#include "labelforge/rng.hpp"

namespace labelforge {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Orthonormal tangent pair for a unit normal.
void tangent_basis(const Vec3& n, Vec3& u, Vec3& v) {
    const Vec3 helper = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    u = n.cross(helper).normalized();
    v = n.cross(u);
}

bool checker_parity(double a, double b, double cell) {
    const auto ia = static_cast<long long>(std::floor(a / cell));
    const auto ib = static_cast<long long>(std::floor(b / cell));
    return ((ia + ib) & 1LL) != 0;
}

Rgb lerp(const Rgb& a, const Rgb& b, double t) { return a * (1.0 - t) + b * t; }

}  // namespace

void AnalyticPrimitive::validate() const {
    std::visit(Overloaded{
                   [](const Sphere& s) {
                       if (!(s.radius > 0.0)) throw InvalidInput("sphere radius must be positive");
                   },
                   [](const Plane& p) {
                       if (std::abs(p.normal.norm() - 1.0) > 1e-9)
                           throw InvalidInput("plane normal must be unit length");
                   },
                   [](const Box& b) {
                       if (!(b.min.array() < b.max.array()).all())
                           throw InvalidInput("box min must be below max componentwise");
                   },
               },
               shape);
    if (!(texture.scale > 0.0)) throw InvalidInput("texture scale must be positive");
}

std::optional<Chord> solid_chord(const Shape& shape, const Ray& ray) {
    return std::visit(
        Overloaded{
            [&](const Sphere& s) -> std::optional<Chord> {
                const Vec3 oc = ray.origin - s.center;
                const double a = ray.direction.squaredNorm();
                const double half_b = ray.direction.dot(oc);
                const double c = oc.squaredNorm() - s.radius * s.radius;
                const double disc = half_b * half_b - a * c;
                if (disc < 0.0) return std::nullopt;
                const double root = std::sqrt(disc);
                // Numerically stable pair of roots.
                const double q = half_b >= 0.0 ? -(half_b + root) : -(half_b - root);
                double t0 = q / a;
                double t1 = q != 0.0 ? c / q : -t0;
                if (t0 > t1) std::swap(t0, t1);
                return Chord{t0, t1};
            },
            [&](const Plane& p) -> std::optional<Chord> {
                const double denom = p.normal.dot(ray.direction);
                const double num = p.offset - p.normal.dot(ray.origin);
                if (std::abs(denom) < 1e-15) {
                    if (num >= 0.0) return Chord{-kInf, kInf};
                    return std::nullopt;
                }
                const double t = num / denom;
                if (denom > 0.0) return Chord{-kInf, t};
                return Chord{t, kInf};
            },
            [&](const Box& b) -> std::optional<Chord> {
                double t0 = -kInf;
                double t1 = kInf;
                for (int i = 0; i < 3; ++i) {
                    const double o = ray.origin[i];
                    const double d = ray.direction[i];
                    if (std::abs(d) < 1e-15) {
                        if (o < b.min[i] || o > b.max[i]) return std::nullopt;
                        continue;
                    }
                    double ta = (b.min[i] - o) / d;
                    double tb = (b.max[i] - o) / d;
                    if (ta > tb) std::swap(ta, tb);
                    t0 = std::max(t0, ta);
                    t1 = std::min(t1, tb);
                    if (t0 > t1) return std::nullopt;
                }
                return Chord{t0, t1};
            },
        },
        shape);
}

std::optional<Shape> inset_shape(const Shape& shape, double inset) {
    return std::visit(
        Overloaded{
            [&](const Sphere& s) -> std::optional<Shape> {
                if (s.radius - inset <= 0.0) return std::nullopt;
                return Shape{Sphere{s.center, s.radius - inset}};
            },
            [&](const Plane& p) -> std::optional<Shape> {
                return Shape{Plane{p.normal, p.offset - inset}};
            },
            [&](const Box& b) -> std::optional<Shape> {
                const Vec3 lo = b.min.array() + inset;
                const Vec3 hi = b.max.array() - inset;
                if (!(lo.array() < hi.array()).all()) return std::nullopt;
                return Shape{Box{lo, hi}};
            },
        },
        shape);
}

std::optional<double> intersect(const Shape& shape, const Ray& ray, double t_min) {
    const auto chord = solid_chord(shape, ray);
    if (!chord) return std::nullopt;
    if (std::isfinite(chord->t0) && chord->t0 > t_min) return chord->t0;
    if (std::isfinite(chord->t1) && chord->t1 > t_min) return chord->t1;
    return std::nullopt;
}

Rgb albedo_at(const AnalyticPrimitive& prim, const Vec3& point) {
    const Texture& tex = prim.texture;
    switch (tex.kind) {
        case Texture::Kind::Constant:
            return tex.color_a;
        case Texture::Kind::Gradient: {
            const double s = point.dot(tex.axis) / tex.scale;
            const double tri = std::abs(s - 2.0 * std::floor(s * 0.5) - 1.0);  // triangle wave in [0,1]
            return lerp(tex.color_a, tex.color_b, tri);
        }
        case Texture::Kind::Checkerboard:
            break;
    }
    const bool odd = std::visit(
        Overloaded{
            [&](const Plane& p) {
                Vec3 u, v;
                tangent_basis(p.normal, u, v);
                return checker_parity(point.dot(u), point.dot(v), tex.scale);
            },
            [&](const Sphere& s) {
                const Vec3 d = (point - s.center) / s.radius;
                const double lon = std::atan2(d.y(), d.x());
                const double lat = std::acos(std::clamp(d.z(), -1.0, 1.0));
                return checker_parity(lon * s.radius, lat * s.radius, tex.scale);
            },
            [&](const Box& b) {
                // Use the two in-face axes of the nearest face.
                int face_axis = 0;
                double best = kInf;
                for (int i = 0; i < 3; ++i) {
                    const double d = std::min(std::abs(point[i] - b.min[i]), std::abs(point[i] - b.max[i]));
                    if (d < best) {
                        best = d;
                        face_axis = i;
                    }
                }
                const int a0 = (face_axis + 1) % 3;
                const int a1 = (face_axis + 2) % 3;
                return checker_parity(point[a0] - b.min[a0], point[a1] - b.min[a1], tex.scale);
            },
        },
        prim.shape);
    return odd ? tex.color_b : tex.color_a;
}

std::optional<Hit> AnalyticScene::first_hit(const Ray& ray, double t_min) const {
    std::optional<Hit> best;
    for (std::size_t i = 0; i < primitives.size(); ++i) {
        const auto t = intersect(primitives[i].shape, ray, t_min);
        if (t && (!best || *t < best->t)) best = Hit{*t, i};
    }
    return best;
}

std::vector<DensitySegment> DensityScene::segments(const Ray& ray, double near, double far) const {
    std::vector<DensitySegment> out;
    auto emit = [&](double a, double b, double sigma, std::size_t idx) {
        a = std::max(a, near);
        b = std::min(b, far);
        if (b > a && sigma > 0.0) out.push_back({a, b, sigma, idx});
    };
    for (std::size_t i = 0; i < primitives.size(); ++i) {
        const DensityPrimitive& dp = primitives[i];
        const auto outer = solid_chord(dp.primitive.shape, ray);
        if (!outer) continue;
        if (dp.mode == DensityPrimitive::Mode::Volume) {
            emit(outer->t0, outer->t1, dp.sigma, i);
            continue;
        }
        const auto inner_shape = inset_shape(dp.primitive.shape, dp.shell_thickness);
        std::optional<Chord> inner;
        if (inner_shape) inner = solid_chord(*inner_shape, ray);
        if (!inner || inner->t1 <= outer->t0 || inner->t0 >= outer->t1) {
            emit(outer->t0, outer->t1, dp.sigma, i);
            continue;
        }
        emit(outer->t0, std::min(inner->t0, outer->t1), dp.sigma, i);
        emit(std::max(inner->t1, outer->t0), outer->t1, dp.sigma, i);
    }
    std::sort(out.begin(), out.end(), [](const DensitySegment& a, const DensitySegment& b) {
        return a.t0 < b.t0 || (a.t0 == b.t0 && a.primitive < b.primitive);
    });
    return out;
}

void SplatPrimitive::validate() const {
    if (!(scale.array() > 0.0).all()) throw InvalidInput("splat scales must be positive");
    if (std::abs(orientation.norm() - 1.0) > 1e-9)
        throw InvalidInput("splat orientation must be a unit quaternion");
    if (!(opacity >= 0.0 && opacity <= 1.0)) throw InvalidInput("splat opacity must lie in [0,1]");
}

Mat3 SplatPrimitive::covariance() const {
    const Mat3 r = orientation.toRotationMatrix();
    const Mat3 s = scale.asDiagonal();
    return r * s * s * r.transpose();
}

DensityScene to_density_scene(const AnalyticScene& scene, double sigma, double shell_thickness) {
    DensityScene out;
    for (const auto& prim : scene.primitives)
        out.primitives.push_back({prim, DensityPrimitive::Mode::Shell, sigma, shell_thickness});
    return out;
}

namespace {

// Rotation taking the local z axis to the given unit normal.
Eigen::Quaterniond orientation_for_normal(const Vec3& n) {
    return Eigen::Quaterniond::FromTwoVectors(Vec3::UnitZ(), n).normalized();
}

bool inside_box(const Box& b, const Vec3& p) {
    return (p.array() >= b.min.array()).all() && (p.array() <= b.max.array()).all();
}

void emit_surface_splat(SplatScene& out, const AnalyticPrimitive& prim, const Vec3& p,
                        const Vec3& normal, const SplatifyOptions& opts) {
    if (!inside_box(opts.clip, p)) return;
    SplatPrimitive s;
    s.mean = p;
    const double lateral = opts.spacing * opts.scale_factor;
    s.scale = Vec3(lateral, lateral, lateral * opts.thickness_ratio);
    s.orientation = orientation_for_normal(normal);
    s.opacity = opts.opacity;
    s.color = albedo_at(prim, p);
    out.splats.push_back(s);
}

void splat_rectangle(SplatScene& out, const AnalyticPrimitive& prim, const Vec3& origin,
                     const Vec3& u, const Vec3& v, double len_u, double len_v,
                     const Vec3& normal, const SplatifyOptions& opts) {
    const int nu = std::max(1, static_cast<int>(std::ceil(len_u / opts.spacing)));
    const int nv = std::max(1, static_cast<int>(std::ceil(len_v / opts.spacing)));
    for (int j = 0; j <= nv; ++j)
        for (int i = 0; i <= nu; ++i)
            emit_surface_splat(out, prim, origin + u * (len_u * i / nu) + v * (len_v * j / nv),
                               normal, opts);
}

}  // namespace

SplatScene splatify(const AnalyticScene& scene, const SplatifyOptions& opts) {
    if (!(opts.spacing > 0.0)) throw InvalidInput("splat spacing must be positive");
    SplatScene out;
    for (const auto& prim : scene.primitives) {
        std::visit(
            Overloaded{
                [&](const Plane& p) {
                    Vec3 u, v;
                    tangent_basis(p.normal, u, v);
                    const Vec3 center = 0.5 * (opts.clip.min + opts.clip.max);
                    const Vec3 foot = center - p.normal * (p.normal.dot(center) - p.offset);
                    const double half = 0.5 * (opts.clip.max - opts.clip.min).norm();
                    splat_rectangle(out, prim, foot - u * half - v * half, u, v, 2 * half, 2 * half,
                                    p.normal, opts);
                },
                [&](const Sphere& s) {
                    // Fibonacci lattice with roughly `spacing` between neighbors.
                    const double area = 4.0 * std::numbers::pi * s.radius * s.radius;
                    const auto n = std::max<std::size_t>(
                        8, static_cast<std::size_t>(std::ceil(area / (opts.spacing * opts.spacing))));
                    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
                    for (std::size_t k = 0; k < n; ++k) {
                        const double z = 1.0 - 2.0 * (k + 0.5) / static_cast<double>(n);
                        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
                        const double phi = golden * static_cast<double>(k);
                        const Vec3 dir(r * std::cos(phi), r * std::sin(phi), z);
                        emit_surface_splat(out, prim, s.center + dir * s.radius, dir, opts);
                    }
                },
                [&](const Box& b) {
                    const Vec3 size = b.max - b.min;
                    for (int axis = 0; axis < 3; ++axis) {
                        const int a0 = (axis + 1) % 3;
                        const int a1 = (axis + 2) % 3;
                        const Vec3 u = Vec3::Unit(a0);
                        const Vec3 v = Vec3::Unit(a1);
                        for (int side = 0; side < 2; ++side) {
                            Vec3 origin = b.min;
                            if (side == 1) origin[axis] = b.max[axis];
                            const Vec3 normal = Vec3::Unit(axis) * (side == 1 ? 1.0 : -1.0);
                            splat_rectangle(out, prim, origin, u, v, size[a0], size[a1], normal, opts);
                        }
                    }
                },
            },
            prim.shape);
    }
    return out;
}

std::vector<Floater> random_floaters(std::size_t count, const CameraIntrinsics& K,
                                     const RigidPose& camera, double near, double far,
                                     std::uint64_t seed) {
    if (!(near > 0.0) || !(far > near)) throw InvalidInput("floater depth range is degenerate");
    Rng rng(seed);
    std::vector<Floater> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const PixelCoord p{rng.uniform(0.0, K.width - 1.0), rng.uniform(0.0, K.height - 1.0)};
        const double depth = rng.uniform(near, far);
        Floater f;
        f.center = backproject(p, depth, K, camera);
        // Radius of a few pixels at its depth.
        f.radius = depth * rng.uniform(2.0, 6.0) / K.fx;
        f.opacity = rng.uniform(0.3, 0.7);
        f.color = {rng.uniform(), rng.uniform(), rng.uniform()};
        out.push_back(f);
    }
    return out;
}

void add_floaters(SplatScene& scene, const std::vector<Floater>& floaters) {
    for (const auto& f : floaters) {
        SplatPrimitive s;
        s.mean = f.center;
        s.scale = Vec3::Constant(0.5 * f.radius);
        s.opacity = f.opacity;
        s.color = f.color;
        scene.splats.push_back(s);
    }
}

void add_floaters(DensityScene& scene, const std::vector<Floater>& floaters) {
    for (const auto& f : floaters) {
        DensityPrimitive dp;
        dp.primitive.shape = Sphere{f.center, f.radius};
        dp.primitive.texture.kind = Texture::Kind::Constant;
        dp.primitive.texture.color_a = f.color;
        dp.mode = DensityPrimitive::Mode::Volume;
        dp.sigma = -std::log(1.0 - std::min(f.opacity, 0.999999)) / (2.0 * f.radius);
        scene.primitives.push_back(dp);
    }
}

}  // namespace labelforge
