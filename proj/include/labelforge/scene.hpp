#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "labelforge/geometry.hpp"
#include "labelforge/grid.hpp"

namespace labelforge {

/// Procedural albedo. Checkerboards are parameterized per surface (plane
/// tangent axes, sphere longitude/latitude, box world lattice).
struct Texture {
    enum class Kind { Constant, Checkerboard, Gradient };
    Kind kind = Kind::Constant;
    Rgb color_a{0.8, 0.8, 0.8};
    Rgb color_b{0.2, 0.2, 0.2};
    double scale = 1.0;          ///< checker cell size, or gradient length
    Vec3 axis = Vec3::UnitX();   ///< gradient direction
};

struct Sphere {
    Vec3 center = Vec3::Zero();
    double radius = 1.0;
};

/// Half-space solid { x : normal . x <= offset }; the normal points out of the solid.
struct Plane {
    Vec3 normal = Vec3::UnitZ();
    double offset = 0.0;
};

struct Box {
    Vec3 min = Vec3::Zero();
    Vec3 max = Vec3::Ones();
};

using Shape = std::variant<Sphere, Plane, Box>;

struct AnalyticPrimitive {
    Shape shape;
    Texture texture;

    /// Throws InvalidInput on a degenerate shape.
    void validate() const;
};

struct Hit {
    double t = 0.0;
    std::size_t primitive = 0;
};

/// Parameter interval [t0, t1] where a ray is inside a convex solid; may be
/// unbounded for planes.
struct Chord {
    double t0 = 0.0;
    double t1 = 0.0;
};

std::optional<Chord> solid_chord(const Shape& shape, const Ray& ray);

/// Same solid pulled inward by `inset` along its surface normal; nullopt when
/// the inset consumes the solid.
std::optional<Shape> inset_shape(const Shape& shape, double inset);

/// First surface crossing with t > t_min.
std::optional<double> intersect(const Shape& shape, const Ray& ray, double t_min);

Rgb albedo_at(const AnalyticPrimitive& prim, const Vec3& point);

struct AnalyticScene {
    std::vector<AnalyticPrimitive> primitives;

    std::optional<Hit> first_hit(const Ray& ray, double t_min = 1e-9) const;
};

/// Density contributed by an analytic solid to a volumetric scene. Shell
/// primitives carry `sigma` within `shell_thickness` beneath their surface;
/// volume primitives carry it throughout the solid.
struct DensityPrimitive {
    enum class Mode { Shell, Volume };
    AnalyticPrimitive primitive;
    Mode mode = Mode::Shell;
    double sigma = 500.0;
    double shell_thickness = 0.05;
};

/// Piece of a ray with constant density.
struct DensitySegment {
    double t0 = 0.0;
    double t1 = 0.0;
    double sigma = 0.0;
    std::size_t primitive = 0;
};

struct DensityScene {
    std::vector<DensityPrimitive> primitives;

    /// Constant-density pieces of the ray restricted to [near, far]. Pieces of
    /// different primitives may overlap; densities add.
    std::vector<DensitySegment> segments(const Ray& ray, double near, double far) const;
};

/// Anisotropic 3D gaussian with constant color.
struct SplatPrimitive {
    Vec3 mean = Vec3::Zero();
    Vec3 scale = Vec3::Constant(0.05);             ///< per-axis standard deviations
    Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
    double opacity = 1.0;
    Rgb color{0.5, 0.5, 0.5};

    void validate() const;
    Mat3 covariance() const;
};

struct SplatScene {
    std::vector<SplatPrimitive> splats;
};

/// Volumetric counterpart of an analytic scene: every primitive becomes an
/// opaque shell.
DensityScene to_density_scene(const AnalyticScene& scene, double sigma, double shell_thickness);

struct SplatifyOptions {
    double spacing = 0.04;        ///< target distance between neighboring splat centers
    double scale_factor = 0.8;    ///< in-surface std-dev relative to spacing
    double thickness_ratio = 0.05;
    double opacity = 0.95;
    /// Only splats whose centers fall inside this region are emitted; it
    /// bounds the otherwise infinite planes.
    Box clip{Vec3::Constant(-10.0), Vec3::Constant(10.0)};
};

/// Surface splat cover of an analytic scene: flat gaussians tangent to each
/// surface, colored by the surface albedo.
SplatScene splatify(const AnalyticScene& scene, const SplatifyOptions& opts);

/// Free-space clutter: a soft blob that is not part of any surface.
struct Floater {
    Vec3 center = Vec3::Zero();
    double radius = 0.1;
    double opacity = 0.5;   ///< opacity along a ray through the center
    Rgb color{0.5, 0.5, 0.5};
};

/// Floaters scattered inside the camera frustum with depths in [near, far].
std::vector<Floater> random_floaters(std::size_t count, const CameraIntrinsics& K,
                                     const RigidPose& camera, double near, double far,
                                     std::uint64_t seed);

/// Isotropic splat per floater, std-dev radius / 2.
void add_floaters(SplatScene& scene, const std::vector<Floater>& floaters);

/// Constant-density sphere per floater, sigma chosen so a central chord
/// reaches the floater's opacity.
void add_floaters(DensityScene& scene, const std::vector<Floater>& floaters);

}  // namespace labelforge
