#include "labelforge/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "labelforge/error.hpp"
#include "labelforge/rng.hpp"

namespace labelforge {

void CameraIntrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidInput("focal lengths must be positive");
    if (width <= 0 || height <= 0) throw InvalidInput("image size must be positive");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
        throw InvalidInput("principal point must lie inside the image");
}

Mat3 CameraIntrinsics::matrix() const {
    Mat3 k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
}

void RigidPose::validate() const {
    const Mat3 err = rotation.transpose() * rotation - Mat3::Identity();
    if (err.cwiseAbs().maxCoeff() > 1e-9) throw InvalidInput("rotation is not orthonormal");
    if (std::abs(rotation.determinant() - 1.0) > 1e-9)
        throw InvalidInput("rotation determinant is not +1");
    if (!translation.allFinite()) throw InvalidInput("translation is not finite");
}

RigidPose RigidPose::inverse() const {
    RigidPose inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.rotation * translation);
    return inv;
}

RigidPose RigidPose::operator*(const RigidPose& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
}

Vec3 backproject(const PixelCoord& p, double depth, const CameraIntrinsics& K,
                 const RigidPose& pose) {
    if (!(depth > 0.0) || !std::isfinite(depth))
        throw InvalidInput("backproject: depth must be positive and finite");
    const Vec3 cam((p.u - K.cx) / K.fx * depth, (p.v - K.cy) / K.fy * depth, depth);
    return pose.to_world(cam);
}

Projection project(const Vec3& world, const CameraIntrinsics& K, const RigidPose& pose) {
    const Vec3 cam = pose.to_camera(world);
    Projection out;
    out.depth = cam.z();
    out.behind_camera = !(cam.z() > 0.0);
    out.pixel.u = K.fx * cam.x() / cam.z() + K.cx;
    out.pixel.v = K.fy * cam.y() / cam.z() + K.cy;
    return out;
}

bool in_frame(const PixelCoord& p, const CameraIntrinsics& K) {
    return p.u >= -0.5 && p.v >= -0.5 && p.u < K.width - 0.5 && p.v < K.height - 0.5;
}

Ray pixel_ray(const PixelCoord& p, const CameraIntrinsics& K, const RigidPose& pose) {
    const Vec3 dir_cam((p.u - K.cx) / K.fx, (p.v - K.cy) / K.fy, 1.0);
    return {pose.translation, pose.rotation * dir_cam};
}

namespace {

// Uniform direction on the unit sphere.
Vec3 random_unit(Rng& rng) {
    const double z = rng.uniform(-1.0, 1.0);
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
}

}  // namespace

RigidPose compose_perturbed_pose(const RigidPose& base, double rot_amplitude,
                                 double trans_amplitude, std::uint64_t seed) {
    if (rot_amplitude < 0.0 || trans_amplitude < 0.0)
        throw InvalidInput("perturbation amplitudes must be non-negative");
    if (rot_amplitude == 0.0 && trans_amplitude == 0.0) return base;

    Rng rng(seed);
    const Vec3 axis = random_unit(rng);
    const double angle = rng.uniform() * rot_amplitude;
    const Vec3 dir = random_unit(rng);
    // Uniform inside the ball of radius trans_amplitude.
    const double norm = std::cbrt(rng.uniform()) * trans_amplitude;

    const Mat3 delta_r = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
    const Vec3 delta_t = dir * norm;

    RigidPose out;
    out.rotation = base.rotation * delta_r;
    out.translation = base.translation + base.rotation * delta_t;
    return out;
}

RigidPose stereo_pose(const RigidPose& base, double baseline) {
    if (!(baseline > 0.0)) throw InvalidInput("stereo baseline must be positive");
    RigidPose out = base;
    out.translation = base.translation + base.rotation.col(0) * baseline;
    return out;
}

double rotation_angle(const Mat3& r) {
    const double c = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
    return std::acos(c);
}

RigidPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
    const Vec3 z = (target - eye).normalized();
    Vec3 x = (-up).cross(z);
    if (x.norm() < 1e-12) x = Vec3::UnitX().cross(z);
    x.normalize();
    const Vec3 y = z.cross(x);
    RigidPose pose;
    pose.rotation.col(0) = x;
    pose.rotation.col(1) = y;
    pose.rotation.col(2) = z;
    pose.translation = eye;
    return pose;
}

}  // namespace labelforge
