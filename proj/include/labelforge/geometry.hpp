#pragma once

#include <cstdint>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace labelforge {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// Pinhole intrinsics. Pixel centers sit at integer (u, v) = (column, row).
struct CameraIntrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 1;
    int height = 1;

    /// Throws InvalidInput when focal lengths or principal point are out of range.
    void validate() const;
    Mat3 matrix() const;
    bool operator==(const CameraIntrinsics&) const = default;
};

/// Camera-to-world rigid transform: x_world = rotation * x_cam + translation.
/// Camera frame is x right, y down, z forward.
struct RigidPose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static RigidPose identity() { return {}; }

    /// Throws InvalidInput unless rotation is orthonormal with det +1 (to 1e-9).
    void validate() const;
    Vec3 to_world(const Vec3& cam) const { return rotation * cam + translation; }
    Vec3 to_camera(const Vec3& world) const {
        return rotation.transpose() * (world - translation);
    }
    Vec3 center() const { return translation; }
    RigidPose inverse() const;
    RigidPose operator*(const RigidPose& rhs) const;
    bool operator==(const RigidPose& o) const {
        return rotation == o.rotation && translation == o.translation;
    }
};

struct PixelCoord {
    double u = 0.0;
    double v = 0.0;
    bool operator==(const PixelCoord&) const = default;
};

struct Projection {
    PixelCoord pixel;
    double depth = 0.0;  ///< camera-frame z
    bool behind_camera = false;
};

/// Lifts a pixel with camera-frame z-depth to a world point.
Vec3 backproject(const PixelCoord& p, double depth, const CameraIntrinsics& K,
                 const RigidPose& pose);

Projection project(const Vec3& world, const CameraIntrinsics& K, const RigidPose& pose);

/// True when the pixel coordinate lies inside the image, pixels covering
/// [-0.5, size - 0.5).
bool in_frame(const PixelCoord& p, const CameraIntrinsics& K);

/// World-space ray through a pixel. The direction has unit z in the camera
/// frame, so the ray parameter t equals camera-frame depth.
struct Ray {
    Vec3 origin;
    Vec3 direction;
    Vec3 at(double t) const { return origin + t * direction; }
};

Ray pixel_ray(const PixelCoord& p, const CameraIntrinsics& K, const RigidPose& pose);

/// base composed with a random camera-frame rotation of angle <= rot_amplitude
/// and translation of norm <= trans_amplitude. Deterministic in seed.
RigidPose compose_perturbed_pose(const RigidPose& base, double rot_amplitude,
                                 double trans_amplitude, std::uint64_t seed);

/// Right camera of a rectified pair: translated by baseline along the camera +x axis.
RigidPose stereo_pose(const RigidPose& base, double baseline);

/// Rotation angle of a rotation matrix in radians.
double rotation_angle(const Mat3& r);

/// Pose at `eye` looking at `target`, with world `up` mapped close to camera -y.
RigidPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3(0, -1, 0));

}  // namespace labelforge
