#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "labelforge/config.hpp"
#include "labelforge/geometry.hpp"
#include "labelforge/grid.hpp"
#include "labelforge/labels.hpp"
#include "labelforge/render.hpp"
#include "labelforge/rng.hpp"
#include "labelforge/scene.hpp"

namespace testsupport {

using namespace labelforge;

inline CameraIntrinsics small_camera(int w = 160, int h = 128) {
    return {100.0, 100.0, (w - 1) * 0.5, (h - 1) * 0.5, w, h};
}

RigidPose random_pose(Rng& rng, double rot = 3.14, double trans = 2.0);

AnalyticPrimitive checker_plane(const Vec3& normal, double offset, double cell = 0.5);
AnalyticPrimitive sphere(const Vec3& center, double radius, Rgb a, Rgb b);

/// Back wall, floor and a few spheres in front of a camera at the origin looking down +z.
AnalyticScene random_analytic_scene(std::uint64_t seed);

/// Two fronto-parallel planes: a far wall and a narrower near panel.
AnalyticScene two_plane_scene();

DensityScene shells(const AnalyticScene& scene);

/// Separable gaussian blur, borders clamped.
GrayImage gaussian_blur(const GrayImage& img, double sigma);

GrayImage checkerboard(int w, int h, int cell, double lo = 0.1, double hi = 0.9, int phase = 0);

/// Random axis-aligned rectangles over a mid-gray background.
GrayImage rectangles(int w, int h, std::uint64_t seed);

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Exact visibility of each frame-1 pixel in camera 2 by ray casting the
/// analytic scene. Out-of-frame targets count as occluded.
OcclusionMask analytic_visibility(const AnalyticScene& scene, const CameraIntrinsics& K,
                                  const RigidPose& pose1, const RigidPose& pose2,
                                  const DepthMap& depth1);

std::string read_file(const std::filesystem::path& p);

}  // namespace testsupport
