#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "labelforge/assess.hpp"
#include "labelforge/geometry.hpp"
#include "labelforge/labels.hpp"
#include "labelforge/render.hpp"
#include "labelforge/scene.hpp"

namespace labelforge {

enum class Backend { Analytic, NerfDensity, Splats };

const char* to_string(Backend b);
Backend parse_backend(const std::string& s);
const char* to_string(Task t);
Task parse_task(const std::string& s);

/// Random floaters added to the rendered fields. `fraction` is relative to
/// the splat count of the splat representation; `count` wins when non-zero.
struct FloaterSpec {
    std::size_t count = 0;
    double fraction = 0.0;
    std::uint64_t seed = 0;
    double near = 1.0;
    double far = 6.0;
};

/// Scene file contents. Primitives serve the analytic oracle, the density
/// field (with their density settings) and, through splatify, the splat field.
struct SceneSpec {
    std::string id = "scene";
    Backend backend = Backend::Analytic;
    CameraIntrinsics camera{100.0, 100.0, 79.5, 63.5, 160, 128};
    RigidPose pose;
    std::vector<DensityPrimitive> primitives;
    std::vector<SplatPrimitive> splats;      ///< explicit splats, used as-is
    std::optional<SplatifyOptions> splatify; ///< splat cover of the primitives
    FloaterSpec floaters;

    AnalyticScene analytic() const;
};

/// Renderable forms of a scene, with floaters applied.
struct BuiltScene {
    AnalyticScene analytic;
    DensityScene density;
    SplatScene splats;
};

BuiltScene build_scene(const SceneSpec& spec);

/// Parsing rejects unknown keys and malformed values with ConfigError.
SceneSpec parse_scene(const std::string& json_text);
SceneSpec load_scene(const std::filesystem::path& path);
std::string dump_scene(const SceneSpec& spec);

enum class DepthEstimator { Median, Mean };
enum class OcclusionSource { Auto, RayIntegral, ForwardBackward };

struct RunConfig {
    std::string scene_path;                 ///< resolved relative to the config file
    std::optional<SceneSpec> scene;         ///< inline scene, or loaded from scene_path
    std::optional<Backend> backend;         ///< overrides the scene's backend
    Task task = Task::Flow;
    int pairs = 4;
    std::uint64_t seed = 0;
    int jobs = 1;
    double rotation_amplitude = 0.03;       ///< radians, frame 1 -> frame 2
    double translation_amplitude = 0.15;
    double viewpoint_rotation = 0.05;       ///< spread of frame-1 cameras around the scene camera
    double viewpoint_translation = 0.2;
    double baseline = 0.1;
    RaySampling sampling{0.5, 12.0, 384};
    DepthEstimator depth = DepthEstimator::Median;
    OcclusionSource occlusion = OcclusionSource::Auto;
    ThresholdConfig thresholds;
    MaskSelection selection;
    SsimOptions ssim;
    int foreground_count = 0;               ///< synthetic 2D foregrounds per pair, at most 2
    int foreground_size = 40;
    bool dump_rayfields = false;

    void validate() const;
};

RunConfig parse_run_config(const std::string& json_text,
                           const std::filesystem::path& base_dir = ".");
RunConfig load_run_config(const std::filesystem::path& path);

struct PairRecord {
    std::string id;
    Task task = Task::Flow;
    std::map<std::string, std::string> files;     ///< role -> path relative to the manifest
    std::map<std::string, std::uint32_t> checksums; ///< path -> crc32
    CameraIntrinsics intrinsics;
    RigidPose pose1;
    RigidPose pose2;
    double baseline = 0.0;
    std::string scene_id;
    std::uint64_t seed = 0;
    std::optional<double> gc_l;
};

struct DatasetManifest {
    int version = 1;
    Task task = Task::Flow;
    std::string backend;
    std::string depth;
    std::uint64_t seed = 0;
    std::vector<PairRecord> pairs;
};

std::string dump_manifest(const DatasetManifest& m);
DatasetManifest parse_manifest(const std::string& json_text);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Camera description for assessing a pair outside a dataset:
/// {"intrinsics": {...}, "pose1": pose, "pose2": pose}.
struct CameraFile {
    CameraIntrinsics intrinsics;
    RigidPose pose1;
    RigidPose pose2;
};

CameraFile parse_camera_file(const std::string& json_text);
CameraFile load_camera_file(const std::filesystem::path& path);

/// Pose as {"rotation": 9 row-major floats, "translation": 3 floats}.
std::string dump_pose(const RigidPose& pose);

}  // namespace labelforge
