#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "labelforge/assess.hpp"
#include "labelforge/config.hpp"
#include "labelforge/foreground.hpp"
#include "labelforge/labels.hpp"

namespace labelforge {

struct PairPoses {
    RigidPose pose1;
    RigidPose pose2;
};

/// Frame-1 camera jittered around the scene camera, frame-2 camera from
/// the perturbation (flow) or the baseline (stereo). Seeded per pair index.
PairPoses pair_poses(const RunConfig& cfg, const SceneSpec& scene, int index);

DepthMode depth_mode(Backend b);

/// Everything computed for one pair before serialization.
struct PairProducts {
    LabeledPair pair;          ///< flow is the fused label
    FlowField raw_label;       ///< geometric label before fusion
    QualityMaps maps;
    BinaryMask fused_valid;
    RayWeightField field1;
    RayWeightField field2;
    PairPoses poses;
    std::uint64_t seed = 0;
    std::optional<double> gc_l;
};

/// Full chain for one pair: render, depth, label, occlusion, metrics, fusion
/// and optional synthetic foregrounds.
PairProducts generate_pair(const RunConfig& cfg, const SceneSpec& scene, const BuiltScene& built,
                           int index);

struct GenerateOptions {
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    bool force = false;    ///< replace an existing output directory
    std::ostream* log = nullptr;
};

/// Writes pairs/<id>/... and manifest.json into `out_dir`, built in a
/// sibling temporary directory and renamed into place on success.
DatasetManifest generate_dataset(RunConfig cfg, const std::filesystem::path& out_dir,
                                 const GenerateOptions& opts = {});

/// A manifest record with its files decoded.
struct LoadedPair {
    PairRecord record;
    LabeledPair pair;          ///< flow = fused label
    FlowField raw_label;
    QualityMaps maps;
};

LoadedPair load_pair(const std::filesystem::path& dataset_dir, const PairRecord& record);

struct AssessInputs {
    RgbImage frame1;
    RgbImage frame2;
    FlowField flow;
    std::optional<DepthMap> depth1;
    std::optional<DepthMap> depth2;
    std::optional<CameraIntrinsics> intrinsics;
    RigidPose pose1;
    RigidPose pose2;
    std::optional<OcclusionMask> occlusion;
    SsimOptions ssim;
};

struct AssessOutputs {
    MetricMap vss;
    std::optional<MetricMap> gc;
    std::optional<double> gc_l;
};

/// Re-scores an existing pair. GC needs both depths and the camera.
AssessOutputs assess_pair(const AssessInputs& in);

struct CheckResult {
    std::string pair;
    std::string check;
    bool ok = true;
    std::string detail;
};

struct ValidationReport {
    std::vector<CheckResult> checks;
    std::optional<double> gc_l;  ///< mean of the pair scores
    bool ok() const;
    std::string to_json() const;
};

/// Checksums, decodability, label-vs-geometry residuals and gc_l recomputation.
ValidationReport validate_dataset(const std::filesystem::path& manifest_path);

/// Flow color wheels and metric heatmaps for every pair of a dataset.
void preview_dataset(const std::filesystem::path& manifest_path, const std::filesystem::path& out_dir);

/// Extracts matched foreground assets of one pair into out_dir/asset_<k>.
/// Returns the number of assets written.
int extract_assets(const std::filesystem::path& manifest_path, const std::string& pair_id,
                   const std::filesystem::path& masks1, const std::filesystem::path& masks2,
                   const ThresholdConfig& thresholds, const std::filesystem::path& out_dir,
                   double coverage_min = 0.95);

/// Copies a dataset with up to two assets composited onto every pair.
DatasetManifest composite_dataset(const std::filesystem::path& manifest_path,
                                  const std::vector<std::filesystem::path>& asset_dirs, int count,
                                  std::uint64_t seed, const std::filesystem::path& out_dir,
                                  bool force = false);

/// Writes `build` into a temporary sibling of `out_dir` and renames it into
/// place once it returns.
void build_directory_atomically(const std::filesystem::path& out_dir, bool force,
                                const std::function<void(const std::filesystem::path&)>& build);

}  // namespace labelforge
