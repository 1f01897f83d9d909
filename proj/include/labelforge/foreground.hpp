#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "labelforge/assess.hpp"
#include "labelforge/labels.hpp"

namespace labelforge {

/// Binary segmentation masks over one frame; masks may overlap.
class SegMaskSet {
public:
    SegMaskSet() = default;
    SegMaskSet(int width, int height) : width_(width), height_(height) {}

    /// Throws InvalidInput on an empty mask or a grid mismatch.
    void add(BinaryMask mask);

    std::size_t size() const { return masks_.size(); }
    int width() const { return width_; }
    int height() const { return height_; }
    const BinaryMask& operator[](std::size_t i) const { return masks_[i]; }
    std::size_t pixel_count(std::size_t i) const { return counts_[i]; }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<BinaryMask> masks_;
    std::vector<std::size_t> counts_;
};

/// N1 x N2 coverage ratios, indexed (frame-1 mask, frame-2 mask) in both directions.
using CoincidenceMatrix = Eigen::MatrixXd;

struct CoincidencePair {
    CoincidenceMatrix forward;   ///< share of frame-1 mask i covered by warped frame-2 mask j
    CoincidenceMatrix backward;  ///< share of frame-2 mask j covered by warped frame-1 mask i
};

/// Mask pulled back along a flow with nearest-neighbor lookup:
/// out(p) = mask(round(p + f(p))).
BinaryMask warp_mask_nearest(const BinaryMask& mask, const FlowField& flow);

CoincidencePair coincidence_matrices(const SegMaskSet& set1, const SegMaskSet& set2,
                                     const FlowField& forward, const FlowField& backward);

struct MaskMatch {
    std::size_t first = 0;
    std::size_t second = 0;
    bool operator==(const MaskMatch&) const = default;
};

/// Bidirectional argmax matching with a coverage floor in both directions.
/// Argmax ties prefer the candidate with larger coverage in the other
/// direction, then the smaller index.
std::vector<MaskMatch> match_masks(const CoincidencePair& m, double coverage_min = 0.95);

/// Object crop pair with its own motion. Flow values are in pixels of the
/// source frames and are stored on the frame-1 crop grid.
struct ForegroundAsset {
    Task task = Task::Flow;
    RgbImage frame1;
    RgbImage frame2;
    BinaryMask alpha1;
    BinaryMask alpha2;
    FlowField flow;
    PixelBox box1;
    PixelBox box2;

    bool operator==(const ForegroundAsset&) const = default;
};

struct ExtractOptions {
    double min_surviving = 0.5;
    MaskSelection selection{true, false, true, true};
    DepthMode mode = DepthMode::Nerf;
};

/// Crop a matched object out of a labeled pair. Label validity is the
/// frame-1 mask intersected with the fused quality masks. Returns nullopt
/// when fewer than `min_surviving` of the mask pixels keep a label.
std::optional<ForegroundAsset> extract_foreground(const LabeledPair& pair, const MaskMatch& match,
                                                  const SegMaskSet& masks1,
                                                  const SegMaskSet& masks2,
                                                  const QualityMaps& quality,
                                                  const ThresholdConfig& cfg,
                                                  const ExtractOptions& opts = {});

/// x -> c + A (x - c) + b, with c the polygon center.
struct Affine2 {
    Mat2 linear = Mat2::Identity();
    Vec2 offset = Vec2::Zero();

    static Affine2 identity() { return {}; }
    static Affine2 translation(double du, double dv);
    static Affine2 rotation(double radians);
    Vec2 apply(const Vec2& x, const Vec2& center) const { return center + linear * (x - center) + offset; }
};

/// Textured random star polygon of `width` x `height` pixels moving by
/// `motion` about its center. The label is the exact affine flow.
ForegroundAsset synth_2d_foreground(std::uint64_t texture_seed, int width, int height,
                                    const Affine2& motion);

/// Similarity placement of an asset into a target pair: a source point x of
/// frame 1 lands at scale * R(angle) (x - source_center) + target_center, and
/// frame-2 content is shifted by an extra `delta`.
struct Placement {
    double scale = 1.0;
    double angle = 0.0;
    Vec2 target_center = Vec2::Zero();
    Vec2 delta = Vec2::Zero();
};

/// Seeded placement with scale in [0.5, 1.5] and the asset center inside
/// the frame. Stereo placements carry no rotation and no vertical delta.
Placement random_placement(const ForegroundAsset& asset, int width, int height, Task task,
                           std::uint64_t seed);

struct CompositeOptions {
    double stereo_margin = 5.0;  ///< foreground disparity exceeds the background maximum by this
};

/// Paste up to two assets into a labeled pair (later assets on top). Labels
/// change only on frame-1 footprints, frame-2 footprints, and background
/// pixels whose frame-2 target is covered by a frame-2 footprint (those
/// become invalid and occluded). Assets that land fully outside are skipped.
LabeledPair composite(const LabeledPair& background, const std::vector<ForegroundAsset>& assets,
                      const std::vector<Placement>& placements, const CompositeOptions& opts = {});

/// Seeded convenience overload drawing one placement per asset.
LabeledPair composite(const LabeledPair& background, const std::vector<ForegroundAsset>& assets,
                      std::uint64_t seed, const CompositeOptions& opts = {});

/// Pixels a composite may touch for the given placements: frame-1 and frame-2
/// footprints plus background pixels flowing into a frame-2 footprint.
BinaryMask composite_region(const LabeledPair& background,
                            const std::vector<ForegroundAsset>& assets,
                            const std::vector<Placement>& placements);

}  // namespace labelforge
