#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "labelforge/foreground.hpp"
#include "labelforge/grid.hpp"
#include "labelforge/labels.hpp"
#include "labelforge/render.hpp"

namespace labelforge {

namespace fs = std::filesystem;

/// Values above this magnitude in a .flo file mark an invalid pixel.
inline constexpr double kFloInvalidBound = 1e9;
inline constexpr float kFloInvalidValue = 1e10f;

void write_flo(const FlowField& flow, const fs::path& path);
FlowField read_flo(const fs::path& path);

/// Single-channel little-endian PFM, bottom-up rows, NaN for invalid pixels.
void write_pfm(const Grid<double>& value, const BinaryMask& valid, const fs::path& path);

template <typename Tag>
void write_pfm(const ScalarField<Tag>& map, const fs::path& path) {
    write_pfm(map.value, map.valid, path);
}

/// Reads either byte order; non-finite samples come back invalid.
void read_pfm_raw(const fs::path& path, Grid<double>& value, BinaryMask& valid);

template <typename Tag>
ScalarField<Tag> read_pfm(const fs::path& path) {
    ScalarField<Tag> m;
    read_pfm_raw(path, m.value, m.valid);
    return m;
}

/// Decoded PNG samples. Palette images keep their indices; `palette` holds
/// the RGB entries.
struct PngData {
    int width = 0;
    int height = 0;
    int channels = 0;
    int bit_depth = 8;
    bool indexed = false;
    std::vector<std::uint16_t> samples;  ///< row-major, interleaved channels
    std::vector<std::array<std::uint8_t, 3>> palette;
};

PngData read_png(const fs::path& path);

/// channels: 1 (gray), 3 (rgb) or 4 (rgba); bit_depth 8 or 16.
void write_png(const fs::path& path, int width, int height, int channels, int bit_depth,
               const std::vector<std::uint16_t>& samples);

/// RGB in [0,1]. Gray, palette and alpha inputs are converted.
RgbImage read_png_rgb(const fs::path& path);
void write_png_rgb8(const RgbImage& image, const fs::path& path);
void write_png_rgb16(const RgbImage& image, const fs::path& path);

/// Masks are stored as 8-bit 0/255; any non-zero sample reads back as 1.
void write_mask_png(const BinaryMask& mask, const fs::path& path);
BinaryMask read_mask_png(const fs::path& path);

/// 16-bit disparity, round(d * 256) with 0 meaning invalid. Throws
/// RangeError for d outside [0, 255.99).
void write_disparity_png16(const DisparityMap& map, const fs::path& path);
DisparityMap read_disparity_png16(const fs::path& path);

/// Color-wheel rendering: hue from direction, saturation from magnitude
/// relative to `max_flow` (or the largest valid magnitude when unset).
RgbImage flow_to_color(const FlowField& flow, std::optional<double> max_flow = std::nullopt);
void flow_colorwheel_png(const FlowField& flow, const fs::path& path,
                         std::optional<double> max_flow = std::nullopt);

/// Heatmap of a metric map over [lo, hi]; invalid pixels are black.
RgbImage metric_heatmap(const MetricMap& map, double lo = 0.0, double hi = 1.0);

/// Segmentation masks from an indexed/gray PNG (one mask per non-zero
/// value, ascending) or a directory of binary PNGs (one per file, sorted by
/// name). `ids` receives the value or filename stem of each mask.
SegMaskSet read_segmentation(const fs::path& path, std::vector<std::string>* ids = nullptr);

/// Asset bundle directory: frame1.png, frame2.png (16-bit RGB), alpha1.png,
/// alpha2.png, label.flo (flow) or label.pfm (stereo disparity), meta.json.
void write_asset(const ForegroundAsset& asset, const fs::path& dir);
ForegroundAsset read_asset(const fs::path& dir);

/// Debug dump: "LFRW", int32 width, int32 height, then per pixel a uint32
/// sample count followed by float32 (t_lo, t_hi, weight) triples.
void write_rayfield(const RayWeightField& field, const fs::path& path);
RayWeightField read_rayfield(const fs::path& path);

/// CRC-32 of a file's bytes.
std::uint32_t file_crc32(const fs::path& path);

std::vector<std::uint8_t> read_bytes(const fs::path& path);
void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace labelforge
