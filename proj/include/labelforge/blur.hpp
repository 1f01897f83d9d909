#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "labelforge/grid.hpp"

namespace labelforge {

struct BlurConfig {
    double edge_grad_threshold = 0.1;      ///< on images normalized to [0,1]
    int dilate_radius = 3;
    double highpass_radius_fraction = 0.25;
    double no_texture_fraction = 0.001;

    void validate() const;
};

enum class BlurDecision { Keep, Drop, NoTexture };

const char* to_string(BlurDecision d);

struct BlurReport {
    double score = 0.0;
    double edge_fraction = 0.0;
    BlurDecision decision = BlurDecision::Keep;
};

/// Edge-selective high-frequency score: mean magnitude of the FFT high-pass
/// residual over dilated edges. Images smaller than 32x32 are rejected.
BlurReport esfft_score(const GrayImage& image, const BlurConfig& cfg = {});

/// Min-max normalized copy; constant images map to zero.
GrayImage normalize_range(const GrayImage& image);

/// Pixels whose central-difference gradient magnitude exceeds `threshold`,
/// dilated by a disk of `radius`.
BinaryMask edge_mask(const GrayImage& image, double threshold, int radius);

/// Image with its low-frequency disk removed, via a real 2D FFT of the
/// mirror-extended image. The radius is in cycles per image.
GrayImage highpass(const GrayImage& image, double radius_fraction);

struct FilterEntry {
    std::string file;
    BlurReport report;
};

struct FilterResult {
    std::vector<FilterEntry> entries;
    std::vector<std::string> kept;
    std::vector<std::string> dropped;
    std::vector<std::pair<std::string, std::string>> errors;  ///< file, message
};

/// Scores every regular file in `dir` (sorted by name). A file is dropped
/// when its score is below `threshold` and it has texture; files that do
/// not decode are reported and skipped.
FilterResult filter_directory(const std::filesystem::path& dir, const BlurConfig& cfg,
                              double threshold);

}  // namespace labelforge
