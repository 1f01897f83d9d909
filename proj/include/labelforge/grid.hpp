#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace labelforge {

/// Dense row-major 2D buffer indexed as (x = column, y = row).
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(int width, int height, T fill = T{})
        : width_(width), height_(height),
          data_(static_cast<std::size_t>(checked(width) * checked(height)), fill) {}

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
    bool same_shape(int w, int h) const { return w == width_ && h == height_; }
    template <typename U>
    bool same_shape(const Grid<U>& other) const {
        return width_ == other.width() && height_ == other.height();
    }

    T& operator()(int x, int y) { return data_[index(x, y)]; }
    const T& operator()(int x, int y) const { return data_[index(x, y)]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    auto begin() { return data_.begin(); }
    auto end() { return data_.end(); }
    auto begin() const { return data_.begin(); }
    auto end() const { return data_.end(); }

    bool operator==(const Grid&) const = default;

private:
    static long checked(int n) {
        if (n < 0) throw std::invalid_argument("grid dimensions must be non-negative");
        return n;
    }
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

struct Rgb {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;

    bool operator==(const Rgb&) const = default;
    Rgb operator+(const Rgb& o) const { return {r + o.r, g + o.g, b + o.b}; }
    Rgb operator*(double s) const { return {r * s, g * s, b * s}; }
    Rgb& operator+=(const Rgb& o) {
        r += o.r;
        g += o.g;
        b += o.b;
        return *this;
    }
    double luma() const { return 0.299 * r + 0.587 * g + 0.114 * b; }
};

using RgbImage = Grid<Rgb>;
using GrayImage = Grid<double>;
using BinaryMask = Grid<std::uint8_t>;

/// Scalar per-pixel map with a validity flag. The tag keeps depth, disparity
/// and metric maps from being mixed up at call sites.
template <typename Tag>
struct ScalarField {
    Grid<double> value;
    BinaryMask valid;

    ScalarField() = default;
    ScalarField(int width, int height) : value(width, height, 0.0), valid(width, height, 0) {}

    int width() const { return value.width(); }
    int height() const { return value.height(); }
    bool is_valid(int x, int y) const { return valid(x, y) != 0; }
    void set(int x, int y, double v) {
        value(x, y) = v;
        valid(x, y) = 1;
    }
    void invalidate(int x, int y) {
        value(x, y) = 0.0;
        valid(x, y) = 0;
    }
    std::size_t valid_count() const {
        std::size_t n = 0;
        for (auto v : valid) n += v != 0;
        return n;
    }
    bool operator==(const ScalarField&) const = default;
};

struct DepthTag {};
struct DisparityTag {};
struct MetricTag {};

using DepthMap = ScalarField<DepthTag>;
using DisparityMap = ScalarField<DisparityTag>;
using MetricMap = ScalarField<MetricTag>;

/// Integer pixel rectangle, half-open: [x0, x0 + width) x [y0, y0 + height).
struct PixelBox {
    int x0 = 0;
    int y0 = 0;
    int width = 0;
    int height = 0;

    bool empty() const { return width <= 0 || height <= 0; }
    bool contains(int x, int y) const {
        return x >= x0 && y >= y0 && x < x0 + width && y < y0 + height;
    }
    bool operator==(const PixelBox&) const = default;
};

inline RgbImage to_rgb(const GrayImage& g) {
    RgbImage out(g.width(), g.height());
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = {g[i], g[i], g[i]};
    return out;
}

inline GrayImage to_gray(const RgbImage& img) {
    GrayImage out(img.width(), img.height());
    for (std::size_t i = 0; i < img.size(); ++i) out[i] = img[i].luma();
    return out;
}

/// Bilinear sample with pixel centers at integer coordinates. Returns false when
/// the sample point falls outside [0, w-1] x [0, h-1].
template <typename T>
bool sample_bilinear(const Grid<T>& g, double x, double y, T& out) {
    if (!(x >= 0.0 && y >= 0.0 && x <= g.width() - 1 && y <= g.height() - 1)) return false;
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, g.width() - 1);
    const int y1 = std::min(y0 + 1, g.height() - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const T top = g(x0, y0) * (1.0 - fx) + g(x1, y0) * fx;
    const T bottom = g(x0, y1) * (1.0 - fx) + g(x1, y1) * fx;
    out = top * (1.0 - fy) + bottom * fy;
    return true;
}

/// Clamps a coordinate lying within the pixel footprint of the grid,
/// [-0.5, size - 0.5), onto the sample lattice [0, size - 1].
inline bool clamp_into_grid(int width, int height, double& x, double& y) {
    if (!(x >= -0.5 && y >= -0.5 && x < width - 0.5 && y < height - 0.5)) return false;
    x = std::clamp(x, 0.0, static_cast<double>(width - 1));
    y = std::clamp(y, 0.0, static_cast<double>(height - 1));
    return true;
}

/// Nearest pixel to a continuous coordinate, or false when outside the grid.
inline bool nearest_pixel(int width, int height, double x, double y, int& px, int& py) {
    if (!std::isfinite(x) || !std::isfinite(y)) return false;
    px = static_cast<int>(std::lround(x));
    py = static_cast<int>(std::lround(y));
    return px >= 0 && py >= 0 && px < width && py < height;
}

}  // namespace labelforge
