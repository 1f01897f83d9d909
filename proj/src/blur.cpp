#include "labelforge/blur.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>

#include "labelforge/error.hpp"
#include "labelforge/io.hpp"

namespace labelforge {

void BlurConfig::validate() const {
    if (!(edge_grad_threshold >= 0.0)) throw InvalidInput("edge threshold must be non-negative");
    if (dilate_radius < 0) throw InvalidInput("dilation radius must be non-negative");
    if (!(highpass_radius_fraction > 0.0 && highpass_radius_fraction < 1.0))
        throw InvalidInput("high-pass radius fraction must lie in (0,1)");
    if (!(no_texture_fraction >= 0.0 && no_texture_fraction < 1.0))
        throw InvalidInput("no-texture fraction must lie in [0,1)");
}

const char* to_string(BlurDecision d) {
    switch (d) {
        case BlurDecision::Keep: return "keep";
        case BlurDecision::Drop: return "drop";
        case BlurDecision::NoTexture: return "no-texture";
    }
    return "keep";
}

GrayImage normalize_range(const GrayImage& image) {
    GrayImage out(image.width(), image.height(), 0.0);
    if (image.empty()) return out;
    const auto [lo, hi] = std::minmax_element(image.begin(), image.end());
    const double range = *hi - *lo;
    if (!(range > 0.0)) return out;
    for (std::size_t i = 0; i < image.size(); ++i) out[i] = (image[i] - *lo) / range;
    return out;
}

BinaryMask edge_mask(const GrayImage& image, double threshold, int radius) {
    const int w = image.width();
    const int h = image.height();
    BinaryMask edges(w, h, 0);
    auto at = [&](int x, int y) {
        return image(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1));
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double gx = 0.5 * (at(x + 1, y) - at(x - 1, y));
            const double gy = 0.5 * (at(x, y + 1) - at(x, y - 1));
            if (std::sqrt(gx * gx + gy * gy) > threshold) edges(x, y) = 1;
        }
    if (radius <= 0) return edges;

    BinaryMask out(w, h, 0);
    const int r2 = radius * radius;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!edges(x, y)) continue;
            for (int dy = -radius; dy <= radius; ++dy)
                for (int dx = -radius; dx <= radius; ++dx)
                    if (dx * dx + dy * dy <= r2 && out.contains(x + dx, y + dy)) out(x + dx, y + dy) = 1;
        }
    return out;
}

namespace {

// Planner calls are not thread-safe in FFTW.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

GrayImage highpass(const GrayImage& image, double radius_fraction) {
    const int w = image.width();
    const int h = image.height();
    // Mirrored 2w x 2h extension, so the periodic FFT sees no seam at the borders.
    const int W = 2 * w;
    const int H = 2 * h;
    const int wc = W / 2 + 1;
    std::vector<double> real(static_cast<std::size_t>(W) * H);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            real[static_cast<std::size_t>(y) * W + x] = image(x < w ? x : W - 1 - x, y < h ? y : H - 1 - y);
    std::vector<std::complex<double>> spec(static_cast<std::size_t>(H) * wc);
    auto* spec_ptr = reinterpret_cast<fftw_complex*>(spec.data());

    fftw_plan fwd;
    fftw_plan inv;
    {
        std::lock_guard lock(planner_mutex());
        fwd = fftw_plan_dft_r2c_2d(H, W, real.data(), spec_ptr, FFTW_ESTIMATE);
        inv = fftw_plan_dft_c2r_2d(H, W, spec_ptr, real.data(), FFTW_ESTIMATE);
    }
    fftw_execute(fwd);

    // Radius in cycles per original image; the doubled grid doubles frequency indices.
    const double radius = 2.0 * radius_fraction * std::min(w, h);
    for (int ky = 0; ky < H; ++ky) {
        const double fy = ky <= H / 2 ? ky : ky - H;
        for (int kx = 0; kx < wc; ++kx) {
            if (std::sqrt(fy * fy + double(kx) * kx) < radius)
                spec[static_cast<std::size_t>(ky) * wc + kx] = 0.0;
        }
    }
    fftw_execute(inv);
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(inv);
    }

    GrayImage out(w, h);
    const double norm = 1.0 / (static_cast<double>(W) * H);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out(x, y) = real[static_cast<std::size_t>(y) * W + x] * norm;
    return out;
}

BlurReport esfft_score(const GrayImage& image, const BlurConfig& cfg) {
    cfg.validate();
    if (image.width() < 32 || image.height() < 32)
        throw InvalidInput("blur scoring needs at least 32x32 pixels");
    const GrayImage norm = normalize_range(image);
    const BinaryMask edges = edge_mask(norm, cfg.edge_grad_threshold, cfg.dilate_radius);

    std::size_t n = 0;
    for (auto v : edges) n += v != 0;
    BlurReport r;
    r.edge_fraction = static_cast<double>(n) / static_cast<double>(edges.size());
    if (r.edge_fraction < cfg.no_texture_fraction || n == 0) {
        r.decision = BlurDecision::NoTexture;
        return r;
    }
    const GrayImage hp = highpass(norm, cfg.highpass_radius_fraction);
    double sum = 0.0;
    for (std::size_t i = 0; i < hp.size(); ++i)
        if (edges[i]) sum += std::abs(hp[i]);
    r.score = sum / static_cast<double>(n);
    return r;
}

FilterResult filter_directory(const std::filesystem::path& dir, const BlurConfig& cfg,
                              double threshold) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw InvalidInput("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());

    FilterResult out;
    for (const auto& f : files) {
        const std::string name = f.filename().string();
        try {
            FilterEntry e{name, esfft_score(to_gray(read_png_rgb(f)), cfg)};
            if (e.report.decision != BlurDecision::NoTexture && e.report.score < threshold)
                e.report.decision = BlurDecision::Drop;
            (e.report.decision == BlurDecision::Drop ? out.dropped : out.kept).push_back(name);
            out.entries.push_back(std::move(e));
        } catch (const std::exception& ex) {
            out.errors.emplace_back(name, ex.what());
        }
    }
    return out;
}

}  // namespace labelforge
