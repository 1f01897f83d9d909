#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "labelforge/blur.hpp"
#include "labelforge/error.hpp"
#include "labelforge/io.hpp"
#include "support.hpp"

using namespace labelforge;
using namespace testsupport;

namespace {

// Naive 2D DFT high-pass of the mirror-extended image, independent of the
// library's FFT path.
GrayImage dft_highpass(const GrayImage& src, double radius_fraction) {
    const int w = 2 * src.width(), h = 2 * src.height();
    GrayImage img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img(x, y) = src(x < src.width() ? x : w - 1 - x, y < src.height() ? y : h - 1 - y);
    using C = std::complex<double>;
    std::vector<C> spec(static_cast<std::size_t>(w) * h);
    const double tau = 2.0 * std::numbers::pi;
    for (int ky = 0; ky < h; ++ky)
        for (int kx = 0; kx < w; ++kx) {
            C acc = 0;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    acc += img(x, y) * std::polar(1.0, -tau * (double(kx) * x / w + double(ky) * y / h));
            spec[ky * w + kx] = acc;
        }
    const double radius = radius_fraction * std::min(w, h);  // cycles per source image, doubled grid
    for (int ky = 0; ky < h; ++ky)
        for (int kx = 0; kx < w; ++kx) {
            const double fx = kx <= w / 2 ? kx : kx - w;
            const double fy = ky <= h / 2 ? ky : ky - h;
            if (std::sqrt(fx * fx + fy * fy) < radius) spec[ky * w + kx] = 0;
        }
    GrayImage out(src.width(), src.height());
    for (int y = 0; y < src.height(); ++y)
        for (int x = 0; x < src.width(); ++x) {
            C acc = 0;
            for (int ky = 0; ky < h; ++ky)
                for (int kx = 0; kx < w; ++kx)
                    acc += spec[ky * w + kx] * std::polar(1.0, tau * (double(kx) * x / w + double(ky) * y / h));
            out(x, y) = acc.real() / (w * h);
        }
    return out;
}

void write_gray_png(const GrayImage& g, const fs::path& p) {
    std::vector<std::uint16_t> s(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        s[i] = static_cast<std::uint16_t>(std::lround(std::clamp(g[i], 0.0, 1.0) * 65535.0));
    write_png(p, g.width(), g.height(), 1, 16, s);
}

}  // namespace

TEST_CASE("high-pass agrees with a direct DFT") {
    Rng rng(2);
    GrayImage img(14, 11);
    for (auto& v : img) v = rng.uniform();
    for (double frac : {0.1, 0.25, 0.4}) {
        const GrayImage a = highpass(img, frac);
        const GrayImage b = dft_highpass(img, frac);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-9).scale(1.0));
    }
}

TEST_CASE("constant image has no texture") {
    const BlurReport r = esfft_score(GrayImage(48, 40, 0.3));
    CHECK(r.decision == BlurDecision::NoTexture);
    CHECK(r.edge_fraction == 0.0);
    CHECK(r.score == 0.0);
    CHECK_THROWS_AS(esfft_score(GrayImage(31, 64, 0.3)), InvalidInput);
}

TEST_CASE("no-texture triggers exactly below the edge fraction floor") {
    BlurConfig cfg;
    cfg.dilate_radius = 0;
    // one lit pixel lights its four neighbors: 4 / 4096 < 0.1%
    GrayImage one(64, 64, 0.0);
    one(20, 20) = 1.0;
    const BlurReport a = esfft_score(one, cfg);
    CHECK(a.edge_fraction == doctest::Approx(4.0 / 4096.0));
    CHECK(a.decision == BlurDecision::NoTexture);
    GrayImage two = one;
    two(40, 40) = 1.0;
    const BlurReport b = esfft_score(two, cfg);
    CHECK(b.edge_fraction == doctest::Approx(8.0 / 4096.0));
    CHECK(b.decision == BlurDecision::Keep);
    CHECK(b.score > 0.0);
}

TEST_CASE("sharp checkerboard outscores its blurred copy") {
    const GrayImage sharp = checkerboard(64, 64, 8, 0.1, 0.9, 0);
    const GrayImage blurred = gaussian_blur(sharp, 2.0);
    CHECK(esfft_score(sharp).score > esfft_score(blurred).score);
}

TEST_CASE("score is non-increasing over a blur sweep") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const GrayImage base = seed % 2 ? rectangles(64, 64, seed) : checkerboard(64, 64, 4 + int(seed), 0.0, 1.0, int(seed));
        double prev = std::numeric_limits<double>::infinity();
        for (double sigma : {0.0, 1.0, 2.0, 4.0}) {
            const BlurReport r = esfft_score(gaussian_blur(base, sigma));
            CHECK(r.score >= 0.0);
            CHECK(r.score <= prev);
            prev = r.score;
        }
    }
}

TEST_CASE("score ignores a global brightness offset") {
    const GrayImage g = rectangles(64, 48, 3);
    GrayImage shifted = g;
    for (auto& v : shifted) v += 0.37;
    const double a = esfft_score(g).score;
    const double b = esfft_score(shifted).score;
    CHECK(std::abs(a - b) <= 1e-6 * a);
}

TEST_CASE("filter_directory: empty, two clusters, determinism, undecodable") {
    TempDir empty("blur_empty");
    const FilterResult none = filter_directory(empty.path(), {}, 0.05);
    CHECK(none.entries.empty());
    CHECK(none.kept.empty());
    CHECK(none.dropped.empty());

    TempDir dir("blur_mixed");
    double sharp_min = 1e300, blur_max = 0;
    for (int i = 0; i < 6; ++i) {
        const GrayImage sharp = rectangles(64, 64, 100 + i);
        const GrayImage soft = gaussian_blur(sharp, 2.0);
        write_gray_png(sharp, dir.path() / ("sharp_" + std::to_string(i) + ".png"));
        write_gray_png(soft, dir.path() / ("soft_" + std::to_string(i) + ".png"));
    }
    write_bytes(dir.path() / "zz_broken.png", {'n', 'o', 't', 'p', 'n', 'g'});
    const FilterResult probe = filter_directory(dir.path(), {}, 0.0);
    for (const auto& e : probe.entries) {
        if (e.file.starts_with("sharp")) sharp_min = std::min(sharp_min, e.report.score);
        else blur_max = std::max(blur_max, e.report.score);
    }
    REQUIRE(blur_max < sharp_min);
    const double th = 0.5 * (blur_max + sharp_min);
    const FilterResult r = filter_directory(dir.path(), {}, th);
    CHECK(r.kept.size() == 6);
    CHECK(r.dropped.size() == 6);
    for (const auto& k : r.kept) CHECK(k.starts_with("sharp"));
    for (const auto& d : r.dropped) CHECK(d.starts_with("soft"));
    REQUIRE(r.errors.size() == 1);
    CHECK(r.errors[0].first == "zz_broken.png");

    const FilterResult again = filter_directory(dir.path(), {}, th);
    REQUIRE(again.entries.size() == r.entries.size());
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
        CHECK(again.entries[i].file == r.entries[i].file);
        CHECK(again.entries[i].report.score == r.entries[i].report.score);
    }
    CHECK(again.kept == r.kept);
    CHECK_THROWS_AS(filter_directory(dir.path() / "missing", {}, th), InvalidInput);
}
