#include "labelforge/foreground.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "labelforge/error.hpp"
#include "labelforge/rng.hpp"

namespace labelforge {

void SegMaskSet::add(BinaryMask mask) {
    if (!mask.same_shape(width_, height_)) throw InvalidInput("mask does not share the image grid");
    std::size_t n = 0;
    for (auto v : mask) n += v != 0;
    if (n == 0) throw InvalidInput("segmentation mask is empty");
    for (auto& v : mask) v = v ? 1 : 0;
    masks_.push_back(std::move(mask));
    counts_.push_back(n);
}

BinaryMask warp_mask_nearest(const BinaryMask& mask, const FlowField& flow) {
    if (!mask.same_shape(flow.valid)) throw InvalidInput("mask and flow must share the grid");
    BinaryMask out(mask.width(), mask.height(), 0);
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (!flow.is_valid(x, y)) continue;
            int px = 0;
            int py = 0;
            const Flow f = flow.value(x, y);
            if (nearest_pixel(mask.width(), mask.height(), x + f.u, y + f.v, px, py))
                out(x, y) = mask(px, py) ? 1 : 0;
        }
    }
    return out;
}

namespace {

std::size_t overlap(const BinaryMask& a, const BinaryMask& b) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) n += (a[i] && b[i]) ? 1 : 0;
    return n;
}

}  // namespace

CoincidencePair coincidence_matrices(const SegMaskSet& set1, const SegMaskSet& set2,
                                     const FlowField& forward, const FlowField& backward) {
    if (!forward.valid.same_shape(set1.width(), set1.height()) ||
        !backward.valid.same_shape(set2.width(), set2.height()) ||
        set1.width() != set2.width() || set1.height() != set2.height())
        throw InvalidInput("masks and flows must share the grid");

    std::vector<BinaryMask> warped2;  // frame-2 masks seen from frame 1
    for (std::size_t j = 0; j < set2.size(); ++j) warped2.push_back(warp_mask_nearest(set2[j], forward));
    std::vector<BinaryMask> warped1;  // frame-1 masks seen from frame 2
    for (std::size_t i = 0; i < set1.size(); ++i) warped1.push_back(warp_mask_nearest(set1[i], backward));

    const auto n1 = static_cast<Eigen::Index>(set1.size());
    const auto n2 = static_cast<Eigen::Index>(set2.size());
    CoincidencePair m{CoincidenceMatrix::Zero(n1, n2), CoincidenceMatrix::Zero(n1, n2)};
    for (Eigen::Index i = 0; i < n1; ++i) {
        for (Eigen::Index j = 0; j < n2; ++j) {
            m.forward(i, j) = static_cast<double>(overlap(set1[i], warped2[j])) /
                              static_cast<double>(set1.pixel_count(i));
            m.backward(i, j) = static_cast<double>(overlap(set2[j], warped1[i])) /
                               static_cast<double>(set2.pixel_count(j));
        }
    }
    return m;
}

std::vector<MaskMatch> match_masks(const CoincidencePair& m, double coverage_min) {
    if (m.forward.rows() != m.backward.rows() || m.forward.cols() != m.backward.cols())
        throw InvalidInput("coincidence matrices disagree in shape");
    const Eigen::Index n1 = m.forward.rows();
    const Eigen::Index n2 = m.forward.cols();

    auto best_in_row = [&](Eigen::Index i) {
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < n2; ++j) {
            const double a = m.forward(i, j);
            const double b = m.forward(i, best);
            if (a > b || (a == b && m.backward(i, j) > m.backward(i, best))) best = j;
        }
        return best;
    };
    auto best_in_col = [&](Eigen::Index j) {
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < n1; ++i) {
            const double a = m.backward(i, j);
            const double b = m.backward(best, j);
            if (a > b || (a == b && m.forward(i, j) > m.forward(best, j))) best = i;
        }
        return best;
    };

    std::vector<MaskMatch> out;
    if (n1 == 0 || n2 == 0) return out;
    for (Eigen::Index i = 0; i < n1; ++i) {
        const Eigen::Index j = best_in_row(i);
        if (best_in_col(j) != i) continue;
        if (!(m.forward(i, j) > coverage_min) || !(m.backward(i, j) > coverage_min)) continue;
        out.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j)});
    }
    return out;
}

namespace {

PixelBox bounding_box(const BinaryMask& mask) {
    int x0 = mask.width();
    int y0 = mask.height();
    int x1 = -1;
    int y1 = -1;
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            if (mask(x, y)) {
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
    if (x1 < 0) return {};
    return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

template <typename T>
Grid<T> crop(const Grid<T>& g, const PixelBox& b) {
    Grid<T> out(b.width, b.height);
    for (int y = 0; y < b.height; ++y)
        for (int x = 0; x < b.width; ++x) out(x, y) = g(b.x0 + x, b.y0 + y);
    return out;
}

}  // namespace

std::optional<ForegroundAsset> extract_foreground(const LabeledPair& pair, const MaskMatch& match,
                                                  const SegMaskSet& masks1,
                                                  const SegMaskSet& masks2,
                                                  const QualityMaps& quality,
                                                  const ThresholdConfig& cfg,
                                                  const ExtractOptions& opts) {
    if (match.first >= masks1.size() || match.second >= masks2.size())
        throw InvalidInput("match refers to a missing mask");
    const BinaryMask& m1 = masks1[match.first];
    const BinaryMask& m2 = masks2[match.second];
    if (!m1.same_shape(pair.frame1) || !m2.same_shape(pair.frame2))
        throw InvalidInput("masks must share the pair's grid");

    const PixelBox b1 = bounding_box(m1);
    const PixelBox b2 = bounding_box(m2);
    if (b1.width < 2 || b1.height < 2 || b2.width < 2 || b2.height < 2) return std::nullopt;

    const BinaryMask keep = fused_validity(quality, cfg, opts.selection, opts.mode);
    ForegroundAsset a;
    a.task = pair.task;
    a.box1 = b1;
    a.box2 = b2;
    a.frame1 = crop(pair.frame1, b1);
    a.frame2 = crop(pair.frame2, b2);
    a.alpha1 = crop(m1, b1);
    a.alpha2 = crop(m2, b2);
    a.flow = FlowField(b1.width, b1.height);
    std::size_t alpha_n = 0;
    std::size_t kept = 0;
    for (int y = 0; y < b1.height; ++y) {
        for (int x = 0; x < b1.width; ++x) {
            if (!a.alpha1(x, y)) continue;
            ++alpha_n;
            const int sx = b1.x0 + x;
            const int sy = b1.y0 + y;
            if (pair.flow.is_valid(sx, sy) && keep(sx, sy)) {
                a.flow.set(x, y, pair.flow.value(sx, sy));
                ++kept;
            }
        }
    }
    if (static_cast<double>(kept) < opts.min_surviving * static_cast<double>(alpha_n))
        return std::nullopt;
    return a;
}

Affine2 Affine2::translation(double du, double dv) {
    Affine2 a;
    a.offset = {du, dv};
    return a;
}

Affine2 Affine2::rotation(double radians) {
    Affine2 a;
    a.linear = Eigen::Rotation2Dd(radians).toRotationMatrix();
    return a;
}

namespace {

bool inside_polygon(const std::vector<Vec2>& poly, const Vec2& p) {
    bool in = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[j];
        if ((a.y() > p.y()) != (b.y() > p.y())) {
            const double xc = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
            if (p.x() < xc) in = !in;
        }
    }
    return in;
}

struct StripeTexture {
    Rgb base;
    Rgb stripe;
    Vec2 freq;
    double phase = 0.0;
    double cell = 4.0;

    Rgb at(const Vec2& local) const {
        const double s = 0.5 + 0.5 * std::sin(freq.dot(local) + phase);
        const bool check = (static_cast<long>(std::floor(local.x() / cell)) +
                            static_cast<long>(std::floor(local.y() / cell))) % 2 == 0;
        const double k = check ? -0.1 : 0.0;
        return base * (1.0 - s) + stripe * s + Rgb{k, k, k};
    }
};

}  // namespace

ForegroundAsset synth_2d_foreground(std::uint64_t texture_seed, int width, int height,
                                    const Affine2& motion) {
    if (width < 8 || height < 8) throw InvalidInput("2D foreground needs at least 8x8 pixels");
    const double det = motion.linear.determinant();
    if (!(std::abs(det) > 1e-9)) throw InvalidInput("foreground motion must be invertible");

    Rng rng(texture_seed);
    const Vec2 center(0.5 * (width - 1), 0.5 * (height - 1));
    const double r_out = 0.45 * std::min(width, height);
    const int arms = rng.uniform_int(4, 8);
    std::vector<Vec2> poly;
    for (int k = 0; k < 2 * arms; ++k) {
        const double angle = std::numbers::pi * (k + rng.uniform(-0.2, 0.2)) / arms;
        const double r = (k % 2 == 0) ? r_out * rng.uniform(0.8, 1.0) : r_out * rng.uniform(0.4, 0.7);
        poly.emplace_back(center.x() + r * std::cos(angle), center.y() + r * std::sin(angle));
    }

    StripeTexture tex;
    tex.base = {rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)};
    tex.stripe = {rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)};
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double omega = rng.uniform(0.3, 1.2);
    tex.freq = {omega * std::cos(theta), omega * std::sin(theta)};
    tex.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    tex.cell = rng.uniform(2.0, 6.0);

    ForegroundAsset a;
    a.task = Task::Flow;
    a.box1 = a.box2 = {0, 0, width, height};
    a.frame1 = RgbImage(width, height);
    a.frame2 = RgbImage(width, height);
    a.alpha1 = BinaryMask(width, height, 0);
    a.alpha2 = BinaryMask(width, height, 0);
    a.flow = FlowField(width, height);

    const Mat2 inv = motion.linear.inverse();
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const Vec2 p(x, y);
            if (inside_polygon(poly, p)) {
                a.alpha1(x, y) = 1;
                a.frame1(x, y) = tex.at(p - center);
                const Vec2 d = motion.apply(p, center) - p;
                a.flow.set(x, y, {d.x(), d.y()});
            }
            const Vec2 src = center + inv * (p - center - motion.offset);
            if (inside_polygon(poly, src)) {
                a.alpha2(x, y) = 1;
                a.frame2(x, y) = tex.at(src - center);
            }
        }
    }
    return a;
}

namespace {

Vec2 box_center(const PixelBox& b) {
    return {b.x0 + 0.5 * (b.width - 1), b.y0 + 0.5 * (b.height - 1)};
}

}  // namespace

Placement random_placement(const ForegroundAsset& asset, int width, int height, Task task,
                           std::uint64_t seed) {
    (void)asset;
    Rng rng(seed);
    Placement p;
    p.scale = rng.uniform(0.5, 1.5);
    p.target_center = {rng.uniform(0.0, width - 1.0), rng.uniform(0.0, height - 1.0)};
    if (task == Task::Flow) {
        p.angle = rng.uniform(-0.25, 0.25);
        p.delta = {rng.uniform(-8.0, 8.0), rng.uniform(-8.0, 8.0)};
    }
    return p;
}

namespace {

struct PlacedAsset {
    const ForegroundAsset* asset = nullptr;
    Mat2 rot = Mat2::Identity();
    double scale = 1.0;
    Vec2 src_center = Vec2::Zero();
    Vec2 dst_center = Vec2::Zero();
    Vec2 delta = Vec2::Zero();

    // Source position (frame-1 source coordinates) under target pixel p.
    Vec2 source_of(const Vec2& p) const { return src_center + rot.transpose() * (p - dst_center) / scale; }
};

// Nearest crop pixel under a source-frame position; false outside the crop.
bool crop_pixel(const PixelBox& box, const Vec2& src, int& cx, int& cy) {
    return nearest_pixel(box.width, box.height, src.x() - box.x0, src.y() - box.y0, cx, cy);
}

BinaryMask footprint(const PlacedAsset& pa, int width, int height, bool second) {
    const ForegroundAsset& a = *pa.asset;
    const PixelBox& box = second ? a.box2 : a.box1;
    const BinaryMask& alpha = second ? a.alpha2 : a.alpha1;
    const Vec2 shift = second ? pa.delta : Vec2::Zero();
    BinaryMask out(width, height, 0);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            int cx = 0;
            int cy = 0;
            const Vec2 src = pa.source_of(Vec2(x, y) - shift);
            if (crop_pixel(box, src, cx, cy) && alpha(cx, cy)) out(x, y) = 1;
        }
    }
    return out;
}

LabeledPair composite_impl(const LabeledPair& background, const std::vector<ForegroundAsset>& assets,
                           const std::vector<Placement>& placements, const CompositeOptions& opts,
                           BinaryMask* touched) {
    if (assets.size() > 2) throw InvalidInput("at most two foregrounds per pair");
    if (placements.size() != assets.size()) throw InvalidInput("one placement per asset required");
    const int w = background.width();
    const int h = background.height();
    LabeledPair out = background;
    if (touched) *touched = BinaryMask(w, h, 0);

    for (std::size_t k = 0; k < assets.size(); ++k) {
        const ForegroundAsset& a = assets[k];
        const Placement& pl = placements[k];
        if (a.task != background.task) throw InvalidInput("asset task does not match the pair");
        if (!(pl.scale > 0.0)) throw InvalidInput("placement scale must be positive");

        PlacedAsset pa;
        pa.asset = &a;
        pa.scale = pl.scale;
        pa.rot = background.task == Task::Flow ? Mat2(Eigen::Rotation2Dd(pl.angle).toRotationMatrix())
                                               : Mat2::Identity();
        pa.src_center = box_center(a.box1);
        pa.dst_center = pl.target_center;
        pa.delta = pl.delta;

        const BinaryMask f1 = footprint(pa, w, h, false);
        bool any = false;
        for (auto v : f1) any = any || v;

        if (background.task == Task::Stereo) {
            double bg_max = 0.0;
            double fg_min = std::numeric_limits<double>::infinity();
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    if (f1(x, y) && out.flow.is_valid(x, y))
                        bg_max = std::max(bg_max, std::abs(out.flow.value(x, y).u));
            for (int y = 0; y < a.flow.height(); ++y)
                for (int x = 0; x < a.flow.width(); ++x)
                    if (a.flow.is_valid(x, y))
                        fg_min = std::min(fg_min, pl.scale * std::abs(a.flow.value(x, y).u));
            if (!std::isfinite(fg_min)) fg_min = 0.0;
            const double offset = std::max(0.0, bg_max + opts.stereo_margin - fg_min);
            pa.delta = {-offset, 0.0};
        }
        const BinaryMask f2 = footprint(pa, w, h, true);
        for (auto v : f2) any = any || v;
        if (!any) continue;

        // Background points that move behind the pasted frame-2 object.
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (f1(x, y) || !out.flow.is_valid(x, y)) continue;
                const Flow f = out.flow.value(x, y);
                int tx = 0;
                int ty = 0;
                if (!nearest_pixel(w, h, x + f.u, y + f.v, tx, ty) || !f2(tx, ty)) continue;
                out.flow.invalidate(x, y);
                out.occlusion.visible(x, y) = 0;
                if (touched) (*touched)(x, y) = 1;
            }
        }

        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (!f1(x, y)) continue;
                int cx = 0;
                int cy = 0;
                crop_pixel(a.box1, pa.source_of(Vec2(x, y)), cx, cy);
                out.frame1(x, y) = a.frame1(cx, cy);
                out.depth1.invalidate(x, y);
                if (a.flow.is_valid(cx, cy)) {
                    const Flow af = a.flow.value(cx, cy);
                    const Vec2 d = pa.scale * (pa.rot * Vec2(af.u, af.v)) + pa.delta;
                    out.flow.set(x, y, {d.x(), d.y()});
                    int tx = 0;
                    int ty = 0;
                    out.occlusion.visible(x, y) = nearest_pixel(w, h, x + d.x(), y + d.y(), tx, ty) ? 1 : 0;
                } else {
                    out.flow.invalidate(x, y);
                    out.occlusion.visible(x, y) = 0;
                }
                if (touched) (*touched)(x, y) = 1;
            }
        }
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (!f2(x, y)) continue;
                int cx = 0;
                int cy = 0;
                crop_pixel(a.box2, pa.source_of(Vec2(x, y) - pa.delta), cx, cy);
                out.frame2(x, y) = a.frame2(cx, cy);
                out.depth2.invalidate(x, y);
                if (touched) (*touched)(x, y) = 1;
            }
        }
    }
    return out;
}

}  // namespace

LabeledPair composite(const LabeledPair& background, const std::vector<ForegroundAsset>& assets,
                      const std::vector<Placement>& placements, const CompositeOptions& opts) {
    return composite_impl(background, assets, placements, opts, nullptr);
}

LabeledPair composite(const LabeledPair& background, const std::vector<ForegroundAsset>& assets,
                      std::uint64_t seed, const CompositeOptions& opts) {
    std::vector<Placement> placements;
    for (std::size_t k = 0; k < assets.size(); ++k)
        placements.push_back(random_placement(assets[k], background.width(), background.height(),
                                              background.task, mix_seed(seed, k)));
    return composite_impl(background, assets, placements, opts, nullptr);
}

BinaryMask composite_region(const LabeledPair& background,
                            const std::vector<ForegroundAsset>& assets,
                            const std::vector<Placement>& placements) {
    BinaryMask touched;
    composite_impl(background, assets, placements, {}, &touched);
    return touched;
}

}  // namespace labelforge
