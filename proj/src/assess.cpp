#include "labelforge/assess.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "labelforge/error.hpp"

namespace labelforge {

void ThresholdConfig::validate() const {
    for (double v : {rc_nerf, rc_splat, vss, gc, occ_th, rc_low, rc_high})
        if (!(v > 0.0 && v < 1.0)) throw InvalidInput("thresholds must lie in (0,1)");
    if (!(rc_low < rc_high)) throw InvalidInput("rc_low must be below rc_high");
}

double ray_confidence(std::span<const RaySample> samples, DepthMode mode,
                      const ThresholdConfig& cfg) {
    double total = 0.0;
    for (const auto& s : samples) total += s.weight;
    if (total < cfg.rc_high || samples.empty()) return 1.0;

    double t_low = 0.0;
    double t_high = 0.0;
    if (mode == DepthMode::Nerf) {
        t_low = interpolate_cumulative(samples, cfg.rc_low);
        t_high = interpolate_cumulative(samples, cfg.rc_high);
    } else {
        t_low = samples[closest_cumulative_index(samples, cfg.rc_low)].t_mid();
        t_high = samples[closest_cumulative_index(samples, cfg.rc_high)].t_mid();
    }
    const double denom = t_high + t_low;
    if (!std::isfinite(t_low) || !std::isfinite(t_high) || !(denom > 0.0)) return 1.0;
    return std::clamp((t_high - t_low) / denom, 0.0, 1.0);
}

MetricMap reconstruction_confidence(const RayWeightField& field, DepthMode mode,
                                    const ThresholdConfig& cfg) {
    MetricMap out(field.width(), field.height());
    for (int y = 0; y < field.height(); ++y)
        for (int x = 0; x < field.width(); ++x)
            out.set(x, y, ray_confidence(field.ray(x, y), mode, cfg));
    return out;
}

bool sample_depth(const DepthMap& depth, double x, double y, double& out) {
    if (!clamp_into_grid(depth.width(), depth.height(), x, y)) return false;
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0;
    const double fy = y - y0;
    double acc = 0.0;
    for (int dy = 0; dy <= 1; ++dy) {
        for (int dx = 0; dx <= 1; ++dx) {
            const double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
            if (w == 0.0) continue;
            if (!depth.valid.contains(x0 + dx, y0 + dy) || !depth.is_valid(x0 + dx, y0 + dy))
                return false;
            acc += w * depth.value(x0 + dx, y0 + dy);
        }
    }
    out = acc;
    return true;
}

MetricMap geometric_consistency(const DepthMap& depth1, const DepthMap& depth2,
                                const CameraIntrinsics& K, const RigidPose& pose1,
                                const RigidPose& pose2) {
    if (!depth1.value.same_shape(depth2.value))
        throw InvalidInput("depth maps must share the grid");
    const Reprojection r = reproject(depth1, K, pose1, pose2);
    MetricMap out(depth1.width(), depth1.height());
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            if (!r.in_frame(x, y)) continue;
            double z2 = 0.0;
            if (!sample_depth(depth2, r.target(x, y).u, r.target(x, y).v, z2)) continue;
            const double z1 = r.depth(x, y);
            const double denom = z1 + z2;
            if (!(denom > 0.0)) continue;
            out.set(x, y, std::abs(z1 - z2) / denom);
        }
    }
    return out;
}

namespace {

std::vector<double> gaussian_kernel(int size, double sigma) {
    std::vector<double> k(static_cast<std::size_t>(size));
    const double c = 0.5 * (size - 1);
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        k[i] = std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma));
        sum += k[i];
    }
    for (auto& v : k) v /= sum;
    return k;
}

// Separable correlation with zero padding.
Grid<double> filter(const Grid<double>& src, const std::vector<double>& k) {
    const int r = static_cast<int>(k.size() / 2);
    Grid<double> tmp(src.width(), src.height(), 0.0);
    for (int y = 0; y < src.height(); ++y)
        for (int x = 0; x < src.width(); ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) {
                const int xi = x + i;
                if (xi >= 0 && xi < src.width()) acc += k[i + r] * src(xi, y);
            }
            tmp(x, y) = acc;
        }
    Grid<double> out(src.width(), src.height(), 0.0);
    for (int y = 0; y < src.height(); ++y)
        for (int x = 0; x < src.width(); ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) {
                const int yi = y + i;
                if (yi >= 0 && yi < src.height()) acc += k[i + r] * tmp(x, yi);
            }
            out(x, y) = acc;
        }
    return out;
}

}  // namespace

Grid<double> ssim_map(const GrayImage& a, const GrayImage& b, const BinaryMask& mask,
                      const SsimOptions& opts) {
    if (!a.same_shape(b) || !a.same_shape(mask)) throw InvalidInput("ssim inputs must share the grid");
    if (opts.window < 1 || opts.window % 2 == 0) throw InvalidInput("ssim window must be odd");
    const auto k = gaussian_kernel(opts.window, opts.sigma);
    const int w = a.width();
    const int h = a.height();

    Grid<double> m(w, h), ma(w, h), mb(w, h), maa(w, h), mbb(w, h), mab(w, h);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double mv = mask[i] ? 1.0 : 0.0;
        m[i] = mv;
        ma[i] = mv * a[i];
        mb[i] = mv * b[i];
        maa[i] = mv * a[i] * a[i];
        mbb[i] = mv * b[i] * b[i];
        mab[i] = mv * a[i] * b[i];
    }
    const Grid<double> fm = filter(m, k);
    const Grid<double> fa = filter(ma, k);
    const Grid<double> fb = filter(mb, k);
    const Grid<double> faa = filter(maa, k);
    const Grid<double> fbb = filter(mbb, k);
    const Grid<double> fab = filter(mab, k);

    const double c1 = (opts.k1 * opts.dynamic_range) * (opts.k1 * opts.dynamic_range);
    const double c2 = (opts.k2 * opts.dynamic_range) * (opts.k2 * opts.dynamic_range);
    Grid<double> out(w, h, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!mask[i] || !(fm[i] > 0.0)) continue;
        const double inv = 1.0 / fm[i];
        const double mu_a = fa[i] * inv;
        const double mu_b = fb[i] * inv;
        const double var_a = faa[i] * inv - mu_a * mu_a;
        const double var_b = fbb[i] * inv - mu_b * mu_b;
        const double cov = fab[i] * inv - mu_a * mu_b;
        const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
        const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
        out[i] = num / den;
    }
    return out;
}

RgbImage warp_backward(const RgbImage& frame2, const FlowField& flow, BinaryMask& valid) {
    RgbImage out(flow.width(), flow.height());
    valid = BinaryMask(flow.width(), flow.height(), 0);
    for (int y = 0; y < flow.height(); ++y) {
        for (int x = 0; x < flow.width(); ++x) {
            if (!flow.is_valid(x, y)) continue;
            double sx = x + flow.value(x, y).u;
            double sy = y + flow.value(x, y).v;
            if (!clamp_into_grid(frame2.width(), frame2.height(), sx, sy)) continue;
            Rgb c;
            if (!sample_bilinear(frame2, sx, sy, c)) continue;
            out(x, y) = c;
            valid(x, y) = 1;
        }
    }
    return out;
}

MetricMap visual_structural_similarity(const RgbImage& frame1, const RgbImage& frame2,
                                       const FlowField& flow, const SsimOptions& opts) {
    if (!frame1.same_shape(frame2) || !frame1.same_shape(flow.value))
        throw InvalidInput("images and flow must share the grid");
    BinaryMask valid;
    const RgbImage warped = warp_backward(frame2, flow, valid);
    const Grid<double> ssim = ssim_map(to_gray(frame1), to_gray(warped), valid, opts);
    MetricMap out(frame1.width(), frame1.height());
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x)
            if (valid(x, y)) out.set(x, y, 1.0 - std::clamp(ssim(x, y), 0.0, 1.0));
    return out;
}

namespace {

bool passes(const MetricMap& m, int x, int y, double threshold) {
    return m.valid.contains(x, y) && m.is_valid(x, y) && m.value(x, y) < threshold;
}

void require_shape(const BinaryMask& ref, const MetricMap& m, bool used, const char* name) {
    if (used && !ref.same_shape(m.valid))
        throw InvalidInput(std::string("quality map does not share the label grid: ") + name);
}

}  // namespace

BinaryMask fused_validity(const QualityMaps& maps, const ThresholdConfig& cfg,
                          const MaskSelection& selection, DepthMode mode) {
    const BinaryMask& ref = maps.occ.visible;
    require_shape(ref, maps.rc, selection.rc || selection.occ, "rc");
    require_shape(ref, maps.gc, selection.gc, "gc");
    require_shape(ref, maps.vss, selection.vss, "vss");
    const double rc_th = cfg.rc_threshold(mode);

    BinaryMask out(ref.width(), ref.height(), 1);
    for (int y = 0; y < ref.height(); ++y) {
        for (int x = 0; x < ref.width(); ++x) {
            const bool visible = maps.occ.is_visible(x, y);
            bool ok = true;
            const bool rc_ok = (selection.rc || selection.occ) ? passes(maps.rc, x, y, rc_th) : true;
            if (selection.rc) ok = ok && rc_ok;
            if (selection.occ) ok = ok && visible && rc_ok;
            if (selection.vss) ok = ok && visible && passes(maps.vss, x, y, cfg.vss);
            if (selection.gc) ok = ok && visible && passes(maps.gc, x, y, cfg.gc);
            out(x, y) = ok ? 1 : 0;
        }
    }
    return out;
}

FlowField fuse_labels(const FlowField& label, const QualityMaps& maps, const ThresholdConfig& cfg,
                      const MaskSelection& selection, DepthMode mode) {
    if (!label.valid.same_shape(maps.occ.visible))
        throw InvalidInput("label and masks must share the grid");
    const BinaryMask keep = fused_validity(maps, cfg, selection, mode);
    FlowField out(label.width(), label.height());
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x)
            if (label.is_valid(x, y) && keep(x, y)) out.set(x, y, label.value(x, y));
    return out;
}

DisparityMap fuse_labels(const DisparityMap& label, const QualityMaps& maps,
                         const ThresholdConfig& cfg, const MaskSelection& selection,
                         DepthMode mode) {
    if (!label.valid.same_shape(maps.occ.visible))
        throw InvalidInput("label and masks must share the grid");
    const BinaryMask keep = fused_validity(maps, cfg, selection, mode);
    DisparityMap out(label.width(), label.height());
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x)
            if (label.is_valid(x, y) && keep(x, y)) out.set(x, y, label.value(x, y));
    return out;
}

double gc_l_score(const MetricMap& gc, const OcclusionMask& occ) {
    if (!gc.valid.same_shape(occ.visible)) throw InvalidInput("gc and occlusion must share the grid");
    double sum = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < gc.height(); ++y)
        for (int x = 0; x < gc.width(); ++x)
            if (occ.is_visible(x, y) && gc.is_valid(x, y)) {
                sum += gc.value(x, y);
                ++n;
            }
    if (n == 0) throw InvalidInput("gc_l score is undefined without visible scored pixels");
    return 100.0 * sum / static_cast<double>(n);
}

}  // namespace labelforge
