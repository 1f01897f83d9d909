#include <doctest.h>

#include <cmath>

#include "labelforge/error.hpp"
#include "labelforge/foreground.hpp"
#include "labelforge/rng.hpp"

using namespace labelforge;

namespace {

BinaryMask rect(int w, int h, int x0, int y0, int x1, int y1) {
    BinaryMask m(w, h, 0);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) m(x, y) = 1;
    return m;
}

FlowField constant_flow(int w, int h, double u, double v) {
    FlowField f(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) f.set(x, y, {u, v});
    return f;
}

SegMaskSet mask_set(int w, int h, std::initializer_list<BinaryMask> masks) {
    SegMaskSet s(w, h);
    for (const auto& m : masks) s.add(m);
    return s;
}

LabeledPair background_pair(int w, int h, Task task, std::uint64_t seed) {
    Rng rng(seed);
    LabeledPair p;
    p.task = task;
    p.frame1 = RgbImage(w, h);
    p.frame2 = RgbImage(w, h);
    p.depth1 = DepthMap(w, h);
    p.depth2 = DepthMap(w, h);
    p.flow = FlowField(w, h);
    p.occlusion = OcclusionMask(w, h, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            p.frame1(x, y) = {rng.uniform(), rng.uniform(), rng.uniform()};
            p.frame2(x, y) = {rng.uniform(), rng.uniform(), rng.uniform()};
            p.depth1.set(x, y, rng.uniform(2.0, 8.0));
            p.depth2.set(x, y, rng.uniform(2.0, 8.0));
            if (task == Task::Flow)
                p.flow.set(x, y, {rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)});
            else
                p.flow.set(x, y, {-rng.uniform(1.0, 10.0), 0.0});
        }
    return p;
}

QualityMaps clean_quality(int w, int h) {
    QualityMaps q{MetricMap(w, h), MetricMap(w, h), MetricMap(w, h), OcclusionMask(w, h, 1)};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            q.rc.set(x, y, 0.0);
            q.gc.set(x, y, 0.0);
            q.vss.set(x, y, 0.0);
        }
    return q;
}

}  // namespace

TEST_CASE("coincidence: identical disjoint sets under zero flow") {
    const int w = 40, h = 30;
    const auto s = mask_set(w, h, {rect(w, h, 0, 0, 10, 10), rect(w, h, 15, 5, 30, 20), rect(w, h, 5, 22, 35, 28)});
    const FlowField zero = constant_flow(w, h, 0, 0);
    const CoincidencePair m = coincidence_matrices(s, s, zero, zero);
    CHECK(m.forward.isApprox(Eigen::MatrixXd::Identity(3, 3)));
    CHECK(m.backward.isApprox(Eigen::MatrixXd::Identity(3, 3)));
    const auto matches = match_masks(m);
    REQUIRE(matches.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(matches[i] == MaskMatch{i, i});
}

TEST_CASE("coincidence: full coverage and half-shifted square") {
    const int w = 40, h = 30;
    const auto s1 = mask_set(w, h, {rect(w, h, 10, 10, 14, 14)});
    const auto s2 = mask_set(w, h, {rect(w, h, 5, 5, 25, 25)});
    const FlowField zero = constant_flow(w, h, 0, 0);
    const CoincidencePair m = coincidence_matrices(s1, s2, zero, zero);
    CHECK(m.forward(0, 0) == 1.0);
    CHECK(m.backward(0, 0) == doctest::Approx(16.0 / 400.0));

    // the same 10x10 square, shifted half its width by the flow
    const auto sq = mask_set(w, h, {rect(w, h, 10, 10, 20, 20)});
    for (double shift : {5.0, 5.3, 4.7}) {
        const CoincidencePair c =
            coincidence_matrices(sq, sq, constant_flow(w, h, shift, 0), constant_flow(w, h, -shift, 0));
        // pixel-count oracle: x lands in the square iff round(x + shift) in [10, 20)
        int n = 0;
        for (int x = 10; x < 20; ++x) {
            const long t = std::lround(x + shift);
            n += (t >= 10 && t < 20) ? 10 : 0;
        }
        CHECK(c.forward(0, 0) == doctest::Approx(n / 100.0));
        CHECK(std::abs(c.forward(0, 0) - 0.5) <= 0.1 + 1e-12);
        CHECK(std::abs(c.backward(0, 0) - 0.5) <= 0.1 + 1e-12);
    }
}

TEST_CASE("coincidence: entries stay in [0,1]") {
    const int w = 32, h = 24;
    Rng rng(4);
    for (int t = 0; t < 20; ++t) {
        SegMaskSet a(w, h), b(w, h);
        for (int k = 0; k < 4; ++k) {
            const int x0 = rng.uniform_int(0, w - 4), y0 = rng.uniform_int(0, h - 4);
            a.add(rect(w, h, x0, y0, rng.uniform_int(x0 + 1, w), rng.uniform_int(y0 + 1, h)));
            const int x1 = rng.uniform_int(0, w - 4), y1 = rng.uniform_int(0, h - 4);
            b.add(rect(w, h, x1, y1, rng.uniform_int(x1 + 1, w), rng.uniform_int(y1 + 1, h)));
        }
        const auto m = coincidence_matrices(a, b, constant_flow(w, h, rng.uniform(-4, 4), rng.uniform(-4, 4)),
                                            constant_flow(w, h, rng.uniform(-4, 4), rng.uniform(-4, 4)));
        CHECK(m.forward.minCoeff() >= 0.0);
        CHECK(m.forward.maxCoeff() <= 1.0);
        CHECK(m.backward.minCoeff() >= 0.0);
        CHECK(m.backward.maxCoeff() <= 1.0);
    }
}

TEST_CASE("segmentation masks reject empty and mismatched masks") {
    SegMaskSet s(10, 8);
    CHECK_THROWS_AS(s.add(BinaryMask(10, 8, 0)), InvalidInput);
    CHECK_THROWS_AS(s.add(BinaryMask(9, 8, 1)), InvalidInput);
    const auto a = mask_set(10, 8, {rect(10, 8, 0, 0, 3, 3)});
    CHECK_THROWS_AS(coincidence_matrices(a, a, constant_flow(9, 8, 0, 0), constant_flow(10, 8, 0, 0)),
                    InvalidInput);
}

TEST_CASE("matching rejects a mask engulfing two others") {
    const int w = 40, h = 30;
    const auto s1 = mask_set(w, h, {rect(w, h, 5, 5, 15, 20), rect(w, h, 15, 5, 25, 20), rect(w, h, 30, 2, 38, 10)});
    const auto s2 = mask_set(w, h, {rect(w, h, 5, 5, 25, 20), rect(w, h, 30, 2, 38, 10)});
    const FlowField zero = constant_flow(w, h, 0, 0);
    const auto m = coincidence_matrices(s1, s2, zero, zero);
    CHECK(m.forward(0, 0) == 1.0);
    CHECK(m.forward(1, 0) == 1.0);
    CHECK(m.backward(0, 0) == doctest::Approx(0.5));
    const auto matches = match_masks(m);
    REQUIRE(matches.size() == 1);
    CHECK(matches[0] == MaskMatch{2, 1});
}

TEST_CASE("matching coverage floor is strict") {
    CoincidencePair m{Eigen::MatrixXd::Constant(1, 1, 0.94), Eigen::MatrixXd::Constant(1, 1, 0.94)};
    CHECK(match_masks(m).empty());
    m.forward(0, 0) = 0.96;
    CHECK(match_masks(m).empty());
    m.backward(0, 0) = 0.96;
    CHECK(match_masks(m).size() == 1);
    m.forward(0, 0) = m.backward(0, 0) = 0.95;
    CHECK(match_masks(m).empty());
    CHECK(match_masks(CoincidencePair{Eigen::MatrixXd(0, 3), Eigen::MatrixXd(0, 3)}).empty());
    CHECK_THROWS_AS(match_masks(CoincidencePair{Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(3, 2)}),
                    InvalidInput);
}

TEST_CASE("matching is injective and both argmax conditions hold") {
    Rng rng(77);
    for (int t = 0; t < 2000; ++t) {
        const int n1 = rng.uniform_int(1, 6), n2 = rng.uniform_int(1, 6);
        CoincidencePair m{Eigen::MatrixXd(n1, n2), Eigen::MatrixXd(n1, n2)};
        for (int i = 0; i < n1; ++i)
            for (int j = 0; j < n2; ++j) {
                // quantized values force plenty of ties
                m.forward(i, j) = std::round(rng.uniform(0.8, 1.0) * 20) / 20;
                m.backward(i, j) = std::round(rng.uniform(0.8, 1.0) * 20) / 20;
            }
        const auto matches = match_masks(m, 0.9);
        std::vector<int> used1(n1, 0), used2(n2, 0);
        for (const auto& mm : matches) {
            CHECK(++used1[mm.first] == 1);
            CHECK(++used2[mm.second] == 1);
            const auto i = static_cast<Eigen::Index>(mm.first);
            const auto j = static_cast<Eigen::Index>(mm.second);
            CHECK(m.forward(i, j) == m.forward.row(i).maxCoeff());
            CHECK(m.backward(i, j) == m.backward.col(j).maxCoeff());
            CHECK(m.forward(i, j) > 0.9);
            CHECK(m.backward(i, j) > 0.9);
        }
    }
}

TEST_CASE("extraction on clean metrics keeps the whole alpha") {
    const int w = 40, h = 30;
    const LabeledPair pair = background_pair(w, h, Task::Flow, 1);
    const auto s1 = mask_set(w, h, {rect(w, h, 8, 6, 20, 16)});
    const auto s2 = mask_set(w, h, {rect(w, h, 10, 7, 22, 17)});
    const auto a = extract_foreground(pair, {0, 0}, s1, s2, clean_quality(w, h), ThresholdConfig{});
    REQUIRE(a.has_value());
    CHECK(a->box1 == PixelBox{8, 6, 12, 10});
    CHECK(a->box2 == PixelBox{10, 7, 12, 10});
    CHECK(a->flow.valid == a->alpha1);
    CHECK(a->frame1(0, 0) == pair.frame1(8, 6));
    CHECK(a->frame2(3, 2) == pair.frame2(13, 9));
    CHECK(a->flow.value(5, 4) == pair.flow.value(13, 10));
}

TEST_CASE("extraction drops pixels failing the quality masks") {
    const int w = 40, h = 30;
    const LabeledPair pair = background_pair(w, h, Task::Flow, 2);
    const auto s1 = mask_set(w, h, {rect(w, h, 8, 6, 20, 16)});
    const auto s2 = mask_set(w, h, {rect(w, h, 8, 6, 20, 16)});
    const ThresholdConfig cfg;

    QualityMaps q = clean_quality(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < 13; ++x) q.rc.set(x, y, 0.9);  // 5 of 12 object columns
    const auto a = extract_foreground(pair, {0, 0}, s1, s2, q, cfg);
    REQUIRE(a.has_value());
    for (int y = 0; y < a->flow.height(); ++y)
        for (int x = 0; x < a->flow.width(); ++x) {
            CHECK(a->flow.is_valid(x, y) == (x >= 5));
            if (a->flow.is_valid(x, y)) CHECK(a->alpha1(x, y));
        }

    // more than half gone -> rejected
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < 15; ++x) q.rc.set(x, y, 0.9);
    CHECK_FALSE(extract_foreground(pair, {0, 0}, s1, s2, q, cfg).has_value());

    // nothing survives
    QualityMaps all_bad = clean_quality(w, h);
    for (auto& v : all_bad.gc.value) v = 0.5;
    CHECK_FALSE(extract_foreground(pair, {0, 0}, s1, s2, all_bad, cfg).has_value());
}

TEST_CASE("extraction rejects degenerate boxes and bad matches") {
    const int w = 40, h = 30;
    const LabeledPair pair = background_pair(w, h, Task::Flow, 3);
    const auto thin = mask_set(w, h, {rect(w, h, 8, 6, 9, 16)});
    const auto fine = mask_set(w, h, {rect(w, h, 8, 6, 20, 16)});
    CHECK_FALSE(extract_foreground(pair, {0, 0}, thin, fine, clean_quality(w, h), {}).has_value());
    CHECK_THROWS_AS(extract_foreground(pair, {1, 0}, fine, fine, clean_quality(w, h), {}), InvalidInput);
}

TEST_CASE("2D foreground: identity and translation") {
    const ForegroundAsset id = synth_2d_foreground(5, 48, 40, Affine2::identity());
    std::size_t n = 0;
    for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 48; ++x) {
            CHECK(id.flow.is_valid(x, y) == (id.alpha1(x, y) != 0));
            if (id.alpha1(x, y)) {
                ++n;
                CHECK(id.flow.value(x, y) == Flow{0.0, 0.0});
            }
        }
    CHECK(n > 200);
    CHECK(id.alpha2 == id.alpha1);
    CHECK(id.frame2 == id.frame1);

    const ForegroundAsset tr = synth_2d_foreground(5, 48, 40, Affine2::translation(3, 4));
    CHECK(tr.alpha1 == id.alpha1);
    for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 48; ++x) {
            if (!tr.alpha1(x, y)) continue;
            CHECK(tr.flow.value(x, y).u == doctest::Approx(3.0).epsilon(1e-12));
            CHECK(tr.flow.value(x, y).v == doctest::Approx(4.0).epsilon(1e-12));
            if (x + 3 < 48 && y + 4 < 40) {
                CHECK(tr.alpha2(x + 3, y + 4));
                CHECK(tr.frame2(x + 3, y + 4) == tr.frame1(x, y));
            }
        }
    CHECK_THROWS_AS(synth_2d_foreground(1, 7, 20, Affine2::identity()), InvalidInput);
}

TEST_CASE("2D foreground: rotation matches the closed-form rigid flow") {
    const double theta = 0.3;
    const ForegroundAsset a = synth_2d_foreground(9, 64, 50, Affine2::rotation(theta));
    const double cx = 31.5, cy = 24.5;
    for (int y = 0; y < 50; ++y)
        for (int x = 0; x < 64; ++x) {
            if (!a.alpha1(x, y)) continue;
            const double dx = x - cx, dy = y - cy;
            const double u = std::cos(theta) * dx - std::sin(theta) * dy - dx;
            const double v = std::sin(theta) * dx + std::cos(theta) * dy - dy;
            CHECK(std::abs(a.flow.value(x, y).u - u) < 1e-6);
            CHECK(std::abs(a.flow.value(x, y).v - v) < 1e-6);
        }
}

TEST_CASE("composite with zero assets is the identity") {
    const LabeledPair bg = background_pair(50, 40, Task::Flow, 8);
    CHECK(composite(bg, {}, std::vector<Placement>{}) == bg);
    CHECK(composite(bg, {}, 123u) == bg);
}

TEST_CASE("composite flow equals placed asset motion plus delta") {
    const LabeledPair bg = background_pair(80, 60, Task::Flow, 9);
    const ForegroundAsset a = synth_2d_foreground(2, 24, 20, Affine2::translation(3, 4));
    for (const auto& [scale, angle] : {std::pair{1.0, 0.0}, std::pair{1.3, 0.2}, std::pair{0.7, -0.15}}) {
        Placement pl;
        pl.scale = scale;
        pl.angle = angle;
        pl.target_center = {40, 30};
        pl.delta = {2, -1};
        const LabeledPair out = composite(bg, {a}, std::vector{pl});
        const double eu = scale * (std::cos(angle) * 3 - std::sin(angle) * 4) + 2;
        const double ev = scale * (std::sin(angle) * 3 + std::cos(angle) * 4) - 1;
        int inside = 0;
        for (int y = 0; y < 60; ++y)
            for (int x = 0; x < 80; ++x) {
                if (out.frame1(x, y) == bg.frame1(x, y)) continue;  // only pasted pixels change frame 1
                ++inside;
                REQUIRE(out.flow.is_valid(x, y));
                CHECK(out.flow.value(x, y).u == doctest::Approx(eu).epsilon(1e-12));
                CHECK(out.flow.value(x, y).v == doctest::Approx(ev).epsilon(1e-12));
                CHECK_FALSE(out.depth1.is_valid(x, y));
            }
        CHECK(inside > 40);
    }
}

TEST_CASE("composite occludes background moving behind the object") {
    const int w = 60, h = 40;
    LabeledPair bg = background_pair(w, h, Task::Flow, 10);
    bg.flow = constant_flow(w, h, 0, 0);
    const ForegroundAsset a = synth_2d_foreground(3, 16, 16, Affine2::translation(6, 0));
    Placement pl;
    pl.target_center = {30, 20};
    const LabeledPair out = composite(bg, {a}, std::vector{pl});
    int newly = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const bool f1 = !(out.frame1(x, y) == bg.frame1(x, y));
            const bool f2 = !(out.frame2(x, y) == bg.frame2(x, y));
            if (f2 && !f1) {
                ++newly;
                CHECK_FALSE(out.occlusion.is_visible(x, y));
                CHECK_FALSE(out.flow.is_valid(x, y));
            }
        }
    CHECK(newly > 10);
}

TEST_CASE("composite never touches pixels outside its region") {
    const int w = 64, h = 48;
    const LabeledPair bg = background_pair(w, h, Task::Flow, 11);
    const ForegroundAsset a = synth_2d_foreground(4, 20, 18, Affine2::rotation(0.2));
    const ForegroundAsset b = synth_2d_foreground(6, 16, 24, Affine2::translation(-2, 3));
    for (std::uint64_t s = 0; s < 100; ++s) {
        std::vector<ForegroundAsset> assets{a, b};
        assets.resize(s % 3);
        std::vector<Placement> pls;
        for (std::size_t k = 0; k < assets.size(); ++k)
            pls.push_back(random_placement(assets[k], w, h, Task::Flow, mix_seed(s, k)));
        const LabeledPair out = composite(bg, assets, pls);
        const BinaryMask region = composite_region(bg, assets, pls);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (region(x, y)) continue;
                REQUIRE(out.frame1(x, y) == bg.frame1(x, y));
                REQUIRE(out.frame2(x, y) == bg.frame2(x, y));
                REQUIRE(out.flow.value(x, y) == bg.flow.value(x, y));
                REQUIRE(out.flow.valid(x, y) == bg.flow.valid(x, y));
                REQUIRE(out.occlusion.visible(x, y) == bg.occlusion.visible(x, y));
                REQUIRE(out.depth1.value(x, y) == bg.depth1.value(x, y));
                REQUIRE(out.depth2.value(x, y) == bg.depth2.value(x, y));
            }
    }
}

TEST_CASE("random placement ranges and determinism") {
    const ForegroundAsset a = synth_2d_foreground(1, 20, 20, Affine2::identity());
    for (std::uint64_t s = 0; s < 500; ++s) {
        const Placement p = random_placement(a, 100, 80, Task::Flow, s);
        CHECK(p.scale >= 0.5);
        CHECK(p.scale <= 1.5);
        CHECK(p.target_center.x() >= 0.0);
        CHECK(p.target_center.x() <= 99.0);
        CHECK(p.target_center.y() >= 0.0);
        CHECK(p.target_center.y() <= 79.0);
        const Placement q = random_placement(a, 100, 80, Task::Stereo, s);
        CHECK(q.angle == 0.0);
        CHECK(q.delta.y() == 0.0);
    }
    const Placement p1 = random_placement(a, 100, 80, Task::Flow, 5);
    const Placement p2 = random_placement(a, 100, 80, Task::Flow, 5);
    CHECK(p1.target_center == p2.target_center);
    CHECK(p1.scale == p2.scale);
}

TEST_CASE("stereo composite layers the foreground in front") {
    const int w = 80, h = 50;
    const LabeledPair bg = background_pair(w, h, Task::Stereo, 12);
    ForegroundAsset a = synth_2d_foreground(7, 20, 20, Affine2::translation(-2, 0));
    a.task = Task::Stereo;
    for (std::uint64_t s = 0; s < 20; ++s) {
        Placement pl = random_placement(a, w, h, Task::Stereo, s);
        pl.target_center = {40, 25};
        const LabeledPair out = composite(bg, {a}, std::vector{pl});
        double fg_min = 1e300, bg_max = 0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (out.frame1(x, y) == bg.frame1(x, y)) continue;
                REQUIRE(out.flow.is_valid(x, y));
                CHECK(out.flow.value(x, y).v == 0.0);
                fg_min = std::min(fg_min, -out.flow.value(x, y).u);
                bg_max = std::max(bg_max, -bg.flow.value(x, y).u);
            }
        CHECK(fg_min > bg_max);
    }
    CHECK_THROWS_AS(composite(bg, {synth_2d_foreground(7, 20, 20, Affine2::identity())}, 1u), InvalidInput);
}

TEST_CASE("composite validates its inputs") {
    const LabeledPair bg = background_pair(30, 20, Task::Flow, 13);
    const ForegroundAsset a = synth_2d_foreground(1, 10, 10, Affine2::identity());
    CHECK_THROWS_AS(composite(bg, {a, a, a}, 1u), InvalidInput);
    CHECK_THROWS_AS(composite(bg, {a}, std::vector<Placement>{}), InvalidInput);
    Placement far;
    far.target_center = {-500, -500};
    CHECK(composite(bg, {a}, std::vector{far}) == bg);
}
