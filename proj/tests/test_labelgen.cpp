#include <doctest.h>

#include <cmath>

#include "labelforge/error.hpp"
#include "labelforge/labels.hpp"
#include "labelforge/render.hpp"
#include "support.hpp"

using namespace labelforge;
using namespace testsupport;

namespace {

DepthMap constant_depth(int w, int h, double z) {
    DepthMap d(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) d.set(x, y, z);
    return d;
}

FlowField constant_flow(int w, int h, Flow f) {
    FlowField out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.set(x, y, f);
    return out;
}

Reprojection one_pixel(double depth) {
    DepthMap d(1, 1);
    d.set(0, 0, depth);
    return reproject(d, CameraIntrinsics{1, 1, 0, 0, 1, 1}, {}, {});
}

}  // namespace

TEST_CASE("flow from depth: identical poses give zero flow") {
    const auto K = small_camera(40, 30);
    const AnalyticScene scene = random_analytic_scene(3);
    const RigidPose pose = compose_perturbed_pose({}, 0.1, 0.1, 5);
    const DepthMap d = render_analytic(scene, K, pose).depth;
    const FlowField f = flow_from_depth(d, K, pose, pose);
    for (int y = 0; y < K.height; ++y)
        for (int x = 0; x < K.width; ++x) {
            CHECK(f.is_valid(x, y) == d.is_valid(x, y));
            if (!f.is_valid(x, y)) continue;
            CHECK(std::abs(f.value(x, y).u) < 1e-9);
            CHECK(std::abs(f.value(x, y).v) < 1e-9);
        }
}

TEST_CASE("flow from depth: pure rotation matches the homography") {
    const auto K = small_camera(64, 48);
    const Mat3 Km = K.matrix();
    Rng rng(9);
    for (std::uint64_t s = 0; s < 5; ++s) {
        const RigidPose pose1 = random_pose(rng, 1.0, 1.0);
        const RigidPose pose2 = compose_perturbed_pose(pose1, 0.05, 0.0, s);
        REQUIRE((pose1.translation - pose2.translation).norm() == 0.0);
        DepthMap d(K.width, K.height);
        for (int y = 0; y < K.height; ++y)
            for (int x = 0; x < K.width; ++x) d.set(x, y, rng.uniform(0.5, 50.0));
        const FlowField f = flow_from_depth(d, K, pose1, pose2);
        const Mat3 H = Km * pose2.rotation.transpose() * pose1.rotation * Km.inverse();
        int valid = 0;
        for (int y = 0; y < K.height; ++y)
            for (int x = 0; x < K.width; ++x) {
                const Vec3 q = H * Vec3(x, y, 1.0);
                const double u = q.x() / q.z();
                const double v = q.y() / q.z();
                const bool inside = u >= -0.5 && v >= -0.5 && u < K.width - 0.5 && v < K.height - 0.5;
                CHECK(f.is_valid(x, y) == inside);
                if (!f.is_valid(x, y)) continue;
                ++valid;
                CHECK(std::abs(f.value(x, y).u - (u - x)) < 1e-6);
                CHECK(std::abs(f.value(x, y).v - (v - y)) < 1e-6);
            }
        CHECK(valid > 0);
    }
}

TEST_CASE("flow from depth: stereo plane gives -b fx / Z") {
    const auto K = small_camera(64, 48);
    const double b = 0.25;
    const double Z = 7.5;
    const FlowField f = flow_from_depth(constant_depth(K.width, K.height, Z), K, {}, stereo_pose({}, b));
    for (int y = 0; y < K.height; ++y)
        for (int x = 0; x < K.width; ++x) {
            const bool inside = x - b * K.fx / Z >= -0.5;
            CHECK(f.is_valid(x, y) == inside);
            if (!inside) continue;
            CHECK(std::abs(f.value(x, y).u + b * K.fx / Z) < 1e-6);
            CHECK(std::abs(f.value(x, y).v) < 1e-6);
        }
}

TEST_CASE("stereo flow has no vertical component on analytic scenes") {
    const auto K = small_camera(80, 64);
    Rng rng(2);
    for (std::uint64_t s = 1; s <= 5; ++s) {
        const RigidPose pose1 = compose_perturbed_pose({}, 0.2, 0.3, s);
        const RigidPose pose2 = stereo_pose(pose1, rng.uniform(0.05, 0.5));
        const DepthMap d = render_analytic(random_analytic_scene(s), K, pose1).depth;
        const FlowField f = flow_from_depth(d, K, pose1, pose2);
        double max_v = 0.0;
        for (int y = 0; y < K.height; ++y)
            for (int x = 0; x < K.width; ++x)
                if (f.is_valid(x, y)) max_v = std::max(max_v, std::abs(f.value(x, y).v));
        CHECK(max_v < 1e-6);
    }
}

TEST_CASE("disparity from flow and from depth") {
    FlowField f(3, 1);
    f.set(0, 0, {-2.0, 0.0});
    f.set(1, 0, {0.0, 0.0});
    f.set(2, 0, {-3.0, 0.02});
    const DisparityMap d = disparity_from_flow(f);
    CHECK(d.value(0, 0) == 2.0);
    CHECK(d.is_valid(1, 0));
    CHECK(d.value(1, 0) == 0.0);
    CHECK_FALSE(d.is_valid(2, 0));  // rectification violation

    DepthMap z(3, 1);
    z.set(0, 0, 100.0);
    z.set(2, 0, 50.0);
    const DisparityMap dz = disparity_from_depth(z, 0.5, 400.0);
    CHECK(dz.value(0, 0) == 2.0);
    CHECK_FALSE(dz.is_valid(1, 0));
    CHECK(dz.value(2, 0) == 2.0 * dz.value(0, 0));
    CHECK_THROWS_AS(disparity_from_depth(z, 0.0, 400.0), InvalidInput);

    const FlowField back = flow_from_disparity(dz);
    CHECK(back.value(0, 0) == Flow{-2.0, 0.0});
    CHECK_FALSE(back.is_valid(1, 0));
}

TEST_CASE("disparity via flow agrees with disparity via depth") {
    const auto K = small_camera(80, 64);
    for (std::uint64_t s = 1; s <= 5; ++s) {
        const RigidPose pose1 = compose_perturbed_pose({}, 0.1, 0.2, s + 50);
        const double b = 0.1 * s;
        const DepthMap d = render_analytic(random_analytic_scene(s), K, pose1).depth;
        const DisparityMap via_flow = disparity_from_flow(flow_from_depth(d, K, pose1, stereo_pose(pose1, b)));
        const DisparityMap via_depth = disparity_from_depth(d, b, K.fx);
        int n = 0;
        for (int y = 0; y < K.height; ++y)
            for (int x = 0; x < K.width; ++x) {
                if (!via_flow.is_valid(x, y)) continue;
                REQUIRE(via_depth.is_valid(x, y));
                CHECK(std::abs(via_flow.value(x, y) - via_depth.value(x, y)) < 1e-4);
                ++n;
            }
        CHECK(n > K.width * K.height / 2);
    }
}

TEST_CASE("forward and backward flows compose to identity on co-visible interiors") {
    const auto K = small_camera(80, 64);
    for (std::uint64_t s = 1; s <= 4; ++s) {
        const AnalyticScene scene = random_analytic_scene(s);
        const RigidPose pose1 = compose_perturbed_pose({}, 0.05, 0.1, s);
        const RigidPose pose2 = compose_perturbed_pose(pose1, 0.03, 0.15, s + 100);
        const AnalyticRender r1 = render_analytic(scene, K, pose1);
        const AnalyticRender r2 = render_analytic(scene, K, pose2);
        const FlowField f12 = flow_from_depth(r1.depth, K, pose1, pose2);
        const FlowField f21 = flow_from_depth(r2.depth, K, pose2, pose1);
        const OcclusionMask vis = analytic_visibility(scene, K, pose1, pose2, r1.depth);
        int n = 0;
        for (int y = 0; y < K.height; ++y)
            for (int x = 0; x < K.width; ++x) {
                if (!vis.is_visible(x, y)) continue;
                const Flow f = f12.value(x, y);
                const double tx = x + f.u;
                const double ty = y + f.v;
                const int x0 = static_cast<int>(std::floor(tx));
                const int y0 = static_cast<int>(std::floor(ty));
                // skip targets whose bilinear stencil straddles two surfaces
                bool same = true;
                for (int dy = 0; dy <= 1; ++dy)
                    for (int dx = 0; dx <= 1; ++dx) {
                        const int xi = std::clamp(x0 + dx, 0, K.width - 1);
                        const int yi = std::clamp(y0 + dy, 0, K.height - 1);
                        same = same && r2.primitive(xi, yi) == r1.primitive(x, y);
                    }
                if (!same) continue;
                Flow b;
                REQUIRE(sample_flow(f21, tx, ty, b));
                CHECK(std::sqrt((f + b).squared_norm()) < 0.5);
                ++n;
            }
        CHECK(n > K.width * K.height / 2);
    }
}

TEST_CASE("ray-integral occlusion examples") {
    const RayIntegralOcclusion opts{0.3, 0.2};
    CHECK(occlusion_by_ray_integral(RayWeightField::single_ray({{2.9, 3.0, 0.9, {}}}), one_pixel(3.0), opts)
              .is_visible(0, 0));
    CHECK(occluding_mass(std::vector<RaySample>{{2.9, 3.0, 0.9, {}}}, 3.0, 0.2) == 0.0);
    const auto occluded = RayWeightField::single_ray({{1.0, 1.1, 0.4, {}}, {2.9, 3.0, 0.6, {}}});
    CHECK(occluding_mass(occluded.ray(0, 0), 3.0, 0.2) == doctest::Approx(0.4));
    CHECK_FALSE(occlusion_by_ray_integral(occluded, one_pixel(3.0), opts).is_visible(0, 0));
    const auto light = RayWeightField::single_ray({{1.0, 1.1, 0.3, {}}, {2.9, 3.0, 0.7, {}}});
    CHECK(occlusion_by_ray_integral(light, one_pixel(3.0), opts).is_visible(0, 0));
    // without a margin a surface's own mass occludes itself
    const auto self = RayWeightField::single_ray({{2.8, 2.9, 0.5, {}}, {2.9, 3.0, 0.5, {}}});
    CHECK_FALSE(occlusion_by_ray_integral(self, one_pixel(3.0), {0.3, 0.0}).is_visible(0, 0));
    CHECK(occlusion_by_ray_integral(self, one_pixel(3.0), opts).is_visible(0, 0));
}

TEST_CASE("ray-integral occlusion: zero motion is fully visible, leaving the frame is occluded") {
    const auto K = small_camera(48, 40);
    const AnalyticScene scene = random_analytic_scene(6);
    const RaySampling sampling{0.5, 12.0, 384};
    const RenderResult r = render_rayfield_nerf(shells(scene), K, {}, sampling);
    const DepthMap d = median_depth(r.field, DepthMode::Nerf);
    const RayIntegralOcclusion opts{0.3, 2 * sampling.step()};
    const OcclusionMask same = occlusion_by_ray_integral(r.field, reproject(d, K, {}, {}), opts);
    for (int y = 0; y < K.height; ++y)
        for (int x = 0; x < K.width; ++x)
            if (d.is_valid(x, y)) CHECK(same.is_visible(x, y));

    const RigidPose shifted = stereo_pose({}, 2.0);  // large baseline pushes the left columns out
    const Reprojection rp = reproject(d, K, {}, shifted);
    const OcclusionMask m = occlusion_by_ray_integral(r.field, rp, opts);
    for (int y = 0; y < K.height; ++y)
        for (int x = 0; x < K.width; ++x)
            if (rp.valid(x, y) && !rp.in_frame(x, y)) CHECK_FALSE(m.is_visible(x, y));
}

TEST_CASE("forward-backward check examples") {
    const FlowField f = constant_flow(20, 10, {0.3, -0.2});
    const FlowField b = constant_flow(20, 10, {-0.3, 0.2});
    const OcclusionMask m = occlusion_by_fb_check(f, b);
    for (auto v : m.visible) CHECK(v == 1);

    const FlowField z = constant_flow(20, 10, {0, 0});
    for (auto v : occlusion_by_fb_check(z, z).visible) CHECK(v == 1);

    FlowField f1(20, 1);
    f1.set(0, 0, {10, 0});
    const FlowField b1 = constant_flow(20, 1, {-2, 0});
    // residual 64 > 0.01 * (100 + 4) + 0.5
    CHECK_FALSE(occlusion_by_fb_check(f1, b1).is_visible(0, 0));

    FlowField out(20, 1);
    out.set(19, 0, {3, 0});
    CHECK_FALSE(occlusion_by_fb_check(out, constant_flow(20, 1, {0, 0})).is_visible(19, 0));
    CHECK_THROWS_AS(occlusion_by_fb_check(f, constant_flow(5, 5, {0, 0})), InvalidInput);
}

TEST_CASE("ray-integral occlusion tracks analytic visibility on a two-plane scene") {
    const auto K = small_camera(160, 128);
    const AnalyticScene scene = two_plane_scene();
    const RaySampling sampling{0.5, 12.0, 512};
    const RigidPose pose1;
    const RigidPose pose2 = stereo_pose(pose1, 0.4);
    const RenderResult r1 = render_rayfield_nerf(shells(scene), K, pose1, sampling);
    const RenderResult r2 = render_rayfield_nerf(shells(scene), K, pose2, sampling);
    const DepthMap d1 = median_depth(r1.field, DepthMode::Nerf);
    const OcclusionMask m =
        occlusion_by_ray_integral(r2.field, reproject(d1, K, pose1, pose2), {0.3, 2 * sampling.step()});
    const OcclusionMask truth = analytic_visibility(scene, K, pose1, pose2, render_analytic(scene, K, pose1).depth);
    int disagree = 0;
    int occluded = 0;
    for (std::size_t i = 0; i < m.visible.size(); ++i) {
        disagree += m.visible[i] != truth.visible[i];
        occluded += truth.visible[i] == 0;
    }
    CHECK(occluded > 200);  // the scene does contain occlusions
    CHECK(disagree < 0.01 * m.visible.size());
}
