#include "support.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <unistd.h>

namespace testsupport {

RigidPose random_pose(Rng& rng, double rot, double trans) {
    const double z = rng.uniform(-1.0, 1.0);
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double r = std::sqrt(1.0 - z * z);
    const Vec3 axis(r * std::cos(phi), r * std::sin(phi), z);
    RigidPose p;
    p.rotation = Eigen::AngleAxisd(rng.uniform(0.0, rot), axis).toRotationMatrix();
    p.translation = Vec3(rng.uniform(-trans, trans), rng.uniform(-trans, trans), rng.uniform(-trans, trans));
    return p;
}

AnalyticPrimitive checker_plane(const Vec3& normal, double offset, double cell) {
    AnalyticPrimitive p;
    p.shape = Plane{normal.normalized(), offset};
    p.texture.kind = Texture::Kind::Checkerboard;
    p.texture.color_a = {0.9, 0.85, 0.7};
    p.texture.color_b = {0.15, 0.2, 0.35};
    p.texture.scale = cell;
    return p;
}

AnalyticPrimitive sphere(const Vec3& center, double radius, Rgb a, Rgb b) {
    AnalyticPrimitive p;
    p.shape = Sphere{center, radius};
    p.texture.kind = Texture::Kind::Checkerboard;
    p.texture.color_a = a;
    p.texture.color_b = b;
    p.texture.scale = 0.25;
    return p;
}

AnalyticScene random_analytic_scene(std::uint64_t seed) {
    Rng rng(seed);
    AnalyticScene s;
    s.primitives.push_back(checker_plane({0, 0, -1}, -rng.uniform(6.0, 9.0), rng.uniform(0.3, 0.8)));
    s.primitives.push_back(checker_plane({0, -1, 0}, -rng.uniform(1.0, 1.6), rng.uniform(0.3, 0.6)));
    const int n = rng.uniform_int(1, 3);
    for (int i = 0; i < n; ++i) {
        const Vec3 c(rng.uniform(-1.2, 1.2), rng.uniform(-0.6, 0.4), rng.uniform(2.5, 5.0));
        s.primitives.push_back(sphere(c, rng.uniform(0.3, 0.7), {rng.uniform(), rng.uniform(), rng.uniform()},
                                      {rng.uniform(), rng.uniform(), rng.uniform()}));
    }
    return s;
}

AnalyticScene two_plane_scene() {
    AnalyticScene s;
    s.primitives.push_back(checker_plane({0, 0, -1}, -6.0, 0.5));
    AnalyticPrimitive panel;
    panel.shape = Box{Vec3(-0.8, -0.6, 2.5), Vec3(0.6, 0.5, 2.6)};
    panel.texture.kind = Texture::Kind::Checkerboard;
    panel.texture.color_a = {0.8, 0.2, 0.2};
    panel.texture.color_b = {0.2, 0.8, 0.3};
    panel.texture.scale = 0.2;
    s.primitives.push_back(panel);
    return s;
}

DensityScene shells(const AnalyticScene& scene) { return to_density_scene(scene, 500.0, 0.05); }

GrayImage gaussian_blur(const GrayImage& img, double sigma) {
    if (sigma <= 0.0) return img;
    const int r = static_cast<int>(std::ceil(6.0 * sigma));
    std::vector<double> k(2 * r + 1);
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) sum += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (double& v : k) v /= sum;
    const int w = img.width();
    const int h = img.height();
    // half-sample symmetric borders
    auto mirror = [](int i, int n) {
        while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
        return i;
    };
    GrayImage tmp(w, h), out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[i + r] * img(mirror(x + i, w), y);
            tmp(x, y) = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp(x, mirror(y + i, h));
            out(x, y) = acc;
        }
    return out;
}

GrayImage checkerboard(int w, int h, int cell, double lo, double hi, int phase) {
    GrayImage g(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) g(x, y) = (((x + phase) / cell + (y + phase) / cell) % 2) ? hi : lo;
    return g;
}

GrayImage rectangles(int w, int h, std::uint64_t seed) {
    Rng rng(seed);
    GrayImage g(w, h, 0.5);
    const int n = rng.uniform_int(6, 14);
    for (int i = 0; i < n; ++i) {
        const int x0 = rng.uniform_int(0, w - 8);
        const int y0 = rng.uniform_int(0, h - 8);
        const int x1 = std::min(w, x0 + rng.uniform_int(6, w / 2));
        const int y1 = std::min(h, y0 + rng.uniform_int(6, h / 2));
        const double v = rng.uniform();
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) g(x, y) = v;
    }
    return g;
}

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    std::ostringstream name;
    name << "labelforge_" << tag << "_" << ::getpid() << "_" << counter++;
    path_ = std::filesystem::temp_directory_path() / name.str();
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

OcclusionMask analytic_visibility(const AnalyticScene& scene, const CameraIntrinsics& K,
                                  const RigidPose& pose1, const RigidPose& pose2,
                                  const DepthMap& depth1) {
    OcclusionMask m(K.width, K.height, 0);
    for (int y = 0; y < K.height; ++y)
        for (int x = 0; x < K.width; ++x) {
            if (!depth1.is_valid(x, y)) continue;
            const Vec3 X = backproject({double(x), double(y)}, depth1.value(x, y), K, pose1);
            const Projection pr = project(X, K, pose2);
            if (pr.behind_camera || !in_frame(pr.pixel, K)) continue;
            const auto hit = scene.first_hit(pixel_ray(pr.pixel, K, pose2));
            m.visible(x, y) = hit && hit->t >= pr.depth * (1.0 - 1e-7);
        }
    return m;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace testsupport
