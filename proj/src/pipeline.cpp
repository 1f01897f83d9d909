#include "labelforge/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "labelforge/error.hpp"
#include "labelforge/io.hpp"
#include "labelforge/rng.hpp"

namespace labelforge {

namespace fs = std::filesystem;

DepthMode depth_mode(Backend b) { return b == Backend::Splats ? DepthMode::Splat : DepthMode::Nerf; }

PairPoses pair_poses(const RunConfig& cfg, const SceneSpec& scene, int index) {
    const std::uint64_t s = mix_seed(cfg.seed, static_cast<std::uint64_t>(index));
    PairPoses p;
    p.pose1 = compose_perturbed_pose(scene.pose, cfg.viewpoint_rotation, cfg.viewpoint_translation,
                                     mix_seed(s, 1));
    p.pose2 = cfg.task == Task::Stereo
                  ? stereo_pose(p.pose1, cfg.baseline)
                  : compose_perturbed_pose(p.pose1, cfg.rotation_amplitude, cfg.translation_amplitude,
                                           mix_seed(s, 2));
    return p;
}

namespace {

struct View {
    RgbImage image;
    RayWeightField field;
    DepthMap depth;
};

View render_view(const RunConfig& cfg, Backend backend, const BuiltScene& built,
                 const CameraIntrinsics& K, const RigidPose& pose) {
    View v;
    if (backend == Backend::Analytic) {
        AnalyticRender a = render_analytic(built.analytic, K, pose);
        v.image = std::move(a.image);
        v.depth = std::move(a.depth);
        v.field = RayWeightField(K.width, K.height);
        for (int y = 0; y < K.height; ++y)
            for (int x = 0; x < K.width; ++x) {
                if (v.depth.is_valid(x, y)) {
                    const double t = v.depth.value(x, y);
                    const RaySample s{t, t, 1.0, v.image(x, y)};
                    v.field.push_ray(std::span<const RaySample>(&s, 1));
                } else {
                    v.field.push_ray({});
                }
            }
        return v;
    }
    RenderResult r = backend == Backend::NerfDensity
                         ? render_rayfield_nerf(built.density, K, pose, cfg.sampling)
                         : render_rayfield_splats(built.splats, K, pose);
    v.image = std::move(r.image);
    v.field = std::move(r.field);
    v.depth = cfg.depth == DepthEstimator::Median ? median_depth(v.field, depth_mode(backend))
                                                  : mean_depth(v.field);
    return v;
}

std::vector<ForegroundAsset> synth_assets(const RunConfig& cfg, std::uint64_t seed) {
    std::vector<ForegroundAsset> assets;
    for (int k = 0; k < cfg.foreground_count; ++k) {
        Rng rng(mix_seed(seed, 100 + k));
        Affine2 motion;
        if (cfg.task == Task::Flow) {
            const double s = rng.uniform(0.9, 1.1);
            motion = Affine2::rotation(rng.uniform(-0.2, 0.2));
            motion.linear *= s;
            motion.offset = {rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)};
        } else {
            motion = Affine2::translation(-rng.uniform(1.0, 6.0), 0.0);
        }
        ForegroundAsset a = synth_2d_foreground(rng.next_u64(), cfg.foreground_size, cfg.foreground_size, motion);
        a.task = cfg.task;
        assets.push_back(std::move(a));
    }
    return assets;
}

}  // namespace

PairProducts generate_pair(const RunConfig& cfg, const SceneSpec& scene, const BuiltScene& built,
                           int index) {
    const Backend backend = cfg.backend.value_or(scene.backend);
    const CameraIntrinsics& K = scene.camera;
    PairProducts out;
    out.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(index));
    out.poses = pair_poses(cfg, scene, index);
    const RigidPose& p1 = out.poses.pose1;
    const RigidPose& p2 = out.poses.pose2;

    View v1 = render_view(cfg, backend, built, K, p1);
    View v2 = render_view(cfg, backend, built, K, p2);

    const FlowField geometric = flow_from_depth(v1.depth, K, p1, p2);
    out.raw_label = cfg.task == Task::Stereo ? flow_from_disparity(disparity_from_flow(geometric))
                                             : geometric;

    OcclusionSource occ = cfg.occlusion;
    if (occ == OcclusionSource::Auto)
        occ = backend == Backend::Splats ? OcclusionSource::ForwardBackward : OcclusionSource::RayIntegral;
    if (occ == OcclusionSource::RayIntegral) {
        const Reprojection rp = reproject(v1.depth, K, p1, p2);
        out.maps.occ = occlusion_by_ray_integral(
            v2.field, rp, {cfg.thresholds.occ_th, 2.0 * cfg.sampling.step()});
    } else {
        const FlowField backward = flow_from_depth(v2.depth, K, p2, p1);
        out.maps.occ = occlusion_by_fb_check(geometric, backward);
    }

    const DepthMode mode = depth_mode(backend);
    out.maps.rc = reconstruction_confidence(v1.field, mode, cfg.thresholds);
    out.maps.gc = geometric_consistency(v1.depth, v2.depth, K, p1, p2);
    out.maps.vss = visual_structural_similarity(v1.image, v2.image, out.raw_label, cfg.ssim);

    out.pair.task = cfg.task;
    out.pair.flow = fuse_labels(out.raw_label, out.maps, cfg.thresholds, cfg.selection, mode);
    out.pair.occlusion = out.maps.occ;
    out.pair.frame1 = std::move(v1.image);
    out.pair.frame2 = std::move(v2.image);
    out.pair.depth1 = std::move(v1.depth);
    out.pair.depth2 = std::move(v2.depth);
    out.field1 = std::move(v1.field);
    out.field2 = std::move(v2.field);

    if (cfg.foreground_count > 0) {
        const auto assets = synth_assets(cfg, out.seed);
        out.pair = composite(out.pair, assets, mix_seed(out.seed, 3));
        out.maps.occ = out.pair.occlusion;
    }
    out.fused_valid = out.pair.flow.valid;
    try {
        out.gc_l = gc_l_score(out.maps.gc, out.maps.occ);
    } catch (const InvalidInput&) {
        out.gc_l.reset();
    }
    return out;
}

void build_directory_atomically(const fs::path& out_dir, bool force,
                                const std::function<void(const fs::path&)>& build) {
    const fs::path target = fs::absolute(out_dir).lexically_normal();
    if (fs::exists(target) && !force)
        throw ConfigError("output directory exists: " + target.string() + " (use --force to replace)");
    const fs::path parent = target.parent_path();
    fs::create_directories(parent);
    const fs::path tmp = parent / ("." + target.filename().string() + ".partial");
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    try {
        build(tmp);
    } catch (...) {
        std::error_code ec;
        fs::remove_all(tmp, ec);
        throw;
    }
    if (fs::exists(target)) {
        const fs::path old = parent / ("." + target.filename().string() + ".old");
        fs::remove_all(old);
        fs::rename(target, old);
        fs::rename(tmp, target);
        fs::remove_all(old);
    } else {
        fs::rename(tmp, target);
    }
}

namespace {

std::string pair_id(int index) {
    std::ostringstream ss;
    ss << std::setw(6) << std::setfill('0') << index;
    return ss.str();
}

DisparityMap disparity_of(const FlowField& f) {
    DisparityMap d(f.width(), f.height());
    for (std::size_t i = 0; i < d.value.size(); ++i)
        if (f.valid[i]) {
            d.value[i] = std::abs(f.value[i].u);
            d.valid[i] = 1;
        }
    return d;
}

FlowField stereo_flow(const DisparityMap& d) { return flow_from_disparity(d); }

// Writes one pair's files under root/pairs/<id>/ and fills the record's file table.
void write_pair_files(const fs::path& root, PairRecord& rec, const LabeledPair& pair,
                      const FlowField& raw_label, const QualityMaps& maps) {
    const std::string rel = "pairs/" + rec.id + "/";
    fs::create_directories(root / rel);
    auto put = [&](const std::string& role, const std::string& name) {
        rec.files[role] = rel + name;
        return root / (rel + name);
    };
    write_png_rgb8(pair.frame1, put("frame1", "frame1.png"));
    write_png_rgb8(pair.frame2, put("frame2", "frame2.png"));
    if (pair.task == Task::Flow) {
        write_flo(pair.flow, put("label", "flow.flo"));
        write_flo(raw_label, put("label_raw", "flow_raw.flo"));
    } else {
        write_disparity_png16(disparity_of(pair.flow), put("label", "disparity.png"));
        write_pfm(disparity_of(raw_label), put("label_raw", "disparity_raw.pfm"));
    }
    write_mask_png(pair.flow.valid, put("valid", "valid.png"));
    write_mask_png(pair.occlusion.visible, put("occlusion", "occlusion.png"));
    write_pfm(pair.depth1, put("depth1", "depth1.pfm"));
    write_pfm(pair.depth2, put("depth2", "depth2.pfm"));
    write_pfm(maps.rc, put("rc", "rc.pfm"));
    write_pfm(maps.gc, put("gc", "gc.pfm"));
    write_pfm(maps.vss, put("vss", "vss.pfm"));
}

void fill_checksums(const fs::path& root, PairRecord& rec) {
    rec.checksums.clear();
    for (const auto& [role, file] : rec.files) rec.checksums[file] = file_crc32(root / file);
}

void write_text(const fs::path& path, const std::string& text) {
    write_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

template <typename Fn>
void run_parallel(int count, int jobs, Fn&& fn) {
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(count);
            }
        }
    };
    const int n = std::max(1, std::min(jobs, count));
    std::vector<std::thread> pool;
    for (int t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace

DatasetManifest generate_dataset(RunConfig cfg, const fs::path& out_dir, const GenerateOptions& opts) {
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.jobs) cfg.jobs = *opts.jobs;
    cfg.validate();
    if (!cfg.scene) throw ConfigError("no scene given");
    const SceneSpec& scene = *cfg.scene;
    const BuiltScene built = build_scene(scene);
    const Backend backend = cfg.backend.value_or(scene.backend);
    if (backend == Backend::Splats && built.splats.splats.empty() && cfg.pairs > 0)
        throw ConfigError("splat backend selected but the scene has no splats");

    DatasetManifest manifest;
    manifest.task = cfg.task;
    manifest.backend = to_string(backend);
    manifest.depth = cfg.depth == DepthEstimator::Median ? "median" : "mean";
    manifest.seed = cfg.seed;
    manifest.pairs.resize(static_cast<std::size_t>(cfg.pairs));
    std::mutex log_mutex;

    build_directory_atomically(out_dir, opts.force, [&](const fs::path& root) {
        run_parallel(cfg.pairs, cfg.jobs, [&](int i) {
            PairProducts prod;
            try {
                prod = generate_pair(cfg, scene, built, i);
            } catch (const std::exception& e) {
                throw std::runtime_error("pair " + std::to_string(i) + ": " + e.what());
            }
            PairRecord& rec = manifest.pairs[static_cast<std::size_t>(i)];
            rec.id = pair_id(i);
            rec.task = cfg.task;
            rec.intrinsics = scene.camera;
            rec.pose1 = prod.poses.pose1;
            rec.pose2 = prod.poses.pose2;
            rec.baseline = cfg.task == Task::Stereo ? cfg.baseline : 0.0;
            rec.scene_id = scene.id;
            rec.seed = prod.seed;
            rec.gc_l = prod.gc_l;
            write_pair_files(root, rec, prod.pair, prod.raw_label, prod.maps);
            if (cfg.dump_rayfields) {
                const std::string rel = "pairs/" + rec.id + "/";
                write_rayfield(prod.field1, root / (rel + "rayfield1.bin"));
                rec.files["rayfield1"] = rel + "rayfield1.bin";
            }
            fill_checksums(root, rec);
            if (opts.log) {
                std::lock_guard lock(log_mutex);
                *opts.log << "pair " << rec.id << " done";
                if (rec.gc_l) *opts.log << " gc_l=" << *rec.gc_l;
                *opts.log << "\n";
            }
        });
        write_text(root / "manifest.json", dump_manifest(manifest));
    });
    return manifest;
}

LoadedPair load_pair(const fs::path& dir, const PairRecord& rec) {
    auto file = [&](const std::string& role) {
        auto it = rec.files.find(role);
        if (it == rec.files.end()) throw FormatError("pair " + rec.id + " has no '" + role + "' file");
        return dir / it->second;
    };
    LoadedPair lp;
    lp.record = rec;
    lp.pair.task = rec.task;
    lp.pair.frame1 = read_png_rgb(file("frame1"));
    lp.pair.frame2 = read_png_rgb(file("frame2"));
    if (rec.task == Task::Flow) {
        lp.pair.flow = read_flo(file("label"));
        lp.raw_label = read_flo(file("label_raw"));
    } else {
        lp.pair.flow = stereo_flow(read_disparity_png16(file("label")));
        lp.raw_label = stereo_flow(read_pfm<DisparityTag>(file("label_raw")));
    }
    lp.pair.occlusion.visible = read_mask_png(file("occlusion"));
    lp.pair.depth1 = read_pfm<DepthTag>(file("depth1"));
    lp.pair.depth2 = read_pfm<DepthTag>(file("depth2"));
    lp.maps.rc = read_pfm<MetricTag>(file("rc"));
    lp.maps.gc = read_pfm<MetricTag>(file("gc"));
    lp.maps.vss = read_pfm<MetricTag>(file("vss"));
    lp.maps.occ = lp.pair.occlusion;

    const int w = rec.intrinsics.width;
    const int h = rec.intrinsics.height;
    const bool sizes_ok = lp.pair.frame1.same_shape(w, h) && lp.pair.frame2.same_shape(w, h) &&
                          lp.pair.flow.valid.same_shape(w, h) && lp.raw_label.valid.same_shape(w, h) &&
                          lp.pair.occlusion.visible.same_shape(w, h) && lp.pair.depth1.valid.same_shape(w, h) &&
                          lp.pair.depth2.valid.same_shape(w, h) && lp.maps.rc.valid.same_shape(w, h) &&
                          lp.maps.gc.valid.same_shape(w, h) && lp.maps.vss.valid.same_shape(w, h);
    if (!sizes_ok) throw FormatError("pair " + rec.id + " files disagree with the intrinsics size");
    return lp;
}

AssessOutputs assess_pair(const AssessInputs& in) {
    AssessOutputs out;
    out.vss = visual_structural_similarity(in.frame1, in.frame2, in.flow, in.ssim);
    if (in.depth1 && in.depth2 && in.intrinsics) {
        out.gc = geometric_consistency(*in.depth1, *in.depth2, *in.intrinsics, in.pose1, in.pose2);
        const OcclusionMask occ = in.occlusion.value_or(OcclusionMask(in.flow.width(), in.flow.height(), 1));
        try {
            out.gc_l = gc_l_score(*out.gc, occ);
        } catch (const InvalidInput&) {
            out.gc_l.reset();
        }
    }
    return out;
}

bool ValidationReport::ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.ok; });
}

std::string ValidationReport::to_json() const {
    nlohmann::json j;
    j["ok"] = ok();
    j["gc_l"] = gc_l ? nlohmann::json(*gc_l) : nlohmann::json(nullptr);
    j["checks"] = nlohmann::json::array();
    for (const auto& c : checks)
        j["checks"].push_back({{"pair", c.pair}, {"check", c.check}, {"ok", c.ok}, {"detail", c.detail}});
    return j.dump(2) + "\n";
}

ValidationReport validate_dataset(const fs::path& manifest_path) {
    ValidationReport report;
    const DatasetManifest m = load_manifest(manifest_path);
    const fs::path dir = manifest_path.parent_path();
    double gc_sum = 0.0;
    std::size_t gc_n = 0;

    for (const auto& rec : m.pairs) {
        auto add = [&](const std::string& check, bool ok, const std::string& detail) {
            report.checks.push_back({rec.id, check, ok, detail});
        };

        bool files_ok = true;
        std::string bad;
        for (const auto& [role, file] : rec.files) {
            const fs::path p = dir / file;
            if (!fs::exists(p)) {
                files_ok = false;
                bad += file + " missing; ";
                continue;
            }
            auto it = rec.checksums.find(file);
            if (it == rec.checksums.end() || file_crc32(p) != it->second) {
                files_ok = false;
                bad += file + " checksum mismatch; ";
            }
        }
        add("integrity", files_ok, bad);

        LoadedPair lp;
        try {
            lp = load_pair(dir, rec);
            add("decode", true, "");
        } catch (const std::exception& e) {
            add("decode", false, e.what());
            continue;
        }

        // Raw label against a fresh reprojection of the stored depth.
        const FlowField geo = flow_from_depth(lp.pair.depth1, rec.intrinsics, rec.pose1, rec.pose2);
        double worst = 0.0;
        std::size_t compared = 0;
        for (int y = 0; y < geo.height(); ++y)
            for (int x = 0; x < geo.width(); ++x) {
                if (!geo.is_valid(x, y) || !lp.raw_label.is_valid(x, y)) continue;
                const Flow g = geo.value(x, y);
                const Flow r = lp.raw_label.value(x, y);
                const double err = rec.task == Task::Flow ? std::sqrt((g - r).squared_norm())
                                                          : std::abs(std::abs(g.u) - std::abs(r.u));
                worst = std::max(worst, err);
                ++compared;
            }
        std::ostringstream rd;
        rd << "max residual " << worst << " px over " << compared << " pixels";
        add("label_residual", worst <= 1e-3, rd.str());

        // Fusion only removes pixels; where the background survives, values match the raw label.
        const double tol = rec.task == Task::Flow ? 1e-6 : 1.0 / 512.0 + 1e-9;
        double drift = 0.0;
        for (std::size_t i = 0; i < lp.pair.flow.valid.size(); ++i)
            if (lp.pair.flow.valid[i] && lp.raw_label.valid[i] && lp.pair.depth1.valid[i])
                drift = std::max(drift, std::sqrt((lp.pair.flow.value[i] - lp.raw_label.value[i]).squared_norm()));
        std::ostringstream dd;
        dd << "max fused-vs-raw difference " << drift;
        add("fusion_consistency", drift <= tol, dd.str());

        std::optional<double> g;
        try {
            g = gc_l_score(lp.maps.gc, lp.maps.occ);
        } catch (const InvalidInput&) {
        }
        bool gc_ok = g.has_value() == rec.gc_l.has_value();
        if (gc_ok && g) gc_ok = std::abs(*g - *rec.gc_l) <= 1e-5 * std::max(1.0, std::abs(*rec.gc_l));
        std::ostringstream gd;
        if (g) gd << "recomputed " << *g;
        add("gc_l", gc_ok, gd.str());
        if (g) {
            gc_sum += *g;
            ++gc_n;
        }
    }
    if (gc_n > 0) report.gc_l = gc_sum / static_cast<double>(gc_n);
    return report;
}

void preview_dataset(const fs::path& manifest_path, const fs::path& out_dir) {
    const DatasetManifest m = load_manifest(manifest_path);
    const fs::path dir = manifest_path.parent_path();
    fs::create_directories(out_dir);
    for (const auto& rec : m.pairs) {
        const LoadedPair lp = load_pair(dir, rec);
        flow_colorwheel_png(lp.pair.flow, out_dir / (rec.id + "_label.png"));
        flow_colorwheel_png(lp.raw_label, out_dir / (rec.id + "_label_raw.png"));
        write_png_rgb8(metric_heatmap(lp.maps.rc), out_dir / (rec.id + "_rc.png"));
        write_png_rgb8(metric_heatmap(lp.maps.gc, 0.0, 0.05), out_dir / (rec.id + "_gc.png"));
        write_png_rgb8(metric_heatmap(lp.maps.vss), out_dir / (rec.id + "_vss.png"));
        write_mask_png(lp.pair.occlusion.visible, out_dir / (rec.id + "_occlusion.png"));
    }
}

namespace {

const PairRecord& find_pair(const DatasetManifest& m, const std::string& id) {
    for (const auto& p : m.pairs)
        if (p.id == id) return p;
    throw ConfigError("no pair '" + id + "' in manifest");
}

}  // namespace

int extract_assets(const fs::path& manifest_path, const std::string& pair_id_str, const fs::path& masks1,
                   const fs::path& masks2, const ThresholdConfig& thresholds, const fs::path& out_dir,
                   double coverage_min) {
    const DatasetManifest m = load_manifest(manifest_path);
    const PairRecord& rec = find_pair(m, pair_id_str);
    LoadedPair lp = load_pair(manifest_path.parent_path(), rec);
    const SegMaskSet set1 = read_segmentation(masks1);
    const SegMaskSet set2 = read_segmentation(masks2);

    const FlowField fwd = flow_from_depth(lp.pair.depth1, rec.intrinsics, rec.pose1, rec.pose2);
    const FlowField bwd = flow_from_depth(lp.pair.depth2, rec.intrinsics, rec.pose2, rec.pose1);
    const auto matches = match_masks(coincidence_matrices(set1, set2, fwd, bwd), coverage_min);

    LabeledPair source = lp.pair;
    source.flow = lp.raw_label;
    ExtractOptions eo;
    eo.mode = m.backend == "splats" ? DepthMode::Splat : DepthMode::Nerf;
    int written = 0;
    build_directory_atomically(out_dir, true, [&](const fs::path& root) {
        for (const auto& match : matches) {
            const auto asset = extract_foreground(source, match, set1, set2, lp.maps, thresholds, eo);
            if (!asset) continue;
            write_asset(*asset, root / ("asset_" + std::to_string(written)));
            ++written;
        }
    });
    return written;
}

DatasetManifest composite_dataset(const fs::path& manifest_path, const std::vector<fs::path>& asset_dirs,
                                  int count, std::uint64_t seed, const fs::path& out_dir, bool force) {
    if (count < 0 || count > 2) throw ConfigError("at most two foregrounds per pair");
    DatasetManifest m = load_manifest(manifest_path);
    const fs::path src = manifest_path.parent_path();
    std::vector<ForegroundAsset> pool;
    for (const auto& d : asset_dirs) pool.push_back(read_asset(d));
    if (count > 0 && pool.empty()) throw ConfigError("no assets given");

    build_directory_atomically(out_dir, force, [&](const fs::path& root) {
        for (std::size_t i = 0; i < m.pairs.size(); ++i) {
            PairRecord& rec = m.pairs[i];
            LoadedPair lp = load_pair(src, rec);
            Rng rng(mix_seed(seed, i));
            std::vector<ForegroundAsset> chosen;
            for (int k = 0; k < count; ++k) {
                ForegroundAsset a = pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(pool.size()) - 1))];
                if (a.task != rec.task) throw ConfigError("asset task does not match pair " + rec.id);
                chosen.push_back(std::move(a));
            }
            LabeledPair out = composite(lp.pair, chosen, rng.next_u64());
            QualityMaps maps = lp.maps;
            maps.occ = out.occlusion;
            rec.files.clear();
            write_pair_files(root, rec, out, lp.raw_label, maps);
            fill_checksums(root, rec);
            try {
                rec.gc_l = gc_l_score(maps.gc, maps.occ);
            } catch (const InvalidInput&) {
                rec.gc_l.reset();
            }
        }
        write_text(root / "manifest.json", dump_manifest(m));
    });
    return m;
}

}  // namespace labelforge
