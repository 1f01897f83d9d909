#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "labelforge/blur.hpp"
#include "labelforge/config.hpp"
#include "labelforge/error.hpp"
#include "labelforge/io.hpp"
#include "labelforge/pipeline.hpp"

namespace fs = std::filesystem;
using namespace labelforge;

namespace {

constexpr int kOk = 0;
constexpr int kValidationFailure = 1;
constexpr int kUsageError = 2;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required) {
    cmd->add_option("--config", c.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "Override the configured seed");
    cmd->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
    auto* out = cmd->add_option("--out", c.out, "Output path");
    if (out_required) out->required();
}

// Thresholds, selection and SSIM settings from an optional run config.
RunConfig settings(const Common& c) {
    if (c.config.empty()) return RunConfig{};
    return load_run_config(c.config);
}

void write_text(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_bytes(p, std::vector<std::uint8_t>(text.begin(), text.end()));
}

FlowField load_label(const fs::path& p) {
    const std::string ext = p.extension().string();
    if (ext == ".flo") return read_flo(p);
    if (ext == ".png") return flow_from_disparity(read_disparity_png16(p));
    if (ext == ".pfm") return flow_from_disparity(read_pfm<DisparityTag>(p));
    throw InvalidInput("label must be .flo, .png (16-bit disparity) or .pfm: " + p.string());
}

MaskSelection parse_selection(const std::string& list) {
    MaskSelection s{false, false, false, false};
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "rc") s.rc = true;
        else if (item == "occ") s.occ = true;
        else if (item == "vss") s.vss = true;
        else if (item == "gc") s.gc = true;
        else if (!item.empty()) throw ConfigError("unknown mask '" + item + "' (use rc,occ,vss,gc)");
    }
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthetic optical-flow and stereo dataset generation with label self-assessment"};
    app.require_subcommand(1);
    bool force = false;

    Common gen;
    auto* generate = app.add_subcommand("generate", "Render pairs, compute labels and masks, write a dataset");
    add_common(generate, gen, true);
    generate->add_flag("--force", force, "Replace an existing output directory");

    Common as;
    std::string a_frame1, a_frame2, a_flow, a_depth1, a_depth2, a_camera, a_occ, a_manifest, a_pair;
    auto* assess = app.add_subcommand("assess", "Score an existing pair (VSS, GC, gc_l)");
    add_common(assess, as, true);
    assess->add_option("--manifest", a_manifest, "Dataset manifest")->check(CLI::ExistingFile);
    assess->add_option("--pair", a_pair, "Pair id inside the manifest");
    assess->add_option("--frame1", a_frame1)->check(CLI::ExistingFile);
    assess->add_option("--frame2", a_frame2)->check(CLI::ExistingFile);
    assess->add_option("--flow", a_flow, "Label (.flo, disparity .png or .pfm)")->check(CLI::ExistingFile);
    assess->add_option("--depth1", a_depth1)->check(CLI::ExistingFile);
    assess->add_option("--depth2", a_depth2)->check(CLI::ExistingFile);
    assess->add_option("--camera", a_camera, "JSON with intrinsics, pose1, pose2")->check(CLI::ExistingFile);
    assess->add_option("--occlusion", a_occ, "Visibility mask PNG")->check(CLI::ExistingFile);

    Common fu;
    std::string f_label, f_rc, f_gc, f_vss, f_occ, f_select, f_mode = "nerf";
    auto* fuse = app.add_subcommand("fuse", "Apply binarized masks to a label");
    add_common(fuse, fu, true);
    fuse->add_option("--label", f_label)->required()->check(CLI::ExistingFile);
    fuse->add_option("--rc", f_rc)->check(CLI::ExistingFile);
    fuse->add_option("--gc", f_gc)->check(CLI::ExistingFile);
    fuse->add_option("--vss", f_vss)->check(CLI::ExistingFile);
    fuse->add_option("--occlusion", f_occ)->check(CLI::ExistingFile);
    fuse->add_option("--select", f_select, "Comma list of rc,occ,vss,gc (default from config)");
    fuse->add_option("--mode", f_mode, "RC threshold family")->check(CLI::IsMember({"nerf", "splat"}));

    auto* foreground = app.add_subcommand("foreground", "Flight-foreground extraction and compositing");
    foreground->require_subcommand(1);
    Common fe;
    std::string e_manifest, e_pair, e_masks1, e_masks2;
    double e_coverage = 0.95;
    auto* extract = foreground->add_subcommand("extract", "Match masks across a pair and write asset bundles");
    add_common(extract, fe, true);
    extract->add_option("--manifest", e_manifest)->required()->check(CLI::ExistingFile);
    extract->add_option("--pair", e_pair)->required();
    extract->add_option("--masks1", e_masks1, "Indexed PNG or directory of mask PNGs")->required()->check(CLI::ExistingPath);
    extract->add_option("--masks2", e_masks2)->required()->check(CLI::ExistingPath);
    extract->add_option("--coverage", e_coverage, "Minimum coverage in both directions");
    Common fc;
    std::string c_manifest;
    std::vector<std::string> c_assets;
    int c_count = 1;
    auto* comp = foreground->add_subcommand("composite", "Paste assets onto every pair of a dataset");
    add_common(comp, fc, true);
    comp->add_option("--manifest", c_manifest)->required()->check(CLI::ExistingFile);
    comp->add_option("--assets", c_assets, "Asset bundle directories")->required()->check(CLI::ExistingDirectory);
    comp->add_option("--count", c_count, "Foregrounds per pair (at most 2)")->check(CLI::Range(0, 2));
    comp->add_flag("--force", force, "Replace an existing output directory");

    Common fb;
    std::string b_dir, b_report;
    double b_threshold = 0.0;
    auto* blur = app.add_subcommand("filter-blur", "Score images with the edge-selective FFT blur measure");
    add_common(blur, fb, false);
    blur->add_option("--dir", b_dir)->required()->check(CLI::ExistingDirectory);
    blur->add_option("--threshold", b_threshold)->required();
    blur->add_option("--report", b_report, "Report JSON (stdout when omitted)");

    Common va;
    std::string v_manifest, v_report;
    auto* validate = app.add_subcommand("validate", "Check a dataset's integrity, labels and gc_l");
    add_common(validate, va, false);
    validate->add_option("--manifest", v_manifest)->required()->check(CLI::ExistingFile);
    validate->add_option("--report", v_report, "Report JSON (stdout when omitted)");

    Common pv;
    std::string p_manifest, p_flow;
    auto* preview = app.add_subcommand("preview", "Color-wheel and heatmap renderings");
    add_common(preview, pv, true);
    preview->add_option("--manifest", p_manifest)->check(CLI::ExistingFile);
    preview->add_option("--flow", p_flow, "Single label file to render")->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsageError;
    }

    try {
        if (*generate) {
            if (gen.config.empty()) throw ConfigError("generate needs --config");
            RunConfig cfg = load_run_config(gen.config);
            GenerateOptions opts;
            opts.seed = gen.seed;
            opts.jobs = gen.jobs;
            opts.force = force;
            opts.log = &std::cerr;
            const DatasetManifest m = generate_dataset(cfg, gen.out, opts);
            std::cerr << "wrote " << m.pairs.size() << " pairs to " << gen.out << "\n";
            return kOk;
        }

        if (*assess) {
            const RunConfig cfg = settings(as);
            AssessInputs in;
            in.ssim = cfg.ssim;
            if (!a_manifest.empty()) {
                if (a_pair.empty()) throw ConfigError("--manifest needs --pair");
                const DatasetManifest m = load_manifest(a_manifest);
                const PairRecord* rec = nullptr;
                for (const auto& p : m.pairs)
                    if (p.id == a_pair) rec = &p;
                if (!rec) throw ConfigError("no pair '" + a_pair + "' in manifest");
                const LoadedPair lp = load_pair(fs::path(a_manifest).parent_path(), *rec);
                in.frame1 = lp.pair.frame1;
                in.frame2 = lp.pair.frame2;
                in.flow = lp.raw_label;
                in.depth1 = lp.pair.depth1;
                in.depth2 = lp.pair.depth2;
                in.intrinsics = rec->intrinsics;
                in.pose1 = rec->pose1;
                in.pose2 = rec->pose2;
                in.occlusion = lp.pair.occlusion;
            } else {
                if (a_frame1.empty() || a_frame2.empty() || a_flow.empty())
                    throw ConfigError("assess needs --frame1, --frame2 and --flow (or --manifest/--pair)");
                in.frame1 = read_png_rgb(a_frame1);
                in.frame2 = read_png_rgb(a_frame2);
                in.flow = load_label(a_flow);
                if (!a_depth1.empty()) in.depth1 = read_pfm<DepthTag>(a_depth1);
                if (!a_depth2.empty()) in.depth2 = read_pfm<DepthTag>(a_depth2);
                if (!a_occ.empty()) in.occlusion = OcclusionMask{read_mask_png(a_occ)};
                if (!a_camera.empty()) {
                    const CameraFile cam = load_camera_file(a_camera);
                    in.intrinsics = cam.intrinsics;
                    in.pose1 = cam.pose1;
                    in.pose2 = cam.pose2;
                }
            }
            const AssessOutputs out = assess_pair(in);
            const fs::path dir = as.out;
            fs::create_directories(dir);
            write_pfm(out.vss, dir / "vss.pfm");
            write_png_rgb8(metric_heatmap(out.vss), dir / "vss.png");
            if (out.gc) {
                write_pfm(*out.gc, dir / "gc.pfm");
                write_png_rgb8(metric_heatmap(*out.gc, 0.0, 0.05), dir / "gc.png");
            }
            double vss_sum = 0.0;
            std::size_t n = 0;
            for (std::size_t i = 0; i < out.vss.value.size(); ++i)
                if (out.vss.valid[i]) {
                    vss_sum += out.vss.value[i];
                    ++n;
                }
            nlohmann::json report;
            report["vss_mean"] = n ? nlohmann::json(vss_sum / n) : nlohmann::json(nullptr);
            report["gc_l"] = out.gc_l ? nlohmann::json(*out.gc_l) : nlohmann::json(nullptr);
            std::cout << report.dump() << "\n";
            return kOk;
        }

        if (*fuse) {
            const RunConfig cfg = settings(fu);
            const FlowField label = load_label(f_label);
            const MaskSelection sel = f_select.empty() ? cfg.selection : parse_selection(f_select);
            const int w = label.width();
            const int h = label.height();
            QualityMaps maps;
            auto metric = [&](const std::string& path, bool needed, const char* name) {
                if (path.empty()) {
                    if (needed) throw ConfigError(std::string("selection needs --") + name);
                    return MetricMap(w, h);
                }
                return read_pfm<MetricTag>(path);
            };
            maps.rc = metric(f_rc, sel.rc || sel.occ, "rc");
            maps.gc = metric(f_gc, sel.gc, "gc");
            maps.vss = metric(f_vss, sel.vss, "vss");
            maps.occ = f_occ.empty() ? OcclusionMask(w, h, 1) : OcclusionMask{read_mask_png(f_occ)};
            const DepthMode mode = f_mode == "splat" ? DepthMode::Splat : DepthMode::Nerf;
            const FlowField fused = fuse_labels(label, maps, cfg.thresholds, sel, mode);
            const fs::path out = fu.out;
            if (out.extension() == ".flo") write_flo(fused, out);
            else if (out.extension() == ".png") write_disparity_png16(disparity_from_flow(fused, 1e300), out);
            else if (out.extension() == ".pfm") write_pfm(disparity_from_flow(fused, 1e300), out);
            else throw ConfigError("--out must end in .flo, .png or .pfm");
            std::cout << nlohmann::json{{"valid", fused.valid_count()}, {"total", fused.value.size()}}.dump() << "\n";
            return kOk;
        }

        if (*extract) {
            const RunConfig cfg = settings(fe);
            const int n = extract_assets(e_manifest, e_pair, e_masks1, e_masks2, cfg.thresholds, fe.out, e_coverage);
            std::cout << nlohmann::json{{"assets", n}}.dump() << "\n";
            return kOk;
        }

        if (*comp) {
            std::vector<fs::path> dirs(c_assets.begin(), c_assets.end());
            const DatasetManifest m = composite_dataset(c_manifest, dirs, c_count, fc.seed.value_or(0), fc.out, force);
            std::cerr << "composited " << m.pairs.size() << " pairs into " << fc.out << "\n";
            return kOk;
        }

        if (*blur) {
            const FilterResult r = filter_directory(b_dir, BlurConfig{}, b_threshold);
            nlohmann::json j;
            j["threshold"] = b_threshold;
            j["images"] = nlohmann::json::array();
            for (const auto& e : r.entries)
                j["images"].push_back({{"file", e.file},
                                       {"score", e.report.score},
                                       {"edge_fraction", e.report.edge_fraction},
                                       {"decision", to_string(e.report.decision)}});
            j["kept"] = r.kept;
            j["dropped"] = r.dropped;
            j["errors"] = nlohmann::json::array();
            for (const auto& [file, msg] : r.errors) j["errors"].push_back({{"file", file}, {"error", msg}});
            const std::string text = j.dump(2) + "\n";
            if (b_report.empty()) std::cout << text;
            else write_text(b_report, text);
            return kOk;
        }

        if (*validate) {
            const ValidationReport r = validate_dataset(v_manifest);
            if (v_report.empty()) std::cout << r.to_json();
            else write_text(v_report, r.to_json());
            for (const auto& c : r.checks)
                if (!c.ok) std::cerr << "FAIL " << c.pair << " " << c.check << ": " << c.detail << "\n";
            return r.ok() ? kOk : kValidationFailure;
        }

        if (*preview) {
            if (!p_manifest.empty()) {
                preview_dataset(p_manifest, pv.out);
            } else if (!p_flow.empty()) {
                flow_colorwheel_png(load_label(p_flow), pv.out);
            } else {
                throw ConfigError("preview needs --manifest or --flow");
            }
            return kOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidationFailure;
    }
    return kUsageError;
}
