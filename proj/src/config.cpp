#include "labelforge/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "labelforge/error.hpp"

namespace labelforge {

using json = nlohmann::json;

const char* to_string(Backend b) {
    switch (b) {
        case Backend::Analytic: return "analytic";
        case Backend::NerfDensity: return "nerf_density";
        case Backend::Splats: return "splats";
    }
    return "analytic";
}

Backend parse_backend(const std::string& s) {
    if (s == "analytic") return Backend::Analytic;
    if (s == "nerf_density") return Backend::NerfDensity;
    if (s == "splats") return Backend::Splats;
    throw ConfigError("unknown backend '" + s + "'");
}

const char* to_string(Task t) { return t == Task::Flow ? "flow" : "stereo"; }

Task parse_task(const std::string& s) {
    if (s == "flow") return Task::Flow;
    if (s == "stereo") return Task::Stereo;
    throw ConfigError("unknown task '" + s + "'");
}

namespace {

// Object view that records which keys were read, so leftovers can be reported.
class Reader {
public:
    Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
    }

    const json* find(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    const json& require(const std::string& key) {
        const json* v = find(key);
        if (!v) throw ConfigError("missing key '" + key + "' in " + where_);
        return *v;
    }

    double number(const std::string& key, double def) {
        const json* v = find(key);
        return v ? as_number(*v, key) : def;
    }
    double number(const std::string& key) { return as_number(require(key), key); }

    long integer(const std::string& key, long def) {
        const json* v = find(key);
        return v ? as_integer(*v, key) : def;
    }

    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t def) {
        const json* v = find(key);
        if (!v) return def;
        if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0))
            throw ConfigError("'" + key + "' in " + where_ + " must be a non-negative integer");
        return v->get<std::uint64_t>();
    }

    bool boolean(const std::string& key, bool def) {
        const json* v = find(key);
        if (!v) return def;
        if (!v->is_boolean()) throw ConfigError("'" + key + "' in " + where_ + " must be a boolean");
        return v->get<bool>();
    }

    std::string string(const std::string& key, const std::string& def) {
        const json* v = find(key);
        if (!v) return def;
        if (!v->is_string()) throw ConfigError("'" + key + "' in " + where_ + " must be a string");
        return v->get<std::string>();
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where_);
    }

    const std::string& where() const { return where_; }

private:
    double as_number(const json& v, const std::string& key) const {
        if (!v.is_number()) throw ConfigError("'" + key + "' in " + where_ + " must be a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ConfigError("'" + key + "' in " + where_ + " must be finite");
        return d;
    }
    long as_integer(const json& v, const std::string& key) const {
        if (!v.is_number_integer()) throw ConfigError("'" + key + "' in " + where_ + " must be an integer");
        return v.get<long>();
    }

    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

std::vector<double> numbers(const json& j, std::size_t n, const std::string& what) {
    if (!j.is_array() || j.size() != n)
        throw ConfigError(what + " must be an array of " + std::to_string(n) + " numbers");
    std::vector<double> out;
    for (const auto& e : j) {
        if (!e.is_number()) throw ConfigError(what + " must contain numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

Vec3 vec3(const json& j, const std::string& what) {
    const auto v = numbers(j, 3, what);
    return {v[0], v[1], v[2]};
}

Rgb rgb(const json& j, const std::string& what) {
    const auto v = numbers(j, 3, what);
    return {v[0], v[1], v[2]};
}

json to_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
json to_json(const Rgb& c) { return {c.r, c.g, c.b}; }

json pose_json(const RigidPose& p) {
    json rot = json::array();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) rot.push_back(p.rotation(r, c));
    return {{"rotation", rot}, {"translation", to_json(p.translation)}};
}

RigidPose parse_pose(const json& j, const std::string& where) {
    Reader r(j, where);
    const auto rot = numbers(r.require("rotation"), 9, where + ".rotation");
    RigidPose p;
    for (int i = 0; i < 9; ++i) p.rotation(i / 3, i % 3) = rot[i];
    p.translation = vec3(r.require("translation"), where + ".translation");
    r.finish();
    try {
        p.validate();
    } catch (const InvalidInput& e) {
        throw ConfigError(where + ": " + e.what());
    }
    return p;
}

json intrinsics_json(const CameraIntrinsics& K) {
    return {{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx}, {"cy", K.cy}, {"width", K.width}, {"height", K.height}};
}

CameraIntrinsics parse_intrinsics(const json& j, const std::string& where) {
    Reader r(j, where);
    CameraIntrinsics K;
    K.fx = r.number("fx");
    K.fy = r.number("fy");
    K.cx = r.number("cx");
    K.cy = r.number("cy");
    K.width = static_cast<int>(r.integer("width", 0));
    K.height = static_cast<int>(r.integer("height", 0));
    r.finish();
    try {
        K.validate();
    } catch (const InvalidInput& e) {
        throw ConfigError(where + ": " + e.what());
    }
    return K;
}

Texture parse_texture(const json& j, const std::string& where) {
    Reader r(j, where);
    Texture t;
    const std::string kind = r.string("kind", "constant");
    if (kind == "constant") t.kind = Texture::Kind::Constant;
    else if (kind == "checkerboard") t.kind = Texture::Kind::Checkerboard;
    else if (kind == "gradient") t.kind = Texture::Kind::Gradient;
    else throw ConfigError("unknown texture kind '" + kind + "' in " + where);
    if (const json* v = r.find("color_a")) t.color_a = rgb(*v, where + ".color_a");
    if (const json* v = r.find("color_b")) t.color_b = rgb(*v, where + ".color_b");
    t.scale = r.number("scale", t.scale);
    if (const json* v = r.find("axis")) t.axis = vec3(*v, where + ".axis");
    r.finish();
    if (!(t.scale > 0.0)) throw ConfigError("texture scale must be positive in " + where);
    return t;
}

json texture_json(const Texture& t) {
    const char* kind = t.kind == Texture::Kind::Constant       ? "constant"
                       : t.kind == Texture::Kind::Checkerboard ? "checkerboard"
                                                               : "gradient";
    return {{"kind", kind},
            {"color_a", to_json(t.color_a)},
            {"color_b", to_json(t.color_b)},
            {"scale", t.scale},
            {"axis", to_json(t.axis)}};
}

DensityPrimitive parse_primitive(const json& j, const std::string& where) {
    Reader r(j, where);
    DensityPrimitive d;
    const std::string type = r.string("type", "");
    if (type == "sphere") {
        Sphere s;
        s.center = vec3(r.require("center"), where + ".center");
        s.radius = r.number("radius");
        d.primitive.shape = s;
    } else if (type == "plane") {
        Plane p;
        p.normal = vec3(r.require("normal"), where + ".normal");
        p.offset = r.number("offset");
        d.primitive.shape = p;
    } else if (type == "box") {
        Box b;
        b.min = vec3(r.require("min"), where + ".min");
        b.max = vec3(r.require("max"), where + ".max");
        d.primitive.shape = b;
    } else {
        throw ConfigError("unknown primitive type '" + type + "' in " + where);
    }
    if (const json* v = r.find("texture")) d.primitive.texture = parse_texture(*v, where + ".texture");
    if (const json* v = r.find("density")) {
        Reader dr(*v, where + ".density");
        const std::string mode = dr.string("mode", "shell");
        if (mode == "shell") d.mode = DensityPrimitive::Mode::Shell;
        else if (mode == "volume") d.mode = DensityPrimitive::Mode::Volume;
        else throw ConfigError("unknown density mode '" + mode + "' in " + where);
        d.sigma = dr.number("sigma", d.sigma);
        d.shell_thickness = dr.number("shell_thickness", d.shell_thickness);
        dr.finish();
        if (!(d.sigma >= 0.0) || !(d.shell_thickness > 0.0))
            throw ConfigError("density needs sigma >= 0 and shell_thickness > 0 in " + where);
    }
    r.finish();
    try {
        d.primitive.validate();
    } catch (const InvalidInput& e) {
        throw ConfigError(where + ": " + e.what());
    }
    return d;
}

json primitive_json(const DensityPrimitive& d) {
    json j;
    std::visit(
        [&](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, Sphere>) {
                j = {{"type", "sphere"}, {"center", to_json(s.center)}, {"radius", s.radius}};
            } else if constexpr (std::is_same_v<S, Plane>) {
                j = {{"type", "plane"}, {"normal", to_json(s.normal)}, {"offset", s.offset}};
            } else {
                j = {{"type", "box"}, {"min", to_json(s.min)}, {"max", to_json(s.max)}};
            }
        },
        d.primitive.shape);
    j["texture"] = texture_json(d.primitive.texture);
    j["density"] = {{"mode", d.mode == DensityPrimitive::Mode::Shell ? "shell" : "volume"},
                    {"sigma", d.sigma},
                    {"shell_thickness", d.shell_thickness}};
    return j;
}

SplatPrimitive parse_splat(const json& j, const std::string& where) {
    Reader r(j, where);
    SplatPrimitive s;
    s.mean = vec3(r.require("mean"), where + ".mean");
    s.scale = vec3(r.require("scale"), where + ".scale");
    if (const json* v = r.find("rotation")) {
        const auto q = numbers(*v, 4, where + ".rotation");
        s.orientation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
    }
    s.opacity = r.number("opacity", s.opacity);
    if (const json* v = r.find("color")) s.color = rgb(*v, where + ".color");
    r.finish();
    try {
        s.validate();
    } catch (const InvalidInput& e) {
        throw ConfigError(where + ": " + e.what());
    }
    return s;
}

json splat_json(const SplatPrimitive& s) {
    const auto& q = s.orientation;
    return {{"mean", to_json(s.mean)},
            {"scale", to_json(s.scale)},
            {"rotation", {q.w(), q.x(), q.y(), q.z()}},
            {"opacity", s.opacity},
            {"color", to_json(s.color)}};
}

json parse_text(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(what + " is not valid JSON: " + e.what());
    }
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SceneSpec scene_from_json(const json& j) {
    Reader r(j, "scene");
    SceneSpec s;
    s.id = r.string("id", s.id);
    s.backend = parse_backend(r.string("backend", "analytic"));
    if (const json* cam = r.find("camera")) {
        Reader cr(*cam, "scene.camera");
        if (const json* k = cr.find("intrinsics")) s.camera = parse_intrinsics(*k, "scene.camera.intrinsics");
        const json* pose = cr.find("pose");
        const json* look = cr.find("look_at");
        if (pose && look) throw ConfigError("scene.camera takes either pose or look_at");
        if (pose) s.pose = parse_pose(*pose, "scene.camera.pose");
        if (look) {
            Reader lr(*look, "scene.camera.look_at");
            const Vec3 eye = vec3(lr.require("eye"), "look_at.eye");
            const Vec3 target = vec3(lr.require("target"), "look_at.target");
            const Vec3 up = lr.find("up") ? vec3(lr.require("up"), "look_at.up") : Vec3(0, -1, 0);
            lr.finish();
            try {
                s.pose = look_at(eye, target, up);
            } catch (const InvalidInput& e) {
                throw ConfigError(std::string("scene.camera.look_at: ") + e.what());
            }
        }
        cr.finish();
    }
    if (const json* prims = r.find("primitives")) {
        if (!prims->is_array()) throw ConfigError("scene.primitives must be an array");
        for (std::size_t i = 0; i < prims->size(); ++i)
            s.primitives.push_back(parse_primitive((*prims)[i], "scene.primitives[" + std::to_string(i) + "]"));
    }
    if (const json* splats = r.find("splats")) {
        if (!splats->is_array()) throw ConfigError("scene.splats must be an array");
        for (std::size_t i = 0; i < splats->size(); ++i)
            s.splats.push_back(parse_splat((*splats)[i], "scene.splats[" + std::to_string(i) + "]"));
    }
    if (const json* sp = r.find("splatify")) {
        Reader sr(*sp, "scene.splatify");
        SplatifyOptions o;
        o.spacing = sr.number("spacing", o.spacing);
        o.scale_factor = sr.number("scale_factor", o.scale_factor);
        o.thickness_ratio = sr.number("thickness_ratio", o.thickness_ratio);
        o.opacity = sr.number("opacity", o.opacity);
        if (const json* c = sr.find("clip_min")) o.clip.min = vec3(*c, "splatify.clip_min");
        if (const json* c = sr.find("clip_max")) o.clip.max = vec3(*c, "splatify.clip_max");
        sr.finish();
        if (!(o.spacing > 0.0) || !(o.scale_factor > 0.0) || !(o.thickness_ratio > 0.0) ||
            !(o.opacity > 0.0 && o.opacity <= 1.0))
            throw ConfigError("scene.splatify values out of range");
        s.splatify = o;
    }
    if (const json* fl = r.find("floaters")) {
        Reader fr(*fl, "scene.floaters");
        const long count = fr.integer("count", 0);
        if (count < 0) throw ConfigError("scene.floaters.count must be non-negative");
        s.floaters.count = static_cast<std::size_t>(count);
        s.floaters.fraction = fr.number("fraction", 0.0);
        s.floaters.seed = fr.unsigned_integer("seed", 0);
        s.floaters.near = fr.number("near", s.floaters.near);
        s.floaters.far = fr.number("far", s.floaters.far);
        fr.finish();
        if (!(s.floaters.fraction >= 0.0) || !(s.floaters.near > 0.0) || !(s.floaters.far > s.floaters.near))
            throw ConfigError("scene.floaters values out of range");
    }
    r.finish();
    return s;
}

}  // namespace

AnalyticScene SceneSpec::analytic() const {
    AnalyticScene a;
    for (const auto& p : primitives)
        if (p.mode == DensityPrimitive::Mode::Shell) a.primitives.push_back(p.primitive);
    return a;
}

BuiltScene build_scene(const SceneSpec& spec) {
    BuiltScene b;
    b.analytic = spec.analytic();
    b.density.primitives = spec.primitives;
    b.splats.splats = spec.splats;
    if (spec.splatify) {
        const SplatScene cover = splatify(b.analytic, *spec.splatify);
        b.splats.splats.insert(b.splats.splats.end(), cover.splats.begin(), cover.splats.end());
    }
    std::size_t n = spec.floaters.count;
    if (n == 0 && spec.floaters.fraction > 0.0)
        n = static_cast<std::size_t>(std::llround(spec.floaters.fraction * b.splats.splats.size()));
    if (n > 0) {
        const auto floaters = random_floaters(n, spec.camera, spec.pose, spec.floaters.near,
                                              spec.floaters.far, spec.floaters.seed);
        add_floaters(b.splats, floaters);
        add_floaters(b.density, floaters);
    }
    return b;
}

SceneSpec parse_scene(const std::string& json_text) { return scene_from_json(parse_text(json_text, "scene")); }

SceneSpec load_scene(const std::filesystem::path& path) {
    try {
        return parse_scene(read_text(path));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string dump_scene(const SceneSpec& s) {
    json j;
    j["id"] = s.id;
    j["backend"] = to_string(s.backend);
    j["camera"] = {{"intrinsics", intrinsics_json(s.camera)}, {"pose", pose_json(s.pose)}};
    j["primitives"] = json::array();
    for (const auto& p : s.primitives) j["primitives"].push_back(primitive_json(p));
    if (!s.splats.empty()) {
        j["splats"] = json::array();
        for (const auto& sp : s.splats) j["splats"].push_back(splat_json(sp));
    }
    if (s.splatify) {
        const auto& o = *s.splatify;
        j["splatify"] = {{"spacing", o.spacing},
                         {"scale_factor", o.scale_factor},
                         {"thickness_ratio", o.thickness_ratio},
                         {"opacity", o.opacity},
                         {"clip_min", to_json(o.clip.min)},
                         {"clip_max", to_json(o.clip.max)}};
    }
    if (s.floaters.count > 0 || s.floaters.fraction > 0.0)
        j["floaters"] = {{"count", s.floaters.count},
                         {"fraction", s.floaters.fraction},
                         {"seed", s.floaters.seed},
                         {"near", s.floaters.near},
                         {"far", s.floaters.far}};
    return j.dump(2) + "\n";
}

void RunConfig::validate() const {
    if (pairs < 0) throw ConfigError("pairs must be non-negative");
    if (jobs < 1) throw ConfigError("jobs must be at least 1");
    if (!(rotation_amplitude >= 0.0) || !(translation_amplitude >= 0.0) ||
        !(viewpoint_rotation >= 0.0) || !(viewpoint_translation >= 0.0))
        throw ConfigError("pose amplitudes must be non-negative");
    if (!(baseline > 0.0)) throw ConfigError("baseline must be positive");
    if (foreground_count < 0 || foreground_count > 2) throw ConfigError("foreground count must be 0, 1 or 2");
    if (foreground_size < 8) throw ConfigError("foreground size must be at least 8");
    try {
        sampling.validate();
        thresholds.validate();
    } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
    }
    if (ssim.window < 1 || ssim.window % 2 == 0 || !(ssim.sigma > 0.0))
        throw ConfigError("ssim window must be odd and sigma positive");
}

RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir) {
    const json j = parse_text(json_text, "run config");
    Reader r(j, "config");
    RunConfig c;
    if (const json* scene = r.find("scene")) {
        if (scene->is_string()) {
            c.scene_path = (base_dir / scene->get<std::string>()).lexically_normal().string();
            c.scene = load_scene(c.scene_path);
        } else {
            c.scene = scene_from_json(*scene);
        }
    }
    if (const json* b = r.find("backend")) {
        if (!b->is_string()) throw ConfigError("'backend' must be a string");
        c.backend = parse_backend(b->get<std::string>());
    }
    c.task = parse_task(r.string("task", "flow"));
    c.pairs = static_cast<int>(r.integer("pairs", c.pairs));
    c.seed = r.unsigned_integer("seed", c.seed);
    c.jobs = static_cast<int>(r.integer("jobs", c.jobs));
    if (const json* p = r.find("perturbation")) {
        Reader pr(*p, "config.perturbation");
        c.rotation_amplitude = pr.number("rotation", c.rotation_amplitude);
        c.translation_amplitude = pr.number("translation", c.translation_amplitude);
        pr.finish();
    }
    if (const json* p = r.find("viewpoints")) {
        Reader pr(*p, "config.viewpoints");
        c.viewpoint_rotation = pr.number("rotation", c.viewpoint_rotation);
        c.viewpoint_translation = pr.number("translation", c.viewpoint_translation);
        pr.finish();
    }
    c.baseline = r.number("baseline", c.baseline);
    if (const json* s = r.find("sampling")) {
        Reader sr(*s, "config.sampling");
        c.sampling.near = sr.number("near", c.sampling.near);
        c.sampling.far = sr.number("far", c.sampling.far);
        c.sampling.steps = static_cast<int>(sr.integer("steps", c.sampling.steps));
        sr.finish();
    }
    const std::string depth = r.string("depth", "median");
    if (depth == "median") c.depth = DepthEstimator::Median;
    else if (depth == "mean") c.depth = DepthEstimator::Mean;
    else throw ConfigError("depth must be 'median' or 'mean'");
    const std::string occ = r.string("occlusion", "auto");
    if (occ == "auto") c.occlusion = OcclusionSource::Auto;
    else if (occ == "ray_integral") c.occlusion = OcclusionSource::RayIntegral;
    else if (occ == "fb_check") c.occlusion = OcclusionSource::ForwardBackward;
    else throw ConfigError("occlusion must be 'auto', 'ray_integral' or 'fb_check'");
    if (const json* t = r.find("thresholds")) {
        Reader tr(*t, "config.thresholds");
        auto& th = c.thresholds;
        th.rc_nerf = tr.number("rc_nerf", th.rc_nerf);
        th.rc_splat = tr.number("rc_3dgs", th.rc_splat);
        th.vss = tr.number("vss", th.vss);
        th.gc = tr.number("gc", th.gc);
        th.occ_th = tr.number("occ_th", th.occ_th);
        th.rc_low = tr.number("rc_low", th.rc_low);
        th.rc_high = tr.number("rc_high", th.rc_high);
        tr.finish();
    }
    if (const json* s = r.find("selection")) {
        Reader sr(*s, "config.selection");
        c.selection.rc = sr.boolean("rc", c.selection.rc);
        c.selection.occ = sr.boolean("occ", c.selection.occ);
        c.selection.vss = sr.boolean("vss", c.selection.vss);
        c.selection.gc = sr.boolean("gc", c.selection.gc);
        sr.finish();
    }
    if (const json* s = r.find("ssim")) {
        Reader sr(*s, "config.ssim");
        c.ssim.window = static_cast<int>(sr.integer("window", c.ssim.window));
        c.ssim.sigma = sr.number("sigma", c.ssim.sigma);
        c.ssim.k1 = sr.number("k1", c.ssim.k1);
        c.ssim.k2 = sr.number("k2", c.ssim.k2);
        sr.finish();
    }
    if (const json* f = r.find("foreground")) {
        Reader fr(*f, "config.foreground");
        c.foreground_count = static_cast<int>(fr.integer("count", c.foreground_count));
        c.foreground_size = static_cast<int>(fr.integer("size", c.foreground_size));
        fr.finish();
    }
    c.dump_rayfields = r.boolean("dump_rayfields", c.dump_rayfields);
    r.finish();
    c.validate();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    const std::string text = read_text(path);
    try {
        return parse_run_config(text, path.parent_path());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

namespace {

std::string hex32(std::uint32_t v) {
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", v);
    return buf;
}

}  // namespace

std::string dump_manifest(const DatasetManifest& m) {
    json j;
    j["version"] = m.version;
    j["task"] = to_string(m.task);
    j["backend"] = m.backend;
    j["depth"] = m.depth;
    j["seed"] = m.seed;
    j["pairs"] = json::array();
    for (const auto& p : m.pairs) {
        json pj;
        pj["id"] = p.id;
        pj["task"] = to_string(p.task);
        pj["files"] = p.files;
        json sums = json::object();
        for (const auto& [file, crc] : p.checksums) sums[file] = hex32(crc);
        pj["checksums"] = sums;
        pj["intrinsics"] = intrinsics_json(p.intrinsics);
        pj["pose1"] = pose_json(p.pose1);
        pj["pose2"] = pose_json(p.pose2);
        pj["baseline"] = p.baseline;
        pj["provenance"] = {{"scene", p.scene_id}, {"seed", p.seed}};
        pj["gc_l"] = p.gc_l ? json(*p.gc_l) : json(nullptr);
        j["pairs"].push_back(pj);
    }
    return j.dump(2) + "\n";
}

DatasetManifest parse_manifest(const std::string& json_text) {
    const json j = parse_text(json_text, "manifest");
    Reader r(j, "manifest");
    DatasetManifest m;
    m.version = static_cast<int>(r.integer("version", 1));
    m.task = parse_task(r.string("task", "flow"));
    m.backend = r.string("backend", "");
    m.depth = r.string("depth", "");
    m.seed = r.unsigned_integer("seed", 0);
    const json& pairs = r.require("pairs");
    if (!pairs.is_array()) throw ConfigError("manifest.pairs must be an array");
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const std::string where = "manifest.pairs[" + std::to_string(i) + "]";
        Reader pr(pairs[i], where);
        PairRecord p;
        p.id = pr.string("id", "");
        p.task = parse_task(pr.string("task", "flow"));
        const json& files = pr.require("files");
        if (!files.is_object()) throw ConfigError(where + ".files must be an object");
        for (auto it = files.begin(); it != files.end(); ++it) {
            if (!it->is_string()) throw ConfigError(where + ".files entries must be strings");
            p.files[it.key()] = it->get<std::string>();
        }
        if (const json* sums = pr.find("checksums")) {
            if (!sums->is_object()) throw ConfigError(where + ".checksums must be an object");
            for (auto it = sums->begin(); it != sums->end(); ++it) {
                if (!it->is_string()) throw ConfigError(where + ".checksums entries must be strings");
                try {
                    p.checksums[it.key()] = static_cast<std::uint32_t>(std::stoul(it->get<std::string>(), nullptr, 16));
                } catch (const std::logic_error&) {
                    throw ConfigError(where + ".checksums entry is not hex");
                }
            }
        }
        p.intrinsics = parse_intrinsics(pr.require("intrinsics"), where + ".intrinsics");
        p.pose1 = parse_pose(pr.require("pose1"), where + ".pose1");
        p.pose2 = parse_pose(pr.require("pose2"), where + ".pose2");
        p.baseline = pr.number("baseline", 0.0);
        if (const json* prov = pr.find("provenance")) {
            Reader vr(*prov, where + ".provenance");
            p.scene_id = vr.string("scene", "");
            p.seed = vr.unsigned_integer("seed", 0);
            vr.finish();
        }
        if (const json* g = pr.find("gc_l"); g && !g->is_null()) {
            if (!g->is_number()) throw ConfigError(where + ".gc_l must be a number or null");
            p.gc_l = g->get<double>();
        }
        pr.finish();
        m.pairs.push_back(std::move(p));
    }
    r.finish();
    return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    try {
        return parse_manifest(read_text(path));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string dump_pose(const RigidPose& pose) { return pose_json(pose).dump(); }

}  // namespace labelforge

namespace labelforge {

CameraFile parse_camera_file(const std::string& json_text) {
    const json j = parse_text(json_text, "camera");
    Reader r(j, "camera");
    CameraFile c;
    c.intrinsics = parse_intrinsics(r.require("intrinsics"), "camera.intrinsics");
    c.pose1 = parse_pose(r.require("pose1"), "camera.pose1");
    c.pose2 = parse_pose(r.require("pose2"), "camera.pose2");
    r.finish();
    return c;
}

CameraFile load_camera_file(const std::filesystem::path& path) { return parse_camera_file(read_text(path)); }

}  // namespace labelforge
