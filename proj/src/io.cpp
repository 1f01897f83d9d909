#include "labelforge/io.hpp"

#include <png.h>
#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "labelforge/error.hpp"

namespace labelforge {

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed: " + path.string());
}

std::uint32_t file_crc32(const fs::path& path) {
    const auto bytes = read_bytes(path);
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
    return static_cast<std::uint32_t>(crc);
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

std::uint32_t get_u32(const std::uint8_t* p, bool little) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        const int shift = little ? 8 * i : 8 * (3 - i);
        v |= static_cast<std::uint32_t>(p[i]) << shift;
    }
    return v;
}
float get_f32(const std::uint8_t* p, bool little = true) { return std::bit_cast<float>(get_u32(p, little)); }

}  // namespace

void write_flo(const FlowField& flow, const fs::path& path) {
    std::vector<std::uint8_t> out;
    out.reserve(12 + flow.value.size() * 8);
    put_f32(out, 202021.25f);
    put_u32(out, static_cast<std::uint32_t>(flow.width()));
    put_u32(out, static_cast<std::uint32_t>(flow.height()));
    for (std::size_t i = 0; i < flow.value.size(); ++i) {
        if (flow.valid[i]) {
            put_f32(out, static_cast<float>(flow.value[i].u));
            put_f32(out, static_cast<float>(flow.value[i].v));
        } else {
            put_f32(out, kFloInvalidValue);
            put_f32(out, kFloInvalidValue);
        }
    }
    write_bytes(path, out);
}

FlowField read_flo(const fs::path& path) {
    const auto bytes = read_bytes(path);
    if (bytes.size() < 12) throw FormatError("truncated .flo header: " + path.string());
    if (get_f32(bytes.data()) != 202021.25f) throw FormatError("bad .flo magic: " + path.string());
    const auto w = static_cast<std::int32_t>(get_u32(bytes.data() + 4, true));
    const auto h = static_cast<std::int32_t>(get_u32(bytes.data() + 8, true));
    if (w < 0 || h < 0 || w > (1 << 16) || h > (1 << 16))
        throw FormatError("bad .flo dimensions: " + path.string());
    const std::size_t expect = 12 + static_cast<std::size_t>(w) * h * 8;
    if (bytes.size() != expect) throw FormatError("truncated .flo payload: " + path.string());

    FlowField flow(w, h);
    const std::uint8_t* p = bytes.data() + 12;
    for (std::size_t i = 0; i < flow.value.size(); ++i, p += 8) {
        const double u = get_f32(p);
        const double v = get_f32(p + 4);
        if (std::abs(u) > kFloInvalidBound || std::abs(v) > kFloInvalidBound || !std::isfinite(u) ||
            !std::isfinite(v))
            continue;
        flow.value[i] = {u, v};
        flow.valid[i] = 1;
    }
    return flow;
}

void write_pfm(const Grid<double>& value, const BinaryMask& valid, const fs::path& path) {
    if (!value.same_shape(valid)) throw InvalidInput("pfm value and validity must share the grid");
    const std::string header =
        "Pf\n" + std::to_string(value.width()) + " " + std::to_string(value.height()) + "\n-1.0\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    for (int y = value.height() - 1; y >= 0; --y)
        for (int x = 0; x < value.width(); ++x)
            put_f32(out, valid(x, y) ? static_cast<float>(value(x, y))
                                     : std::numeric_limits<float>::quiet_NaN());
    write_bytes(path, out);
}

void read_pfm_raw(const fs::path& path, Grid<double>& value, BinaryMask& valid) {
    const auto bytes = read_bytes(path);
    std::size_t pos = 0;
    auto token = [&]() {
        while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
        const std::size_t start = pos;
        while (pos < bytes.size() && !std::isspace(bytes[pos])) ++pos;
        if (start == pos) throw FormatError("truncated PFM header: " + path.string());
        return std::string(bytes.begin() + static_cast<long>(start), bytes.begin() + static_cast<long>(pos));
    };
    if (token() != "Pf") throw FormatError("not a single-channel PFM: " + path.string());
    int w = 0;
    int h = 0;
    double scale = 0.0;
    try {
        std::size_t used = 0;
        const std::string ws = token();
        w = std::stoi(ws, &used);
        if (used != ws.size()) throw FormatError("bad PFM width");
        const std::string hs = token();
        h = std::stoi(hs, &used);
        if (used != hs.size()) throw FormatError("bad PFM height");
        const std::string ss = token();
        scale = std::stod(ss, &used);
        if (used != ss.size()) throw FormatError("bad PFM scale");
    } catch (const std::logic_error&) {
        throw FormatError("malformed PFM header: " + path.string());
    }
    if (w < 0 || h < 0 || w > (1 << 16) || h > (1 << 16) || scale == 0.0 || !std::isfinite(scale))
        throw FormatError("malformed PFM header: " + path.string());
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError("truncated PFM: " + path.string());
    ++pos;
    const bool little = scale < 0.0;
    const std::size_t need = static_cast<std::size_t>(w) * h * 4;
    if (bytes.size() - pos != need) throw FormatError("PFM payload size mismatch: " + path.string());

    value = Grid<double>(w, h, 0.0);
    valid = BinaryMask(w, h, 0);
    const std::uint8_t* p = bytes.data() + pos;
    for (int y = h - 1; y >= 0; --y)
        for (int x = 0; x < w; ++x, p += 4) {
            const float f = get_f32(p, little);
            if (!std::isfinite(f)) continue;
            value(x, y) = f;
            valid(x, y) = 1;
        }
}

namespace {

[[noreturn]] void png_fail(png_structp, png_const_charp msg) {
    throw FormatError(std::string("png: ") + msg);
}
void png_quiet(png_structp, png_const_charp) {}

struct FileHandle {
    std::FILE* f = nullptr;
    ~FileHandle() {
        if (f) std::fclose(f);
    }
};

struct ReadStruct {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~ReadStruct() { png_destroy_read_struct(&png, info ? &info : nullptr, nullptr); }
};

struct WriteStruct {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~WriteStruct() { png_destroy_write_struct(&png, info ? &info : nullptr); }
};

}  // namespace

PngData read_png(const fs::path& path) {
    FileHandle fh{std::fopen(path.c_str(), "rb")};
    if (!fh.f) throw FormatError("cannot open " + path.string());
    png_byte sig[8];
    if (std::fread(sig, 1, 8, fh.f) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw FormatError("not a PNG file: " + path.string());

    ReadStruct rs;
    rs.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_quiet);
    if (!rs.png) throw FormatError("png: out of memory");
    rs.info = png_create_info_struct(rs.png);
    if (!rs.info) throw FormatError("png: out of memory");
    png_init_io(rs.png, fh.f);
    png_set_sig_bytes(rs.png, 8);
    png_read_info(rs.png, rs.info);

    PngData out;
    out.width = static_cast<int>(png_get_image_width(rs.png, rs.info));
    out.height = static_cast<int>(png_get_image_height(rs.png, rs.info));
    const int color = png_get_color_type(rs.png, rs.info);
    const int depth = png_get_bit_depth(rs.png, rs.info);
    out.indexed = color == PNG_COLOR_TYPE_PALETTE;
    if (out.indexed) {
        png_colorp pal = nullptr;
        int n = 0;
        if (png_get_PLTE(rs.png, rs.info, &pal, &n) == PNG_INFO_PLTE)
            for (int i = 0; i < n; ++i) out.palette.push_back({pal[i].red, pal[i].green, pal[i].blue});
        if (depth < 8) png_set_packing(rs.png);
    } else if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
        png_set_expand_gray_1_2_4_to_8(rs.png);
    }
    png_set_interlace_handling(rs.png);
    png_read_update_info(rs.png, rs.info);

    out.channels = png_get_channels(rs.png, rs.info);
    out.bit_depth = png_get_bit_depth(rs.png, rs.info);
    const std::size_t rowbytes = png_get_rowbytes(rs.png, rs.info);
    std::vector<png_byte> buf(rowbytes * out.height);
    std::vector<png_bytep> rows(out.height);
    for (int y = 0; y < out.height; ++y) rows[y] = buf.data() + y * rowbytes;
    png_read_image(rs.png, rows.data());
    png_read_end(rs.png, nullptr);

    const std::size_t n = static_cast<std::size_t>(out.width) * out.height * out.channels;
    out.samples.resize(n);
    for (int y = 0; y < out.height; ++y) {
        const png_byte* r = rows[y];
        const std::size_t row_n = static_cast<std::size_t>(out.width) * out.channels;
        for (std::size_t i = 0; i < row_n; ++i)
            out.samples[y * row_n + i] =
                out.bit_depth == 16 ? static_cast<std::uint16_t>((r[2 * i] << 8) | r[2 * i + 1]) : r[i];
    }
    return out;
}

void write_png(const fs::path& path, int width, int height, int channels, int bit_depth,
               const std::vector<std::uint16_t>& samples) {
    if (channels != 1 && channels != 3 && channels != 4) throw InvalidInput("png channels must be 1, 3 or 4");
    if (bit_depth != 8 && bit_depth != 16) throw InvalidInput("png bit depth must be 8 or 16");
    if (width <= 0 || height <= 0) throw InvalidInput("png image must be non-empty");
    const std::size_t row_n = static_cast<std::size_t>(width) * channels;
    if (samples.size() != row_n * height) throw InvalidInput("png sample count mismatch");

    FileHandle fh{std::fopen(path.c_str(), "wb")};
    if (!fh.f) throw FormatError("cannot write " + path.string());
    WriteStruct ws;
    ws.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_quiet);
    if (!ws.png) throw FormatError("png: out of memory");
    ws.info = png_create_info_struct(ws.png);
    if (!ws.info) throw FormatError("png: out of memory");
    png_init_io(ws.png, fh.f);
    const int color = channels == 1 ? PNG_COLOR_TYPE_GRAY
                      : channels == 3 ? PNG_COLOR_TYPE_RGB
                                      : PNG_COLOR_TYPE_RGB_ALPHA;
    png_set_IHDR(ws.png, ws.info, width, height, bit_depth, color, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(ws.png, 6);
    png_write_info(ws.png, ws.info);

    const std::size_t bytes_per = bit_depth == 16 ? 2 : 1;
    std::vector<png_byte> row(row_n * bytes_per);
    for (int y = 0; y < height; ++y) {
        for (std::size_t i = 0; i < row_n; ++i) {
            const std::uint16_t s = samples[y * row_n + i];
            if (bit_depth == 16) {
                row[2 * i] = static_cast<png_byte>(s >> 8);
                row[2 * i + 1] = static_cast<png_byte>(s & 0xff);
            } else {
                row[i] = static_cast<png_byte>(std::min<std::uint16_t>(s, 255));
            }
        }
        png_write_row(ws.png, row.data());
    }
    png_write_end(ws.png, nullptr);
    std::fflush(fh.f);
    if (std::ferror(fh.f)) throw FormatError("write failed: " + path.string());
}

RgbImage read_png_rgb(const fs::path& path) {
    const PngData d = read_png(path);
    RgbImage img(d.width, d.height);
    const double maxv = d.bit_depth == 16 ? 65535.0 : 255.0;
    for (std::size_t i = 0; i < img.size(); ++i) {
        const std::uint16_t* s = d.samples.data() + i * d.channels;
        if (d.indexed) {
            if (s[0] >= d.palette.size()) throw FormatError("palette index out of range: " + path.string());
            const auto& c = d.palette[s[0]];
            img[i] = {c[0] / 255.0, c[1] / 255.0, c[2] / 255.0};
        } else if (d.channels <= 2) {
            img[i] = {s[0] / maxv, s[0] / maxv, s[0] / maxv};
        } else {
            img[i] = {s[0] / maxv, s[1] / maxv, s[2] / maxv};
        }
    }
    return img;
}

namespace {

void write_rgb(const RgbImage& image, const fs::path& path, int bit_depth) {
    const double maxv = bit_depth == 16 ? 65535.0 : 255.0;
    std::vector<std::uint16_t> s;
    s.reserve(image.size() * 3);
    auto q = [&](double v) {
        return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * maxv));
    };
    for (const auto& c : image) {
        s.push_back(q(c.r));
        s.push_back(q(c.g));
        s.push_back(q(c.b));
    }
    write_png(path, image.width(), image.height(), 3, bit_depth, s);
}

}  // namespace

void write_png_rgb8(const RgbImage& image, const fs::path& path) { write_rgb(image, path, 8); }
void write_png_rgb16(const RgbImage& image, const fs::path& path) { write_rgb(image, path, 16); }

void write_mask_png(const BinaryMask& mask, const fs::path& path) {
    std::vector<std::uint16_t> s(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) s[i] = mask[i] ? 255 : 0;
    write_png(path, mask.width(), mask.height(), 1, 8, s);
}

BinaryMask read_mask_png(const fs::path& path) {
    const PngData d = read_png(path);
    BinaryMask m(d.width, d.height, 0);
    for (std::size_t i = 0; i < m.size(); ++i) {
        bool on = false;
        for (int c = 0; c < std::min(d.channels, 3); ++c) on = on || d.samples[i * d.channels + c] != 0;
        m[i] = on ? 1 : 0;
    }
    return m;
}

void write_disparity_png16(const DisparityMap& map, const fs::path& path) {
    std::vector<std::uint16_t> s(map.value.size(), 0);
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!map.valid[i]) continue;
        const double d = map.value[i];
        if (!(d >= 0.0 && d < 255.99)) throw RangeError("disparity not encodable in 16-bit PNG");
        s[i] = static_cast<std::uint16_t>(std::lround(d * 256.0));
    }
    write_png(path, map.width(), map.height(), 1, 16, s);
}

DisparityMap read_disparity_png16(const fs::path& path) {
    const PngData d = read_png(path);
    if (d.channels != 1 || d.bit_depth != 16 || d.indexed)
        throw FormatError("disparity PNG must be 16-bit grayscale: " + path.string());
    DisparityMap m(d.width, d.height);
    for (std::size_t i = 0; i < d.samples.size(); ++i)
        if (d.samples[i] != 0) {
            m.value[i] = d.samples[i] / 256.0;
            m.valid[i] = 1;
        }
    return m;
}

namespace {

// Middlebury color wheel: red, yellow, green, cyan, blue, magenta segments.
std::vector<Rgb> make_colorwheel() {
    const int counts[6] = {15, 6, 4, 11, 13, 6};
    std::vector<Rgb> wheel;
    auto seg = [&](int n, auto fn) {
        for (int i = 0; i < n; ++i) wheel.push_back(fn(static_cast<double>(i) / n));
    };
    seg(counts[0], [](double f) { return Rgb{1.0, f, 0.0}; });
    seg(counts[1], [](double f) { return Rgb{1.0 - f, 1.0, 0.0}; });
    seg(counts[2], [](double f) { return Rgb{0.0, 1.0, f}; });
    seg(counts[3], [](double f) { return Rgb{0.0, 1.0 - f, 1.0}; });
    seg(counts[4], [](double f) { return Rgb{f, 0.0, 1.0}; });
    seg(counts[5], [](double f) { return Rgb{1.0, 0.0, 1.0 - f}; });
    return wheel;
}

}  // namespace

RgbImage flow_to_color(const FlowField& flow, std::optional<double> max_flow) {
    static const std::vector<Rgb> wheel = make_colorwheel();
    const int ncols = static_cast<int>(wheel.size());
    double maxrad = max_flow.value_or(0.0);
    if (!max_flow)
        for (std::size_t i = 0; i < flow.value.size(); ++i)
            if (flow.valid[i]) maxrad = std::max(maxrad, std::sqrt(flow.value[i].squared_norm()));

    RgbImage img(flow.width(), flow.height());
    for (std::size_t i = 0; i < img.size(); ++i) {
        if (!flow.valid[i]) continue;
        double u = flow.value[i].u;
        double v = flow.value[i].v;
        if (maxrad > 0.0) {
            u /= maxrad;
            v /= maxrad;
        } else {
            u = v = 0.0;
        }
        const double rad = std::sqrt(u * u + v * v);
        if (rad == 0.0) {
            img[i] = {1.0, 1.0, 1.0};
            continue;
        }
        const double a = std::atan2(-v, -u) / std::numbers::pi;
        const double fk = (a + 1.0) / 2.0 * (ncols - 1);
        const int k0 = static_cast<int>(std::floor(fk));
        const int k1 = (k0 + 1) % ncols;
        const double f = fk - k0;
        const Rgb c0 = wheel[k0 % ncols];
        const Rgb c1 = wheel[k1];
        auto mix = [&](double a0, double a1) {
            double c = (1.0 - f) * a0 + f * a1;
            if (rad <= 1.0) return 1.0 - rad * (1.0 - c);
            return c * 0.75;
        };
        img[i] = {mix(c0.r, c1.r), mix(c0.g, c1.g), mix(c0.b, c1.b)};
    }
    return img;
}

void flow_colorwheel_png(const FlowField& flow, const fs::path& path, std::optional<double> max_flow) {
    write_png_rgb8(flow_to_color(flow, max_flow), path);
}

RgbImage metric_heatmap(const MetricMap& map, double lo, double hi) {
    static const Rgb stops[4] = {{0.05, 0.03, 0.25}, {0.55, 0.10, 0.50}, {0.95, 0.45, 0.10}, {1.0, 1.0, 0.6}};
    RgbImage img(map.width(), map.height());
    const double range = hi > lo ? hi - lo : 1.0;
    for (std::size_t i = 0; i < img.size(); ++i) {
        if (!map.valid[i]) continue;
        const double t = std::clamp((map.value[i] - lo) / range, 0.0, 1.0) * 3.0;
        const int k = std::min(static_cast<int>(t), 2);
        const double f = t - k;
        img[i] = stops[k] * (1.0 - f) + stops[k + 1] * f;
    }
    return img;
}

SegMaskSet read_segmentation(const fs::path& path, std::vector<std::string>* ids) {
    if (ids) ids->clear();
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(path))
            if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw FormatError("no mask PNGs in " + path.string());
        BinaryMask first = read_mask_png(files.front());
        SegMaskSet set(first.width(), first.height());
        for (std::size_t k = 0; k < files.size(); ++k) {
            BinaryMask m = k == 0 ? first : read_mask_png(files[k]);
            if (!m.same_shape(first)) throw FormatError("mask size mismatch: " + files[k].string());
            set.add(std::move(m));
            if (ids) ids->push_back(files[k].stem().string());
        }
        return set;
    }

    const PngData d = read_png(path);
    const int used = std::min(d.channels, 3);
    std::map<std::uint64_t, BinaryMask> by_label;
    for (std::size_t i = 0; i < static_cast<std::size_t>(d.width) * d.height; ++i) {
        std::uint64_t key = 0;
        for (int c = 0; c < used; ++c) key = (key << 16) | d.samples[i * d.channels + c];
        if (key == 0) continue;
        auto it = by_label.find(key);
        if (it == by_label.end()) it = by_label.emplace(key, BinaryMask(d.width, d.height, 0)).first;
        it->second[i] = 1;
    }
    SegMaskSet set(d.width, d.height);
    for (auto& [key, mask] : by_label) {
        set.add(std::move(mask));
        if (ids) ids->push_back(std::to_string(key));
    }
    return set;
}

namespace {

nlohmann::json box_json(const PixelBox& b) { return {b.x0, b.y0, b.width, b.height}; }

PixelBox box_from(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 4) throw FormatError("asset box must have 4 integers");
    return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

}  // namespace

void write_asset(const ForegroundAsset& asset, const fs::path& dir) {
    fs::create_directories(dir);
    write_png_rgb16(asset.frame1, dir / "frame1.png");
    write_png_rgb16(asset.frame2, dir / "frame2.png");
    write_mask_png(asset.alpha1, dir / "alpha1.png");
    write_mask_png(asset.alpha2, dir / "alpha2.png");
    nlohmann::json meta;
    meta["task"] = asset.task == Task::Flow ? "flow" : "stereo";
    meta["box1"] = box_json(asset.box1);
    meta["box2"] = box_json(asset.box2);
    if (asset.task == Task::Flow) {
        write_flo(asset.flow, dir / "label.flo");
        meta["label"] = "label.flo";
    } else {
        DisparityMap d(asset.flow.width(), asset.flow.height());
        for (std::size_t i = 0; i < d.value.size(); ++i)
            if (asset.flow.valid[i]) {
                d.value[i] = -asset.flow.value[i].u;
                d.valid[i] = 1;
            }
        write_pfm(d, dir / "label.pfm");
        meta["label"] = "label.pfm";
    }
    const std::string text = meta.dump(2) + "\n";
    write_bytes(dir / "meta.json", {text.begin(), text.end()});
}

ForegroundAsset read_asset(const fs::path& dir) {
    nlohmann::json meta;
    try {
        const auto bytes = read_bytes(dir / "meta.json");
        meta = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad asset metadata in " + dir.string() + ": " + e.what());
    }
    ForegroundAsset a;
    try {
        const std::string task = meta.at("task").get<std::string>();
        if (task != "flow" && task != "stereo") throw FormatError("unknown asset task: " + task);
        a.task = task == "flow" ? Task::Flow : Task::Stereo;
        a.box1 = box_from(meta.at("box1"));
        a.box2 = box_from(meta.at("box2"));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad asset metadata in " + dir.string() + ": " + e.what());
    }
    a.frame1 = read_png_rgb(dir / "frame1.png");
    a.frame2 = read_png_rgb(dir / "frame2.png");
    a.alpha1 = read_mask_png(dir / "alpha1.png");
    a.alpha2 = read_mask_png(dir / "alpha2.png");
    if (a.task == Task::Flow) {
        a.flow = read_flo(dir / "label.flo");
    } else {
        const auto d = read_pfm<DisparityTag>(dir / "label.pfm");
        a.flow = FlowField(d.width(), d.height());
        for (std::size_t i = 0; i < d.value.size(); ++i)
            if (d.valid[i]) {
                a.flow.value[i] = {-d.value[i], 0.0};
                a.flow.valid[i] = 1;
            }
    }
    if (!a.frame1.same_shape(a.box1.width, a.box1.height) || !a.alpha1.same_shape(a.frame1) ||
        !a.flow.valid.same_shape(a.frame1) || !a.frame2.same_shape(a.box2.width, a.box2.height) ||
        !a.alpha2.same_shape(a.frame2))
        throw FormatError("asset bundle sizes disagree with its boxes: " + dir.string());
    return a;
}

void write_rayfield(const RayWeightField& field, const fs::path& path) {
    std::vector<std::uint8_t> out{'L', 'F', 'R', 'W'};
    put_u32(out, static_cast<std::uint32_t>(field.width()));
    put_u32(out, static_cast<std::uint32_t>(field.height()));
    for (int y = 0; y < field.height(); ++y)
        for (int x = 0; x < field.width(); ++x) {
            const auto ray = field.ray(x, y);
            put_u32(out, static_cast<std::uint32_t>(ray.size()));
            for (const auto& s : ray) {
                put_f32(out, static_cast<float>(s.t_lo));
                put_f32(out, static_cast<float>(s.t_hi));
                put_f32(out, static_cast<float>(s.weight));
            }
        }
    write_bytes(path, out);
}

RayWeightField read_rayfield(const fs::path& path) {
    const auto bytes = read_bytes(path);
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "LFRW", 4) != 0)
        throw FormatError("not a ray field dump: " + path.string());
    const auto w = static_cast<std::int32_t>(get_u32(bytes.data() + 4, true));
    const auto h = static_cast<std::int32_t>(get_u32(bytes.data() + 8, true));
    if (w < 0 || h < 0 || w > (1 << 16) || h > (1 << 16)) throw FormatError("bad ray field size");
    RayWeightField field(w, h);
    std::size_t pos = 12;
    std::vector<RaySample> samples;
    for (long i = 0; i < static_cast<long>(w) * h; ++i) {
        if (pos + 4 > bytes.size()) throw FormatError("truncated ray field: " + path.string());
        const std::uint32_t n = get_u32(bytes.data() + pos, true);
        pos += 4;
        if ((bytes.size() - pos) / 12 < n) throw FormatError("truncated ray field: " + path.string());
        samples.clear();
        for (std::uint32_t k = 0; k < n; ++k, pos += 12)
            samples.push_back({get_f32(bytes.data() + pos), get_f32(bytes.data() + pos + 4),
                               get_f32(bytes.data() + pos + 8), {}});
        field.push_ray(samples);
    }
    if (pos != bytes.size()) throw FormatError("trailing bytes in ray field: " + path.string());
    return field;
}

}  // namespace labelforge
