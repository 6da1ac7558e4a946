#include "rt/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace rt::data {

namespace fs = std::filesystem;
using nlohmann::json;

Tensor<float> augment(const PairedSample& s, double lambda) {
    if (lambda < 0.0 || lambda > 1.0)
        throw ArgumentError("augmentation factor must be in [0,1], got " + std::to_string(lambda));
    if (!s.raw.same_shape(s.clean))
        throw ContractError("paired sample '" + s.id + "': raw and clean shapes differ");
    Tensor<float> out(s.raw.shape());
    float l = static_cast<float>(lambda);
    for (int64_t i = 0; i < out.numel(); ++i)
        out[i] = (1.0f - l) * s.clean[i] + l * s.raw[i];
    return out;
}

void BlemishSpec::validate() const {
    auto range = [](int lo, int hi, const char* what) {
        if (lo < 0 || hi < lo)
            throw ArgumentError(std::string("blemish spec: bad ") + what + " count range");
    };
    range(spot_count_min, spot_count_max, "spot");
    range(scratch_count_min, scratch_count_max, "scratch");
    range(reflection_count_min, reflection_count_max, "reflection");
    auto real_range = [](double lo, double hi, const char* what) {
        if (!(lo > 0.0) || hi < lo)
            throw ArgumentError(std::string("blemish spec: degenerate ") + what + " range");
    };
    real_range(spot_radius_min, spot_radius_max, "spot radius");
    real_range(spot_strength_min, spot_strength_max, "spot strength");
    real_range(scratch_length_min, scratch_length_max, "scratch length");
    real_range(reflection_radius_min, reflection_radius_max, "reflection radius");
}

namespace {

struct Rgb {
    double r, g, b;
};

// Float working raster in [0,1], planar RGB.
struct Canvas {
    int res;
    std::vector<double> px;  // 3 * res * res
    explicit Canvas(int r) : res(r), px(3ull * r * r, 0.0) {}
    double& at(int c, int y, int x) { return px[(static_cast<size_t>(c) * res + y) * res + x]; }
};

void blend_pixel(Canvas& cv, int y, int x, const Rgb& color, double alpha) {
    if (alpha <= 0.0) return;
    alpha = std::min(1.0, alpha);
    double tgt[3] = {color.r, color.g, color.b};
    for (int c = 0; c < 3; ++c) {
        double& v = cv.at(c, y, x);
        v = (1.0 - alpha) * v + alpha * tgt[c];
    }
}

void draw_disk(Canvas& cv, double cy, double cx, double radius, const Rgb& color,
               double strength) {
    int y0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
    int y1 = std::min(cv.res - 1, static_cast<int>(std::ceil(cy + radius)));
    int x0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
    int x1 = std::min(cv.res - 1, static_cast<int>(std::ceil(cx + radius)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
            double t = 1.0 - d2 / (radius * radius);
            if (t > 0.0) blend_pixel(cv, y, x, color, strength * t);
        }
}

void draw_segment(Canvas& cv, double y0, double x0, double y1, double x1, double width,
                  const Rgb& color, double strength) {
    double miny = std::min(y0, y1) - width, maxy = std::max(y0, y1) + width;
    double minx = std::min(x0, x1) - width, maxx = std::max(x0, x1) + width;
    double dy = y1 - y0, dx = x1 - x0;
    double len2 = dy * dy + dx * dx;
    for (int y = std::max(0, (int)std::floor(miny)); y <= std::min(cv.res - 1, (int)std::ceil(maxy)); ++y)
        for (int x = std::max(0, (int)std::floor(minx)); x <= std::min(cv.res - 1, (int)std::ceil(maxx)); ++x) {
            double t = len2 > 0 ? ((y - y0) * dy + (x - x0) * dx) / len2 : 0.0;
            t = std::clamp(t, 0.0, 1.0);
            double py = y0 + t * dy, px = x0 + t * dx;
            double d = std::hypot(y - py, x - px);
            double a = 1.0 - d / width;
            if (a > 0.0) blend_pixel(cv, y, x, color, strength * a);
        }
}

void draw_soft_blob(Canvas& cv, double cy, double cx, double radius, const Rgb& color,
                    double strength) {
    int reach = static_cast<int>(std::ceil(radius * 2));
    int y0 = std::max(0, (int)cy - reach), y1 = std::min(cv.res - 1, (int)cy + reach);
    int x0 = std::max(0, (int)cx - reach), x1 = std::min(cv.res - 1, (int)cx + reach);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
            blend_pixel(cv, y, x, color, strength * std::exp(-3.0 * d2 / (radius * radius)));
        }
}

// Smooth skin-like base: dominant color, gentle gradients, low-frequency
// bumps, fine band-limited texture, and a few persistent details (freckles,
// moles) that belong to the subject and must survive retouching. All texture
// stays at wavelengths of several pixels so the content is band-limited below
// the half-resolution Nyquist rate; per-pixel white noise would make exact
// reproduction by any downsampling pipeline impossible by construction.
Canvas synth_base(int res, Rng& rng) {
    constexpr double kTau = 6.283185307179586;
    Canvas cv(res);
    double r = rng.uniform(0.6, 0.85);
    double g = r - rng.uniform(0.08, 0.18);
    double b = g - rng.uniform(0.05, 0.15);
    double gy = rng.uniform(-0.025, 0.025), gx = rng.uniform(-0.025, 0.025);

    struct Wave {
        double fy, fx, phase, amp;
    };
    std::vector<Wave> waves;
    // Low-frequency shading bumps; frequencies come from a coarse grid (like
    // the texture vocabulary below) so shading lives in a compact basis.
    static constexpr double kBumpFreqs[] = {0.5, 1.0, 1.5, 2.0};
    for (int i = 0; i < 3; ++i)
        waves.push_back({kBumpFreqs[rng.uniform_int(0, 3)], kBumpFreqs[rng.uniform_int(0, 3)],
                         rng.uniform(0.0, kTau), rng.uniform(0.004, 0.015)});
    // Fine texture: wavelengths and directions come from a small shared
    // vocabulary (phases and amplitudes stay per-image random) so the texture
    // occupies a compact, learnable frequency basis instead of a continuum.
    static constexpr double kWavelengths[] = {6.0, 8.0};
    static constexpr double kAngles[] = {0.0, kTau / 8, kTau / 4, 3 * kTau / 8};
    for (int i = 0; i < 6; ++i) {
        double wavelength = kWavelengths[rng.uniform_int(0, 1)];
        double theta = kAngles[rng.uniform_int(0, 3)];
        double f = static_cast<double>(res) / wavelength;
        waves.push_back({f * std::sin(theta), f * std::cos(theta), rng.uniform(0.0, kTau),
                         rng.uniform(0.001, 0.003)});
    }

    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
            double ny = static_cast<double>(y) / res, nx = static_cast<double>(x) / res;
            double shade = gy * (ny - 0.5) + gx * (nx - 0.5);
            for (const auto& wv : waves)
                shade += wv.amp * std::cos(kTau * (wv.fy * ny + wv.fx * nx) + wv.phase);
            cv.at(0, y, x) = std::clamp(r + shade, 0.0, 1.0);
            cv.at(1, y, x) = std::clamp(g + shade, 0.0, 1.0);
            cv.at(2, y, x) = std::clamp(b + shade, 0.0, 1.0);
        }

    // Persistent details (freckles, moles) use wide soft-edged blobs: the
    // Gaussian profile keeps them band-limited like the rest of the base, so
    // the pipeline can reproduce them exactly instead of being forced to
    // approximate a sub-pixel hard edge.
    int details = rng.uniform_int(2, 4);
    for (int i = 0; i < details; ++i) {
        double cy = rng.uniform(4.0, res - 5.0), cx = rng.uniform(4.0, res - 5.0);
        double rad = rng.uniform(2.5, 4.0);
        Rgb dark{r * 0.55, g * 0.5, b * 0.5};
        draw_soft_blob(cv, cy, cx, rad, dark, rng.uniform(0.35, 0.6));
    }
    return cv;
}

std::vector<uint8_t> quantize(const Canvas& cv) {
    std::vector<uint8_t> out(cv.px.size());
    for (size_t i = 0; i < cv.px.size(); ++i)
        out[i] = static_cast<uint8_t>(std::lround(std::clamp(cv.px[i], 0.0, 1.0) * 255.0));
    return out;
}

Tensor<float> u8_to_model(const std::vector<uint8_t>& u8, int res) {
    Tensor<float> t({3, res, res});
    for (int64_t i = 0; i < t.numel(); ++i)
        t[i] = static_cast<float>(u8[static_cast<size_t>(i)]) / 255.0f * 2.0f - 1.0f;
    return t;
}

}  // namespace

PairedSample synth_pair(uint64_t sample_seed, const BlemishSpec& spec, int resolution) {
    spec.validate();
    if (resolution < 8) throw ArgumentError("synthesizer needs resolution >= 8");
    Rng rng = Rng::derive(spec.seed, 0x5b1e9d00u + sample_seed);
    int res = resolution;

    Canvas clean = synth_base(res, rng);
    auto clean_u8 = quantize(clean);

    // Raw starts from the quantized clean so untouched pixels stay identical.
    Canvas raw(res);
    for (size_t i = 0; i < raw.px.size(); ++i) raw.px[i] = clean_u8[i] / 255.0;

    // Spots (acne-like discolorations), optionally kept disjoint.
    int spots = rng.uniform_int(spec.spot_count_min, spec.spot_count_max);
    struct Placed {
        double y, x, r;
    };
    std::vector<Placed> placed;
    for (int i = 0; i < spots; ++i) {
        double rad = rng.uniform(spec.spot_radius_min, spec.spot_radius_max) * res;
        rad = std::max(rad, 2.0);
        double cy = 0, cx = 0;
        bool ok = false;
        for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
            cy = rng.uniform(rad + 1.0, res - rad - 2.0);
            cx = rng.uniform(rad + 1.0, res - rad - 2.0);
            ok = true;
            if (!spec.allow_overlap)
                for (const auto& p : placed)
                    if (std::hypot(cy - p.y, cx - p.x) < rad + p.r + 3.0) {
                        ok = false;
                        break;
                    }
        }
        if (!ok) continue;  // board too crowded; skip rather than loop forever
        placed.push_back({cy, cx, rad});
        double strength = rng.uniform(spec.spot_strength_min, spec.spot_strength_max);
        Rgb blemish{rng.uniform(0.35, 0.55), rng.uniform(0.12, 0.25), rng.uniform(0.1, 0.2)};
        draw_disk(raw, cy, cx, rad, blemish, strength);
    }

    // Scratches: thin bright or dark lines.
    int scratches = rng.uniform_int(spec.scratch_count_min, spec.scratch_count_max);
    for (int i = 0; i < scratches; ++i) {
        double len = rng.uniform(spec.scratch_length_min, spec.scratch_length_max) * res;
        double y0 = rng.uniform(2.0, res - 3.0), x0 = rng.uniform(2.0, res - 3.0);
        double ang = rng.uniform(0.0, 6.283185307179586);
        double y1 = std::clamp(y0 + len * std::sin(ang), 1.0, res - 2.0);
        double x1 = std::clamp(x0 + len * std::cos(ang), 1.0, res - 2.0);
        bool bright = rng.uniform(0.0, 1.0) < 0.5;
        Rgb col = bright ? Rgb{0.95, 0.9, 0.88} : Rgb{0.25, 0.15, 0.12};
        draw_segment(raw, y0, x0, y1, x1, rng.uniform(1.0, 2.0), col,
                     rng.uniform(0.5, 0.9));
    }

    // Reflections: soft bright highlights.
    int reflections = rng.uniform_int(spec.reflection_count_min, spec.reflection_count_max);
    for (int i = 0; i < reflections; ++i) {
        double rad = rng.uniform(spec.reflection_radius_min, spec.reflection_radius_max) * res;
        double cy = rng.uniform(rad, res - rad - 1.0), cx = rng.uniform(rad, res - rad - 1.0);
        draw_soft_blob(raw, cy, cx, rad, Rgb{1.0, 1.0, 1.0}, rng.uniform(0.35, 0.6));
    }

    auto raw_u8 = quantize(raw);

    // Pixels whose 8-bit difference is within the 1/255 tolerance snap back to
    // the clean value, so the mask covers exactly the pixels that differ and
    // everything outside it is bit-identical.
    int64_t plane = static_cast<int64_t>(res) * res;
    Tensor<float> mask({1, res, res});
    for (int64_t p = 0; p < plane; ++p) {
        int du8 = 0;
        for (int c = 0; c < 3; ++c)
            du8 = std::max(du8, std::abs(int(raw_u8[c * plane + p]) - int(clean_u8[c * plane + p])));
        if (du8 <= 1) {
            for (int c = 0; c < 3; ++c) raw_u8[c * plane + p] = clean_u8[c * plane + p];
            mask[p] = 0.0f;
        } else {
            mask[p] = 1.0f;
        }
    }

    PairedSample out;
    out.raw = u8_to_model(raw_u8, res);
    out.clean = u8_to_model(clean_u8, res);
    out.blemish_mask = std::move(mask);
    return out;
}

namespace {

img::ImageU8 model_to_image(const Tensor<float>& t) { return img::to_u8(t); }

img::ImageU8 mask_to_image(const Tensor<float>& m) {
    img::ImageU8 im;
    im.channels = 1;
    im.height = m.dim(1);
    im.width = m.dim(2);
    im.pixels.resize(static_cast<size_t>(im.width) * im.height);
    for (int64_t i = 0; i < m.numel(); ++i)
        im.pixels[static_cast<size_t>(i)] = m[i] > 0.5f ? 255 : 0;
    return im;
}

}  // namespace

void dataset_build(int n, const BlemishSpec& spec, uint64_t seed, const std::string& out_dir,
                   int resolution, double train_fraction) {
    if (n <= 0) throw ArgumentError("dataset size must be positive");
    if (train_fraction < 0.0 || train_fraction > 1.0)
        throw ArgumentError("train fraction must be in [0,1]");
    BlemishSpec eff = spec;
    eff.seed = seed;

    fs::create_directories(fs::path(out_dir) / "images");

    // Random but deterministic split assignment.
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    Rng split_rng = Rng::derive(seed, 0x51e17u);
    for (int i = n - 1; i > 0; --i)
        std::swap(order[static_cast<size_t>(i)],
                  order[static_cast<size_t>(split_rng.uniform_int(0, i))]);
    int train_n = static_cast<int>(std::lround(train_fraction * n));
    std::vector<bool> is_train(static_cast<size_t>(n), false);
    for (int i = 0; i < train_n; ++i) is_train[static_cast<size_t>(order[static_cast<size_t>(i)])] = true;

    json manifest = json::array();
    char idbuf[16];
    for (int i = 0; i < n; ++i) {
        std::snprintf(idbuf, sizeof(idbuf), "s%05d", i);
        std::string id = idbuf;
        PairedSample s = synth_pair(static_cast<uint64_t>(i), eff, resolution);
        std::string raw_rel = "images/" + id + "_raw.png";
        std::string clean_rel = "images/" + id + "_clean.png";
        std::string mask_rel = "images/" + id + "_mask.png";
        img::write_png((fs::path(out_dir) / raw_rel).string(), model_to_image(s.raw));
        img::write_png((fs::path(out_dir) / clean_rel).string(), model_to_image(s.clean));
        img::write_png((fs::path(out_dir) / mask_rel).string(), mask_to_image(*s.blemish_mask));
        manifest.push_back({{"id", id},
                            {"raw_path", raw_rel},
                            {"clean_path", clean_rel},
                            {"mask_path", mask_rel},
                            {"split", is_train[static_cast<size_t>(i)] ? "train" : "test"}});
    }
    std::ofstream mf(fs::path(out_dir) / "manifest.json", std::ios::trunc);
    mf << manifest.dump(1) << "\n";
    if (!mf) throw IoError("failed writing manifest in " + out_dir);
}

std::vector<ManifestEntry> manifest_read(const std::string& dir) {
    fs::path mp = fs::path(dir) / "manifest.json";
    std::ifstream in(mp);
    if (!in) throw IoError("missing manifest " + mp.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_array()) throw IoError("corrupt manifest " + mp.string());
    std::vector<ManifestEntry> out;
    for (const auto& e : j) {
        ManifestEntry m;
        try {
            m.id = e.at("id");
            m.raw_path = e.at("raw_path");
            m.clean_path = e.at("clean_path");
            m.mask_path = e.value("mask_path", "");
            m.split = e.at("split");
        } catch (const json::exception&) {
            throw IoError("corrupt manifest entry in " + mp.string() +
                          (m.id.empty() ? "" : " near id " + m.id));
        }
        if (m.split != "train" && m.split != "test")
            throw IoError("manifest " + mp.string() + ": sample " + m.id +
                          " has unknown split '" + m.split + "'");
        out.push_back(std::move(m));
    }
    return out;
}

std::vector<ManifestEntry> dataset_iterate(const std::string& dir, const std::string& split,
                                           uint64_t shuffle_seed) {
    if (split != "train" && split != "test")
        throw ArgumentError("split must be 'train' or 'test', got '" + split + "'");
    std::vector<ManifestEntry> entries;
    for (auto& e : manifest_read(dir))
        if (e.split == split) entries.push_back(std::move(e));
    Rng rng = Rng::derive(shuffle_seed, 0x17e8a7eu);
    for (int i = static_cast<int>(entries.size()) - 1; i > 0; --i)
        std::swap(entries[static_cast<size_t>(i)],
                  entries[static_cast<size_t>(rng.uniform_int(0, i))]);
    return entries;
}

PairedSample load_sample(const std::string& dir, const ManifestEntry& e) {
    PairedSample s;
    s.id = e.id;
    try {
        s.raw = img::to_model(img::read_png((fs::path(dir) / e.raw_path).string()));
        s.clean = img::to_model(img::read_png((fs::path(dir) / e.clean_path).string()));
        if (!e.mask_path.empty()) {
            auto m = img::read_png((fs::path(dir) / e.mask_path).string());
            if (m.channels != 1) throw IoError("mask is not grayscale");
            Tensor<float> t({1, m.height, m.width});
            for (int64_t i = 0; i < t.numel(); ++i)
                t[i] = m.pixels[static_cast<size_t>(i)] > 127 ? 1.0f : 0.0f;
            s.blemish_mask = std::move(t);
        }
    } catch (const IoError& err) {
        throw IoError("sample " + e.id + ": " + err.what());
    }
    if (!s.raw.same_shape(s.clean))
        throw IoError("sample " + e.id + ": raw and clean sizes differ");
    return s;
}

}  // namespace rt::data
