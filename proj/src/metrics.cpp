#include "rt/metrics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "rt/data.hpp"

namespace rt::metrics {

namespace {

void check_images(const Tensor<float>& a, const Tensor<float>& b, const char* what) {
    if (a.rank() != 3 || b.rank() != 3)
        throw ContractError(std::string(what) + " expects [C,H,W] images");
    if (a.shape() != b.shape())
        throw ContractError(std::string(what) + ": shapes differ, " + shape_str(a.shape()) +
                            " vs " + shape_str(b.shape()));
}

inline double to01(float v) { return (static_cast<double>(v) + 1.0) * 0.5; }

// Luma plane in [0,1] from a [C,H,W] model-range image (C = 1 or 3).
std::vector<double> luma(const Tensor<float>& im) {
    int c = im.dim(0), h = im.dim(1), w = im.dim(2);
    if (c != 1 && c != 3)
        throw ContractError("ssim needs 1 or 3 channels, got " + std::to_string(c));
    std::vector<double> y(static_cast<size_t>(h) * w);
    int64_t plane = static_cast<int64_t>(h) * w;
    for (int64_t p = 0; p < plane; ++p) {
        if (c == 1)
            y[static_cast<size_t>(p)] = to01(im[p]);
        else
            y[static_cast<size_t>(p)] = 0.299 * to01(im[p]) + 0.587 * to01(im[plane + p]) +
                                        0.114 * to01(im[2 * plane + p]);
    }
    return y;
}

}  // namespace

double psnr(const Tensor<float>& a, const Tensor<float>& b) {
    check_images(a, b, "psnr");
    double mse = 0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        double d = to01(a[i]) - to01(b[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(a.numel());
    if (mse < 1e-10) return 100.0;
    return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Tensor<float>& a, const Tensor<float>& b) {
    check_images(a, b, "ssim");
    int h = a.dim(1), w = a.dim(2);
    int win = 11;
    int smallest = std::min(h, w);
    if (smallest < win) win = smallest % 2 == 1 ? smallest : smallest - 1;
    if (win < 3) throw ContractError("ssim: image smaller than the minimum 3x3 window");

    // Normalized Gaussian window, sigma 1.5.
    std::vector<double> g(static_cast<size_t>(win) * win);
    int half = win / 2;
    double sum = 0;
    for (int y = 0; y < win; ++y)
        for (int x = 0; x < win; ++x) {
            double dy = y - half, dx = x - half;
            double v = std::exp(-(dy * dy + dx * dx) / (2.0 * 1.5 * 1.5));
            g[static_cast<size_t>(y) * win + x] = v;
            sum += v;
        }
    for (auto& v : g) v /= sum;

    auto ya = luma(a), yb = luma(b);
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double acc = 0;
    int count = 0;
    for (int oy = 0; oy + win <= h; ++oy)
        for (int ox = 0; ox + win <= w; ++ox) {
            double ma = 0, mb = 0;
            for (int y = 0; y < win; ++y)
                for (int x = 0; x < win; ++x) {
                    double wgt = g[static_cast<size_t>(y) * win + x];
                    ma += wgt * ya[static_cast<size_t>(oy + y) * w + (ox + x)];
                    mb += wgt * yb[static_cast<size_t>(oy + y) * w + (ox + x)];
                }
            double va = 0, vb = 0, cov = 0;
            for (int y = 0; y < win; ++y)
                for (int x = 0; x < win; ++x) {
                    double wgt = g[static_cast<size_t>(y) * win + x];
                    double da = ya[static_cast<size_t>(oy + y) * w + (ox + x)] - ma;
                    double db = yb[static_cast<size_t>(oy + y) * w + (ox + x)] - mb;
                    va += wgt * da * da;
                    vb += wgt * db * db;
                    cov += wgt * da * db;
                }
            double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
            double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
            acc += num / den;
            ++count;
        }
    return acc / count;
}

double changed_pixel_ratio(const Tensor<float>& input, const Tensor<float>& output, double tau) {
    check_images(input, output, "changed_pixel_ratio");
    int c = input.dim(0), h = input.dim(1), w = input.dim(2);
    int64_t plane = static_cast<int64_t>(h) * w;
    int64_t changed = 0;
    for (int64_t p = 0; p < plane; ++p) {
        double maxd = 0;
        for (int ch = 0; ch < c; ++ch)
            maxd = std::max(maxd, std::abs(to01(input[ch * plane + p]) -
                                           to01(output[ch * plane + p])));
        if (maxd > tau) ++changed;
    }
    return static_cast<double>(changed) / static_cast<double>(plane);
}

double perceptual_distance(const Tensor<float>& a, const Tensor<float>& b,
                           const FeatureFn& extractor) {
    check_images(a, b, "perceptual_distance");
    std::vector<Tensor<float>> fa, fb;
    try {
        fa = extractor(a);
        fb = extractor(b);
    } catch (const std::exception& e) {
        throw ContractError(std::string("perceptual extractor failed: ") + e.what());
    }
    if (fa.size() != fb.size() || fa.empty())
        throw ContractError("perceptual extractor returned mismatched feature lists");
    double total = 0;
    for (size_t k = 0; k < fa.size(); ++k) {
        if (fa[k].shape() != fb[k].shape())
            throw ContractError("perceptual feature shapes differ at level " + std::to_string(k));
        double acc = 0;
        for (int64_t i = 0; i < fa[k].numel(); ++i) {
            double d = static_cast<double>(fa[k][i]) - static_cast<double>(fb[k][i]);
            acc += d * d;
        }
        total += acc / static_cast<double>(fa[k].numel());
    }
    return total;
}

Aggregate MetricReport::aggregate(const std::vector<SampleMetrics>& rows,
                                  double SampleMetrics::*field) const {
    Aggregate out;
    if (rows.empty()) return out;
    for (const auto& r : rows) out.mean += r.*field;
    out.mean /= static_cast<double>(rows.size());
    for (const auto& r : rows) {
        double d = r.*field - out.mean;
        out.stddev += d * d;
    }
    out.stddev = std::sqrt(out.stddev / static_cast<double>(rows.size()));
    return out;
}

namespace {

nlohmann::json rows_json(const std::vector<SampleMetrics>& rows, const char* which) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows)
        arr.push_back({{"id", r.id},
                       {"which", which},
                       {"psnr_db", r.psnr_db},
                       {"ssim", r.ssim},
                       {"perc_dist", r.perc_dist},
                       {"changed_ratio", r.changed_ratio}});
    return arr;
}

nlohmann::json agg_json(const MetricReport& rep, const std::vector<SampleMetrics>& rows) {
    auto one = [&](double SampleMetrics::*f) {
        auto a = rep.aggregate(rows, f);
        return nlohmann::json{{"mean", a.mean}, {"stddev", a.stddev}};
    };
    return {{"psnr_db", one(&SampleMetrics::psnr_db)},
            {"ssim", one(&SampleMetrics::ssim)},
            {"perc_dist", one(&SampleMetrics::perc_dist)},
            {"changed_ratio", one(&SampleMetrics::changed_ratio)}};
}

}  // namespace

nlohmann::json MetricReport::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["config"] = config_fingerprint;
    nlohmann::json rows = rows_json(model_rows, "model");
    for (auto& r : rows_json(baseline_rows, "baseline")) rows.push_back(r);
    j["rows"] = std::move(rows);
    j["aggregates"] = {{"model", agg_json(*this, model_rows)},
                       {"baseline", agg_json(*this, baseline_rows)}};
    return j;
}

std::string MetricReport::to_csv() const {
    std::ostringstream os;
    os << "id,which,psnr_db,ssim,perc_dist,changed_ratio\n";
    os.precision(10);
    auto emit = [&](const std::vector<SampleMetrics>& rows, const char* which) {
        for (const auto& r : rows)
            os << r.id << ',' << which << ',' << r.psnr_db << ',' << r.ssim << ','
               << r.perc_dist << ',' << r.changed_ratio << '\n';
    };
    emit(model_rows, "model");
    emit(baseline_rows, "baseline");
    return os.str();
}

MetricReport evaluate_dataset(
    const std::function<Tensor<float>(const Tensor<float>&)>& run_model,
    const std::string& dataset_dir, const std::string& split, const FeatureFn& extractor,
    const std::string& report_base, const nlohmann::json& config_fingerprint) {
    auto entries = data::dataset_iterate(dataset_dir, split, 0);
    if (entries.empty())
        throw ContractError("dataset split '" + split + "' in " + dataset_dir + " is empty");
    // Deterministic order regardless of the shuffle stream.
    std::sort(entries.begin(), entries.end(),
              [](const data::ManifestEntry& a, const data::ManifestEntry& b) { return a.id < b.id; });

    MetricReport rep;
    rep.config_fingerprint = config_fingerprint;
    for (const auto& e : entries) {
        auto s = data::load_sample(dataset_dir, e);
        Tensor<float> out = run_model(s.raw);
        if (out.shape() != s.clean.shape())
            throw ContractError("model output shape " + shape_str(out.shape()) +
                                " does not match target " + shape_str(s.clean.shape()) +
                                " for sample " + e.id);
        // Metrics are computed on the image as delivered: snapped to the
        // 8-bit storage grid, exactly like the PNG the pipeline writes.
        for (int64_t i = 0; i < out.numel(); ++i) {
            float v01 = std::clamp((out[i] + 1.0f) * 0.5f, 0.0f, 1.0f);
            out[i] = static_cast<float>(std::lround(v01 * 255.0f)) / 255.0f * 2.0f - 1.0f;
        }
        SampleMetrics m;
        m.id = e.id;
        m.psnr_db = psnr(out, s.clean);
        m.ssim = ssim(out, s.clean);
        m.perc_dist = perceptual_distance(out, s.clean, extractor);
        m.changed_ratio = changed_pixel_ratio(s.raw, out);
        rep.model_rows.push_back(m);

        SampleMetrics b;
        b.id = e.id;
        b.psnr_db = psnr(s.raw, s.clean);
        b.ssim = ssim(s.raw, s.clean);
        b.perc_dist = perceptual_distance(s.raw, s.clean, extractor);
        b.changed_ratio = changed_pixel_ratio(s.raw, s.raw);
        rep.baseline_rows.push_back(b);
    }

    if (!report_base.empty()) {
        std::ofstream js(report_base + ".json", std::ios::trunc);
        js << rep.to_json().dump(1) << "\n";
        std::ofstream cs(report_base + ".csv", std::ios::trunc);
        cs << rep.to_csv();
        if (!js || !cs) throw IoError("failed writing report files at " + report_base);
    }
    return rep;
}

}  // namespace rt::metrics
