#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "rt/metrics.hpp"
#include "rt/train.hpp"

using namespace rt;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Independent SSIM oracle: direct transcription of the sliding-window
// definition with its own Gaussian weights and scalar loops, kept separate
// from the production implementation on purpose.
// ---------------------------------------------------------------------------
double ssim_oracle(const Tensor<float>& a, const Tensor<float>& b) {
    int h = a.dim(1), w = a.dim(2);
    int win = std::min({11, h - (h % 2 == 0 ? 1 : 0), w - (w % 2 == 0 ? 1 : 0)});

    auto gray = [&](const Tensor<float>& im, int y, int x) {
        int64_t plane = static_cast<int64_t>(h) * w;
        auto u = [&](int c) { return ((double)im[c * plane + (int64_t)y * w + x] + 1.0) / 2.0; };
        if (im.dim(0) == 1) return u(0);
        return 0.299 * u(0) + 0.587 * u(1) + 0.114 * u(2);
    };

    double total = 0;
    int windows = 0;
    for (int oy = 0; oy + win <= h; ++oy)
        for (int ox = 0; ox + win <= w; ++ox) {
            double wsum = 0, mua = 0, mub = 0;
            for (int y = 0; y < win; ++y)
                for (int x = 0; x < win; ++x) {
                    double dy = y - win / 2, dx = x - win / 2;
                    double wt = std::exp(-(dy * dy + dx * dx) / 4.5);
                    wsum += wt;
                    mua += wt * gray(a, oy + y, ox + x);
                    mub += wt * gray(b, oy + y, ox + x);
                }
            mua /= wsum;
            mub /= wsum;
            double sa = 0, sb = 0, sab = 0;
            for (int y = 0; y < win; ++y)
                for (int x = 0; x < win; ++x) {
                    double dy = y - win / 2, dx = x - win / 2;
                    double wt = std::exp(-(dy * dy + dx * dx) / 4.5) / wsum;
                    double da = gray(a, oy + y, ox + x) - mua;
                    double db = gray(b, oy + y, ox + x) - mub;
                    sa += wt * da * da;
                    sb += wt * db * db;
                    sab += wt * da * db;
                }
            const double c1 = 1e-4, c2 = 9e-4;
            total += ((2 * mua * mub + c1) * (2 * sab + c2)) /
                     ((mua * mua + mub * mub + c1) * (sa + sb + c2));
            ++windows;
        }
    return total / windows;
}

Tensor<float> random_image(Shape s, Rng& rng, double amp = 1.0) {
    Tensor<float> t(s);
    for (int64_t i = 0; i < t.numel(); ++i)
        t[i] = static_cast<float>(std::clamp(rng.uniform(-amp, amp), -1.0, 1.0));
    return t;
}

}  // namespace

TEST_CASE("psnr formula, cap, and symmetry") {
    Tensor<float> a = Tensor<float>::full({3, 8, 8}, 0.0f);  // 0.5 on the [0,1] scale
    SUBCASE("identical images hit the 100 dB cap") {
        CHECK(metrics::psnr(a, a) == 100.0);
    }
    SUBCASE("uniform 0.1 offset on the [0,1] scale gives exactly 20 dB") {
        Tensor<float> b = Tensor<float>::full({3, 8, 8}, 0.2f);  // 0.6 on [0,1]
        CHECK(metrics::psnr(a, b) == doctest::Approx(20.0).epsilon(1e-6));
    }
    SUBCASE("all-zeros vs all-ones gives 0 dB") {
        Tensor<float> lo = Tensor<float>::full({3, 8, 8}, -1.0f);
        Tensor<float> hi = Tensor<float>::full({3, 8, 8}, 1.0f);
        CHECK(metrics::psnr(lo, hi) == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("symmetric on random pairs") {
        Rng rng(1);
        auto x = random_image({3, 8, 8}, rng);
        auto y = random_image({3, 8, 8}, rng);
        CHECK(metrics::psnr(x, y) == metrics::psnr(y, x));
    }
    SUBCASE("shape mismatch is refused") {
        Tensor<float> b({3, 4, 4});
        CHECK_THROWS_AS(metrics::psnr(a, b), ContractError);
    }
}

TEST_CASE("ssim identities and oracle equivalence") {
    SUBCASE("identical images give 1.0") {
        Rng rng(2);
        auto x = random_image({3, 16, 16}, rng);
        CHECK(metrics::ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("constant 0 vs constant 1 collapses to the C1 stabilizer term") {
        Tensor<float> lo = Tensor<float>::full({3, 16, 16}, -1.0f);
        Tensor<float> hi = Tensor<float>::full({3, 16, 16}, 1.0f);
        double expect = 1e-4 / (1.0 + 1e-4);
        CHECK(metrics::ssim(lo, hi) == doctest::Approx(expect).epsilon(1e-9));
    }
    SUBCASE("matches the brute-force sliding-window oracle") {
        Rng rng(3);
        for (int trial = 0; trial < 4; ++trial) {
            auto x = random_image({3, 16, 16}, rng, 0.8);
            auto y = random_image({3, 16, 16}, rng, 0.8);
            CHECK(metrics::ssim(x, y) == doctest::Approx(ssim_oracle(x, y)).epsilon(1e-6));
        }
        // Small images shrink the window; the oracle applies the same rule.
        auto x8 = random_image({3, 8, 8}, rng, 0.8);
        auto y8 = random_image({3, 8, 8}, rng, 0.8);
        CHECK(metrics::ssim(x8, y8) == doctest::Approx(ssim_oracle(x8, y8)).epsilon(1e-6));
        auto g = random_image({1, 12, 12}, rng, 0.8);
        auto g2 = random_image({1, 12, 12}, rng, 0.8);
        CHECK(metrics::ssim(g, g2) == doctest::Approx(ssim_oracle(g, g2)).epsilon(1e-6));
    }
    SUBCASE("tiny images are refused") {
        Tensor<float> t({3, 2, 2});
        CHECK_THROWS_AS(metrics::ssim(t, t), ContractError);
    }
}

TEST_CASE("changed pixel ratio counts max-channel exceedances") {
    Rng rng(4);
    auto x = random_image({3, 10, 10}, rng, 0.5);
    SUBCASE("identity gives 0, changing every pixel gives 1") {
        CHECK(metrics::changed_pixel_ratio(x, x) == 0.0);
        Tensor<float> shifted(x.shape());
        for (int64_t i = 0; i < x.numel(); ++i) shifted[i] = x[i] + 0.5f;
        CHECK(metrics::changed_pixel_ratio(x, shifted) == 1.0);
        Tensor<float> lo = Tensor<float>::full({3, 4, 4}, -1.0f);
        Tensor<float> hi = Tensor<float>::full({3, 4, 4}, 1.0f);
        CHECK(metrics::changed_pixel_ratio(lo, hi) == 1.0);
    }
    SUBCASE("synthetic pairs reproduce the mask area exactly") {
        data::BlemishSpec spec;
        spec.seed = 9;
        for (uint64_t s : {0ull, 1ull, 2ull}) {
            auto pair = data::synth_pair(s, spec, 32);
            double mask_area = 0;
            for (int64_t i = 0; i < pair.blemish_mask->numel(); ++i)
                mask_area += (*pair.blemish_mask)[i];
            mask_area /= static_cast<double>(pair.blemish_mask->numel());
            CHECK(metrics::changed_pixel_ratio(pair.raw, pair.clean) == mask_area);
        }
    }
}

TEST_CASE("perceptual distance: identity, symmetry, monotone noise response") {
    auto pyr = std::make_shared<train::FixedPyramidExtractor<float>>(77);
    auto fn = train::as_feature_fn(pyr);
    Rng rng(5);
    auto x = random_image({3, 16, 16}, rng, 0.6);

    SUBCASE("zero iff features equal") {
        CHECK(metrics::perceptual_distance(x, x, fn) == 0.0);
    }
    SUBCASE("symmetric") {
        auto y = random_image({3, 16, 16}, rng, 0.6);
        CHECK(metrics::perceptual_distance(x, y, fn) ==
              doctest::Approx(metrics::perceptual_distance(y, x, fn)).epsilon(1e-7));
        CHECK(metrics::perceptual_distance(x, y, fn) > 0.0);
    }
    SUBCASE("five-point additive noise sweep increases the distance") {
        Tensor<float> noise = random_image({3, 16, 16}, rng, 1.0);
        double prev = -1;
        for (double amp : {0.02, 0.05, 0.1, 0.2, 0.4}) {
            Tensor<float> noisy(x.shape());
            for (int64_t i = 0; i < x.numel(); ++i)
                noisy[i] = x[i] + static_cast<float>(amp) * noise[i];
            double d = metrics::perceptual_distance(x, noisy, fn);
            CHECK(d > prev);
            prev = d;
        }
    }
    SUBCASE("extractor failures carry context") {
        metrics::FeatureFn broken = [](const Tensor<float>&) -> std::vector<Tensor<float>> {
            throw std::runtime_error("no backend");
        };
        CHECK_THROWS_AS(metrics::perceptual_distance(x, x, broken), ContractError);
    }
}

TEST_CASE("dataset evaluation reports model and baseline rows side by side") {
    auto dir = fs::temp_directory_path() / "rt_eval_tests" / "ds";
    fs::remove_all(dir);
    fs::create_directories(dir);
    data::BlemishSpec spec;
    data::dataset_build(10, spec, 31, dir.string(), 16, 0.8);

    auto pyr = std::make_shared<train::FixedPyramidExtractor<float>>(77);
    auto fn = train::as_feature_fn(pyr);
    auto identity = [](const Tensor<float>& raw) { return raw; };
    auto base = (dir / "report").string();
    auto rep = metrics::evaluate_dataset(identity, dir.string(), "test", fn, base,
                                         {{"model", "identity"}});

    REQUIRE(rep.model_rows.size() == 2);
    REQUIRE(rep.baseline_rows.size() == 2);
    SUBCASE("the identity model matches the baseline rows") {
        for (size_t i = 0; i < rep.model_rows.size(); ++i) {
            CHECK(rep.model_rows[i].psnr_db == rep.baseline_rows[i].psnr_db);
            CHECK(rep.model_rows[i].ssim == rep.baseline_rows[i].ssim);
            CHECK(rep.model_rows[i].changed_ratio == 0.0);
        }
    }
    SUBCASE("aggregates are recomputable from the rows") {
        auto j = rep.to_json();
        double mean = 0;
        for (const auto& r : rep.model_rows) mean += r.psnr_db;
        mean /= static_cast<double>(rep.model_rows.size());
        CHECK(j["aggregates"]["model"]["psnr_db"]["mean"].get<double>() ==
              doctest::Approx(mean).epsilon(1e-12));
    }
    SUBCASE("report files are written and parse back") {
        std::ifstream js(base + ".json");
        REQUIRE(js.good());
        auto parsed = nlohmann::json::parse(js, nullptr, false);
        REQUIRE(!parsed.is_discarded());
        CHECK(parsed["schema_version"] == 1);
        CHECK(parsed["rows"].size() == 4);
        std::ifstream cs(base + ".csv");
        std::string header;
        std::getline(cs, header);
        CHECK(header == "id,which,psnr_db,ssim,perc_dist,changed_ratio");
    }
    SUBCASE("evaluation is deterministic") {
        auto rep2 = metrics::evaluate_dataset(identity, dir.string(), "test", fn, "", {});
        REQUIRE(rep2.model_rows.size() == rep.model_rows.size());
        for (size_t i = 0; i < rep.model_rows.size(); ++i) {
            CHECK(rep2.model_rows[i].id == rep.model_rows[i].id);
            CHECK(rep2.model_rows[i].perc_dist == rep.model_rows[i].perc_dist);
        }
    }
    SUBCASE("an empty split is an error, not an empty report") {
        auto dir2 = fs::temp_directory_path() / "rt_eval_tests" / "all_train";
        fs::remove_all(dir2);
        fs::create_directories(dir2);
        data::dataset_build(4, spec, 1, dir2.string(), 16, 1.0);  // no test ids
        CHECK_THROWS_AS(metrics::evaluate_dataset(identity, dir2.string(), "test", fn, "", {}),
                        ContractError);
    }
}
