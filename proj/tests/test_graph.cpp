#include <doctest.h>

#include "gradcheck.hpp"
#include "rt/graph.hpp"

using namespace rt;
using namespace rt::ag;
using rt::testing::random_tensor;

namespace {

ModelConfig tiny_model(BlendMode mode = BlendMode::SpatialChannel) {
    ModelConfig m;
    m.gp.levels = 3;
    m.gp.latent_dim = 4;
    m.gp.channel_base = 2;
    m.gp.channel_max = 4;
    m.blend_mode = mode;
    return m;
}

template <class T>
bool same_values(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) return false;
    for (int64_t k = 0; k < a.numel(); ++k)
        if (a[k] != b[k]) return false;
    return true;
}

template <class T>
double abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    double d = 0;
    for (int64_t k = 0; k < a.numel(); ++k) d += std::abs(double(a[k]) - double(b[k]));
    return d;
}

}  // namespace

TEST_CASE("end-to-end forward: shapes, mask pyramid, and output range") {
    ModelConfig cfg = tiny_model();
    auto model = build_model<double>(cfg, 42);
    Rng rng(1);
    auto input = constant(random_tensor({2, 3, 16, 16}, rng, 0.7));
    auto res = retouch(model, input);
    int L = cfg.gp.levels;

    CHECK(res.output->value.shape() == input->value.shape());
    for (int64_t k = 0; k < res.output->value.numel(); ++k) {
        CHECK(res.output->value[k] >= -1.0);
        CHECK(res.output->value[k] <= 1.0);
    }
    CHECK(res.diagnostics.latent->value.shape() == Shape{2, 2 * L, cfg.gp.latent_dim});
    REQUIRE(res.diagnostics.spatial_masks.size() == size_t(L - 1));
    REQUIRE(res.diagnostics.channel_masks.size() == size_t(L - 1));
    REQUIRE(res.diagnostics.blends.size() == size_t(L - 1));
    for (int i = 1; i <= L - 1; ++i) {
        int r = cfg.gp.resolution(i) / 2;
        int c = cfg.gp.channels(i + 1);
        CHECK(res.diagnostics.spatial_masks.at(i)->value.shape() == Shape{2, 1, r, r});
        CHECK(res.diagnostics.channel_masks.at(i)->value.shape() == Shape{2, c, 1, 1});
        CHECK(res.diagnostics.blends.at(i)->value.shape() == Shape{2, c, r, r});
    }
}

TEST_CASE("L=5 model retouches 64px images with four mask levels") {
    ModelConfig cfg;
    cfg.gp.levels = 5;
    cfg.gp.latent_dim = 16;
    cfg.gp.channel_base = 4;
    cfg.gp.channel_max = 16;
    auto model = build_model<float>(cfg, 7);
    Rng rng(2);
    auto input = constant(random_tensor({1, 3, 64, 64}, rng, 0.7).cast<float>());
    auto res = retouch(model, input);
    CHECK(res.output->value.shape() == Shape{1, 3, 64, 64});
    REQUIRE(res.diagnostics.spatial_masks.size() == 4);
    CHECK(res.diagnostics.spatial_masks.at(1)->value.shape() == Shape{1, 1, 32, 32});
    CHECK(res.diagnostics.spatial_masks.at(2)->value.shape() == Shape{1, 1, 16, 16});
    CHECK(res.diagnostics.spatial_masks.at(3)->value.shape() == Shape{1, 1, 8, 8});
    CHECK(res.diagnostics.spatial_masks.at(4)->value.shape() == Shape{1, 1, 4, 4});
}

TEST_CASE("forward is deterministic and reproducible across rebuilds") {
    ModelConfig cfg = tiny_model();
    auto m1 = build_model<double>(cfg, 99);
    auto m2 = build_model<double>(cfg, 99);
    Rng rng(3);
    auto input = constant(random_tensor({1, 3, 16, 16}, rng, 0.7));
    auto r1 = retouch(m1, input);
    auto r2 = retouch(m1, input);
    auto r3 = retouch(m2, input);
    CHECK(same_values(r1.output->value, r2.output->value));
    CHECK(same_values(r1.output->value, r3.output->value));
    SUBCASE("a different seed gives a different network") {
        auto m4 = build_model<double>(cfg, 100);
        auto r4 = retouch(m4, input);
        CHECK(abs_diff(r1.output->value, r4.output->value) > 1e-6);
    }
}

TEST_CASE("strength one is bit-exact with the default path") {
    ModelConfig cfg = tiny_model();
    auto model = build_model<double>(cfg, 5);
    Rng rng(4);
    auto input = constant(random_tensor({1, 3, 16, 16}, rng, 0.7));
    auto base = retouch(model, input);
    StrengthSpec s1;
    s1.s = 1.0;
    auto explicit1 = retouch(model, input, s1);
    CHECK(same_values(base.output->value, explicit1.output->value));

    SUBCASE("other strengths change the output") {
        StrengthSpec s2;
        s2.s = 2.0;
        auto r2 = retouch(model, input, s2);
        CHECK(abs_diff(base.output->value, r2.output->value) > 1e-9);
        StrengthSpec s0;
        s0.s = 0.0;
        auto r0 = retouch(model, input, s0);
        CHECK(abs_diff(base.output->value, r0.output->value) > 1e-9);
    }
    SUBCASE("negative strength is refused") {
        StrengthSpec sneg;
        sneg.s = -1.0;
        CHECK_THROWS_AS(retouch(model, input, sneg), ArgumentError);
    }
    SUBCASE("strength reweights the blend but never the masks themselves") {
        // Level 2 is the coarsest blended level, so its inputs are unaffected
        // by strength; its masks must be bit-identical while its blend moves.
        StrengthSpec s3;
        s3.s = 3.0;
        auto r3 = retouch(model, input, s3);
        CHECK(same_values(base.diagnostics.spatial_masks.at(2)->value,
                          r3.diagnostics.spatial_masks.at(2)->value));
        CHECK(same_values(base.diagnostics.channel_masks.at(2)->value,
                          r3.diagnostics.channel_masks.at(2)->value));
        CHECK(abs_diff(base.diagnostics.blends.at(2)->value,
                       r3.diagnostics.blends.at(2)->value) > 1e-9);
    }
}

TEST_CASE("ablation variants run and produce distinct outputs") {
    Rng rng(6);
    auto input = constant(random_tensor({1, 3, 16, 16}, rng, 0.7));
    std::map<BlendMode, Tensor<double>> outs;
    for (BlendMode mode : {BlendMode::Concat, BlendMode::SpatialOnly, BlendMode::ChannelOnly,
                           BlendMode::SpatialChannel}) {
        auto model = build_model<double>(tiny_model(mode), 11);
        auto r = retouch(model, input);
        CHECK(r.output->value.shape() == input->value.shape());
        if (mode == BlendMode::Concat) {
            CHECK(r.diagnostics.spatial_masks.empty());
            CHECK(r.diagnostics.channel_masks.empty());
        } else if (mode == BlendMode::SpatialOnly) {
            CHECK(r.diagnostics.channel_masks.empty());
            CHECK(!r.diagnostics.spatial_masks.empty());
        } else if (mode == BlendMode::ChannelOnly) {
            CHECK(r.diagnostics.spatial_masks.empty());
            CHECK(!r.diagnostics.channel_masks.empty());
        }
        outs[mode] = r.output->value;
    }
    CHECK(abs_diff(outs[BlendMode::Concat], outs[BlendMode::SpatialChannel]) > 1e-6);
    CHECK(abs_diff(outs[BlendMode::SpatialOnly], outs[BlendMode::ChannelOnly]) > 1e-6);
}

TEST_CASE("skip levels bridge around generator units") {
    ModelConfig cfg = tiny_model();
    cfg.skip_levels = {2};
    auto skipped = build_model<double>(cfg, 13);
    Rng rng(7);
    auto input = constant(random_tensor({1, 3, 16, 16}, rng, 0.7));
    auto r = retouch(skipped, input);
    CHECK(r.output->value.shape() == Shape{1, 3, 16, 16});

    ModelConfig plain = tiny_model();
    auto full = build_model<double>(plain, 13);
    auto rf = retouch(full, input);
    CHECK(abs_diff(r.output->value, rf.output->value) > 1e-6);

    SUBCASE("the constant level cannot be skipped") {
        ModelConfig bad = tiny_model();
        bad.skip_levels = {3};
        CHECK_THROWS_AS(build_model<double>(bad, 1), ConfigError);
    }
}

TEST_CASE("raw forward skips the output clamp") {
    ModelConfig cfg = tiny_model();
    auto model = build_model<double>(cfg, 21);
    Rng rng(8);
    auto input = constant(random_tensor({1, 3, 16, 16}, rng, 0.7));
    auto raw = forward(model, input, {}, true);
    auto clamped = forward(model, input, {}, false);
    for (int64_t k = 0; k < raw.output->value.numel(); ++k) {
        double expect = std::clamp(raw.output->value[k], -1.0, 1.0);
        CHECK(clamped.output->value[k] == doctest::Approx(expect).epsilon(1e-15));
    }
}

TEST_CASE("end-to-end gradients reach the input and every module family") {
    ModelConfig cfg = tiny_model();
    auto model = build_model<double>(cfg, 33);
    Rng rng(9);
    auto input = leaf(random_tensor({1, 3, 16, 16}, rng, 0.5), true);
    auto res = forward(model, input, {}, true);
    auto loss = mean_all(square(res.output));
    backward(loss);
    auto nonzero = [](const Var<double>& v) {
        REQUIRE(v->grad);
        double s = 0;
        for (int64_t k = 0; k < v->grad->value.numel(); ++k) s += std::abs(v->grad->value[k]);
        return s > 0;
    };
    CHECK(nonzero(input));
    CHECK(nonzero(model.params.get("gp.const")));
    CHECK(nonzero(model.params.get("gp.unit1.conv1.weight")));
    CHECK(nonzero(model.params.get("se.unit1.conv1.weight")));
    CHECK(nonzero(model.params.get("leh.fc.weight")));
    CHECK(nonzero(model.params.get("bafs.l1.fuse.weight")));
    CHECK(nonzero(model.params.get("bafs.l2.sp.conv2.weight")));
    CHECK(nonzero(model.params.get("bafs.l2.ch.fc2.weight")));
}
