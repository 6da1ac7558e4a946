#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gradcheck.hpp"
#include "rt/train.hpp"

using namespace rt;
using namespace rt::ag;
using rt::testing::random_tensor;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_model() {
    ModelConfig m;
    m.gp.levels = 3;
    m.gp.latent_dim = 4;
    m.gp.channel_base = 2;
    m.gp.channel_max = 4;
    return m;
}

train::TrainConfig tiny_train(uint64_t seed = 0) {
    train::TrainConfig t;
    t.steps = 4;
    t.batch = 2;
    t.seed = seed;
    return t;
}

fs::path tiny_dataset() {
    static fs::path dir;
    if (dir.empty()) {
        dir = fs::temp_directory_path() / "rt_train_tests" / "ds16";
        fs::remove_all(dir);
        fs::create_directories(dir);
        data::BlemishSpec spec;
        spec.spot_radius_min = 0.08;
        spec.spot_radius_max = 0.15;
        data::dataset_build(8, spec, 21, dir.string(), 16, 0.75);
    }
    return dir;
}

}  // namespace

TEST_CASE("l1 loss matches a brute-force oracle") {
    Rng rng(1);
    auto a = constant(random_tensor({2, 3, 5, 5}, rng));
    auto b = constant(random_tensor({2, 3, 5, 5}, rng));
    SUBCASE("identical tensors give zero") {
        CHECK(train::loss_l1(a, a)->value[0] == 0.0);
    }
    SUBCASE("constant offset gives the offset") {
        auto shifted = offset(a, 0.5);
        CHECK(train::loss_l1(shifted, a)->value[0] == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("random pair equals the elementwise mean of absolute differences") {
        double acc = 0;
        for (int64_t i = 0; i < a->value.numel(); ++i)
            acc += std::abs(a->value[i] - b->value[i]);
        acc /= static_cast<double>(a->value.numel());
        CHECK(train::loss_l1(a, b)->value[0] == doctest::Approx(acc).epsilon(1e-12));
    }
    SUBCASE("shape mismatch is refused") {
        auto c = constant(random_tensor({1, 3, 5, 5}, rng));
        CHECK_THROWS_AS(train::loss_l1(a, c), ContractError);
    }
}

TEST_CASE("perceptual loss: zero at identity, deterministic, quadratic") {
    Rng rng(2);
    auto x = constant(random_tensor({1, 3, 16, 16}, rng, 0.5));
    auto y = constant(random_tensor({1, 3, 16, 16}, rng, 0.5));
    train::FixedPyramidExtractor<double> pyr(77);
    train::Extractor<double> ex = [&](const Var<double>& v) { return pyr(v); };

    SUBCASE("identical images give exactly zero") {
        CHECK(train::loss_perceptual(x, x, ex)->value[0] == 0.0);
    }
    SUBCASE("nonnegative and reproducible bit-exactly across extractor instances") {
        double v1 = train::loss_perceptual(x, y, ex)->value[0];
        CHECK(v1 > 0.0);
        train::FixedPyramidExtractor<double> pyr2(77);
        train::Extractor<double> ex2 = [&](const Var<double>& v) { return pyr2(v); };
        CHECK(train::loss_perceptual(x, y, ex2)->value[0] == v1);
        train::FixedPyramidExtractor<double> pyr3(78);
        train::Extractor<double> ex3 = [&](const Var<double>& v) { return pyr3(v); };
        CHECK(train::loss_perceptual(x, y, ex3)->value[0] != v1);
    }
    SUBCASE("doubling the difference with a linear extractor scales the loss 4x") {
        train::Extractor<double> identity = [](const Var<double>& v) {
            return std::vector<Var<double>>{v};
        };
        auto diff = sub(y, x);
        auto y2 = add(x, scale(diff, 2.0));
        double l1x = train::loss_perceptual(x, y, identity)->value[0];
        double l2x = train::loss_perceptual(x, y2, identity)->value[0];
        CHECK(l2x == doctest::Approx(4.0 * l1x).epsilon(1e-10));
    }
    SUBCASE("extractor failures carry context") {
        train::Extractor<double> broken = [](const Var<double>&) -> std::vector<Var<double>> {
            throw std::runtime_error("backend exploded");
        };
        try {
            train::loss_perceptual(x, y, broken);
            FAIL("expected ContractError");
        } catch (const ContractError& e) {
            CHECK(std::string(e.what()).find("backend exploded") != std::string::npos);
        }
    }
}

TEST_CASE("adversarial losses take the non-saturating logistic form") {
    auto logits = [](std::vector<double> v) {
        Tensor<double> t({static_cast<int>(v.size()), 1});
        for (size_t i = 0; i < v.size(); ++i) t[static_cast<int64_t>(i)] = v[i];
        return constant(t);
    };
    SUBCASE("fake logit zero gives ln 2 for the generator") {
        CHECK(train::loss_adversarial_g(logits({0.0}))->value[0] ==
              doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
    SUBCASE("a confident discriminator drives its loss to zero") {
        double v = train::loss_adversarial_d(logits({40.0, 40.0}), logits({-40.0, -40.0}))->value[0];
        CHECK(v >= 0.0);
        CHECK(v < 1e-10);
    }
    SUBCASE("losses are nonnegative on random logits") {
        Rng rng(3);
        for (int i = 0; i < 10; ++i) {
            auto lr = logits({rng.normal(), rng.normal()});
            auto lf = logits({rng.normal(), rng.normal()});
            CHECK(train::loss_adversarial_d(lr, lf)->value[0] >= 0.0);
            CHECK(train::loss_adversarial_g(lf)->value[0] >= 0.0);
        }
    }
}

TEST_CASE("r1 penalty: zero for constant discriminators, exact for linear ones") {
    Rng rng(4);
    Tensor<double> batch = random_tensor({2, 3, 4, 4}, rng);
    SUBCASE("constant discriminator has zero penalty") {
        auto c = train::r1_penalty<double>(
            [](const Var<double>& x) {
                return constant(Tensor<double>::full({x->value.dim(0), 1}, 3.0));
            },
            batch);
        CHECK(c->value[0] == 0.0);
    }
    SUBCASE("linear discriminator sum(k*x) has penalty 0.5 * n * k^2") {
        double k = 0.75;
        auto pen = train::r1_penalty<double>(
            [&](const Var<double>& x) {
                auto s = sum_axes(scale(x, k), {1, 2, 3}, false);
                return reshape(s, {x->value.dim(0), 1});
            },
            batch);
        double per_sample = 3 * 4 * 4 * k * k;
        CHECK(pen->value[0] == doctest::Approx(0.5 * 2 * per_sample / 2).epsilon(1e-12));
    }
    SUBCASE("penalty is differentiable w.r.t. discriminator parameters") {
        ModelConfig mc = tiny_model();
        ParamStore<double> disc;
        build_params(disc, specs::discriminator_specs(mc.gp), 5);
        Tensor<double> imgs = random_tensor({1, 3, 16, 16}, rng, 0.5);
        auto f = [&] {
            return train::r1_penalty<double>(
                [&](const Var<double>& x) { return train::disc_forward(mc.gp, disc, x); }, imgs);
        };
        auto res = rt::testing::gradcheck(
            f, {disc.get("disc.head.fc.weight"), disc.get("disc.fromrgb.weight")}, 1e-5, 12);
        INFO("worst rel err ", res.worst);
        CHECK(res.ok());
    }
}

TEST_CASE("discriminator maps model-resolution batches to one logit each") {
    ModelConfig mc = tiny_model();
    ParamStore<float> disc;
    build_params(disc, specs::discriminator_specs(mc.gp), 6);
    Rng rng(7);
    auto imgs = constant(random_tensor({3, 3, 16, 16}, rng, 0.5).cast<float>());
    auto logits = train::disc_forward(mc.gp, disc, imgs);
    CHECK(logits->value.shape() == Shape{3, 1});
    auto bad = constant(random_tensor({1, 3, 8, 8}, rng).cast<float>());
    CHECK_THROWS_AS(train::disc_forward(mc.gp, disc, bad), ContractError);
}

TEST_CASE("generator loss is exactly the weighted sum of its parts") {
    auto cfg = tiny_train(3);
    cfg.lr_d = 0.0;  // keep the discriminator frozen so the parts precomputed
                     // below match what train_step sees for its generator pass
    auto tr = train::make_trainer<double>(tiny_model(), cfg);
    Rng rng(8);
    Tensor<double> raw = random_tensor({2, 3, 16, 16}, rng, 0.5);
    Tensor<double> clean = random_tensor({2, 3, 16, 16}, rng, 0.5);

    auto out = forward(tr.model, constant(raw), {}, true).output;
    auto target = constant(clean);
    train::Extractor<double> ex = [&](const Var<double>& v) { return tr.perceptual(v); };
    double l1 = train::loss_l1(out, target)->value[0];
    double perc = train::loss_perceptual(out, target, ex)->value[0];
    double advg =
        train::loss_adversarial_g(train::disc_forward(tr.model.cfg.gp, tr.disc, out))->value[0];

    auto m = train::train_step(tr, raw, clean);
    CHECK(m.l1 == doctest::Approx(l1).epsilon(1e-12));
    CHECK(m.total ==
          doctest::Approx(1.0 * l1 + 0.8 * perc + 0.05 * advg).epsilon(1e-9));
    CHECK(std::isfinite(m.adv_d));
    CHECK(std::isfinite(m.r1));
}

TEST_CASE("zero learning rates leave every parameter bit-identical") {
    auto cfg = tiny_train(4);
    cfg.lr_g = 0.0;
    cfg.lr_d = 0.0;
    auto tr = train::make_trainer<float>(tiny_model(), cfg);
    auto before_g = ckpt::params_to_tensors(tr.model.params);
    auto before_d = ckpt::params_to_tensors(tr.disc);
    Rng rng(9);
    Tensor<float> raw = random_tensor({2, 3, 16, 16}, rng, 0.5).cast<float>();
    Tensor<float> clean = random_tensor({2, 3, 16, 16}, rng, 0.5).cast<float>();
    train::train_step(tr, raw, clean);
    for (auto& [n, t] : ckpt::params_to_tensors(tr.model.params))
        for (int64_t i = 0; i < t.numel(); ++i) REQUIRE(t[i] == before_g.at(n)[i]);
    for (auto& [n, t] : ckpt::params_to_tensors(tr.disc))
        for (int64_t i = 0; i < t.numel(); ++i) REQUIRE(t[i] == before_d.at(n)[i]);
}

TEST_CASE("fixed seeds reproduce the metric trace; training moves the losses") {
    auto dir = tiny_dataset();
    auto run = [&](int steps) {
        auto tr = train::make_trainer<float>(tiny_model(), tiny_train(5));
        auto entries = data::dataset_iterate(dir.string(), "train", 5);
        std::vector<train::StepMetrics> trace;
        size_t cursor = 0;
        Tensor<float> raw, clean;
        for (int s = 0; s < steps; ++s) {
            train::next_batch(tr, dir.string(), entries, cursor, raw, clean);
            trace.push_back(train::train_step(tr, raw, clean));
        }
        return trace;
    };
    auto a = run(3);
    auto b = run(3);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].l1 == b[i].l1);
        CHECK(a[i].perc == b[i].perc);
        CHECK(a[i].adv_g == b[i].adv_g);
        CHECK(a[i].adv_d == b[i].adv_d);
        CHECK(a[i].r1 == b[i].r1);
    }
    for (auto& m : a) {
        CHECK(std::isfinite(m.total));
        CHECK(m.l1 >= 0.0);
        CHECK(m.perc >= 0.0);
    }
}

TEST_CASE("trainer checkpoints round-trip and resume exactly") {
    auto dir = tiny_dataset();
    auto mk = [&] { return train::make_trainer<float>(tiny_model(), tiny_train(6)); };
    auto entries = data::dataset_iterate(dir.string(), "train", 6);
    auto step_once = [&](train::Trainer<float>& tr) {
        size_t cursor = static_cast<size_t>(tr.step) * static_cast<size_t>(tr.cfg.batch);
        Tensor<float> raw, clean;
        train::next_batch(tr, dir.string(), entries, cursor, raw, clean);
        return train::train_step(tr, raw, clean);
    };

    SUBCASE("save -> load -> save is byte-identical") {
        auto tr = mk();
        step_once(tr);
        auto p1 = (fs::temp_directory_path() / "rt_train_tests" / "tr1.ckpt").string();
        auto p2 = (fs::temp_directory_path() / "rt_train_tests" / "tr2.ckpt").string();
        train::save_trainer(p1, tr);
        auto tr2 = train::load_trainer<float>(p1);
        train::save_trainer(p2, tr2);
        std::ifstream a(p1, std::ios::binary), b(p2, std::ios::binary);
        std::stringstream sa, sb;
        sa << a.rdbuf();
        sb << b.rdbuf();
        CHECK(sa.str() == sb.str());
        CHECK(sa.str().size() > 0);
    }
    SUBCASE("a resumed run matches the uninterrupted metric trace") {
        auto full = mk();
        std::vector<train::StepMetrics> expect;
        for (int s = 0; s < 10; ++s) expect.push_back(step_once(full));

        auto half = mk();
        for (int s = 0; s < 5; ++s) step_once(half);
        auto p = (fs::temp_directory_path() / "rt_train_tests" / "resume.ckpt").string();
        train::save_trainer(p, half);
        auto resumed = train::load_trainer<float>(p);
        for (int s = 5; s < 10; ++s) {
            auto m = step_once(resumed);
            CHECK(m.l1 == doctest::Approx(expect[static_cast<size_t>(s)].l1).epsilon(1e-6));
            CHECK(m.total == doctest::Approx(expect[static_cast<size_t>(s)].total).epsilon(1e-6));
            CHECK(m.adv_d == doctest::Approx(expect[static_cast<size_t>(s)].adv_d).epsilon(1e-6));
        }
    }
    SUBCASE("loading values into a mismatched architecture is refused") {
        auto tr = mk();
        auto p = (fs::temp_directory_path() / "rt_train_tests" / "shape.ckpt").string();
        train::save_trainer(p, tr);
        auto a = ckpt::load_archive<float>(p);
        ModelConfig other = tiny_model();
        other.gp.channel_max = 8;  // wider network, different shapes
        auto wrong = build_model<float>(other, 1);
        CHECK_THROWS_AS(ckpt::tensors_into_params(wrong.params, a.tensors), ContractError);
    }
    SUBCASE("non-trainer archives are refused") {
        ckpt::Archive<float> a;
        a.tensors.emplace("x", Tensor<float>::zeros({1}));
        auto p = (fs::temp_directory_path() / "rt_train_tests" / "nottrainer.ckpt").string();
        ckpt::save_archive(p, a);
        CHECK_THROWS_AS(train::load_trainer<float>(p), ContractError);
    }
}
