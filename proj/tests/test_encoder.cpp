#include <doctest.h>

#include "gradcheck.hpp"
#include "rt/encoder.hpp"
#include "rt/gp.hpp"

using namespace rt;
using namespace rt::ag;
using rt::testing::gradcheck;
using rt::testing::random_tensor;

namespace {

EncoderConfig tiny_enc() {
    GPConfig g;
    g.levels = 3;
    g.latent_dim = 4;
    g.channel_base = 2;
    g.channel_max = 4;
    return EncoderConfig{g};
}

}  // namespace

TEST_CASE("shape pyramid contract holds for every level count in [4,9]") {
    for (int L = 4; L <= 9; ++L) {
        GPConfig g;
        g.levels = L;
        EncoderConfig ec{g};
        CHECK(ec.input_resolution() == (1 << (L + 1)));
        CHECK(ec.intermediate_resolution(1) == (1 << (L + 1)));
        CHECK(ec.intermediate_resolution(L) == 4);
        for (int i = 1; i <= L; ++i)
            CHECK(ec.intermediate_resolution(i) == (1 << (L + 2 - i)));
        // F^i_S sits at half I^i's resolution and matches GP level i+1 channels.
        for (int i = 1; i <= L - 1; ++i) {
            CHECK(ec.semantic_resolution(i) == (1 << (L + 1 - i)));
            CHECK(ec.semantic_channels(i) == g.channels(i + 1));
        }
    }
}

TEST_CASE("se_forward emits L intermediates and L-1 semantic maps") {
    auto ec = tiny_enc();  // L=3, input 16
    ParamStore<double> ps;
    build_params(ps, specs::encoder_specs(ec), 11);
    Rng rng(1);
    auto img = constant(random_tensor({2, 3, 16, 16}, rng, 0.5));
    auto st = se::se_forward(ec, ps, img);
    REQUIRE(st.intermediates.size() == 3);
    REQUIRE(st.semantic.size() == 2);
    for (int i = 1; i <= 3; ++i) {
        int r = ec.intermediate_resolution(i);
        CHECK(st.intermediates[i - 1]->value.shape() ==
              Shape{2, ec.intermediate_channels(i), r, r});
    }
    for (int i = 1; i <= 2; ++i) {
        int r = ec.semantic_resolution(i);
        CHECK(st.semantic[i - 1]->value.shape() == Shape{2, ec.semantic_channels(i), r, r});
    }
    SUBCASE("deterministic") {
        auto st2 = se::se_forward(ec, ps, img);
        for (size_t i = 0; i < st.semantic.size(); ++i)
            for (int64_t k = 0; k < st.semantic[i]->value.numel(); ++k)
                REQUIRE(st.semantic[i]->value[k] == st2.semantic[i]->value[k]);
    }
    SUBCASE("wrong input resolution names the expected size") {
        auto bad = constant(random_tensor({1, 3, 8, 8}, rng));
        try {
            se::se_forward(ec, ps, bad);
            FAIL("expected ContractError");
        } catch (const ContractError& e) {
            CHECK(std::string(e.what()).find("16") != std::string::npos);
        }
    }
}

TEST_CASE("leh_forward emits the 2L x d latent code") {
    auto ec = tiny_enc();
    ParamStore<double> ps;
    build_params(ps, specs::encoder_specs(ec), 12);
    Rng rng(2);
    int ctop = ec.intermediate_channels(3);
    auto top = constant(random_tensor({2, ctop, 4, 4}, rng));
    auto code = se::leh_forward(ec, ps, top);
    CHECK(code->value.shape() == Shape{2, 6, 4});  // S = 2L = 6, d = 4
    for (int64_t k = 0; k < code->value.numel(); ++k) CHECK(std::isfinite(code->value[k]));

    SUBCASE("non-4x4 input is a contract violation") {
        auto bad = constant(random_tensor({1, ctop, 8, 8}, rng));
        CHECK_THROWS_AS(se::leh_forward(ec, ps, bad), ContractError);
    }
    SUBCASE("zero features with zero parameters give the zero code") {
        ParamStore<double> zeroed;
        for (const auto& sp : specs::encoder_specs(ec))
            zeroed.add(sp.name, Tensor<double>::zeros(sp.shape));
        auto z = constant(Tensor<double>::zeros({1, ctop, 4, 4}));
        auto c = se::leh_forward(ec, zeroed, z);
        for (int64_t k = 0; k < c->value.numel(); ++k) CHECK(c->value[k] == 0.0);
    }
}

TEST_CASE("encoder unit gradients match finite differences") {
    auto ec = tiny_enc();
    ParamStore<double> ps;
    build_params(ps, specs::encoder_specs(ec), 13);
    Rng rng(3);
    auto img = leaf(random_tensor({1, 3, 16, 16}, rng, 0.5), true);
    auto f = [&] {
        auto st = se::se_forward(ec, ps, img);
        auto code = se::leh_forward(ec, ps, st.intermediates.back());
        auto loss = mean_all(square(code));
        for (auto& s : st.semantic) loss = add(loss, mean_all(square(s)));
        return loss;
    };
    std::vector<Var<double>> leaves = {img, ps.get("se.unit2.conv1.weight"),
                                       ps.get("se.fs1.weight"), ps.get("leh.fc.weight"),
                                       ps.get("leh.conv.weight")};
    auto res = gradcheck(f, leaves, 1e-5, 24);
    INFO("worst rel err ", res.worst);
    CHECK(res.ok());
}
