#include <doctest.h>

#include "gradcheck.hpp"
#include "rt/ops.hpp"

using namespace rt;
using namespace rt::ag;
using rt::testing::gradcheck;
using rt::testing::random_tensor;

TEST_CASE("elementwise ops pass finite-difference checks") {
    Rng rng(1);
    auto a = leaf(random_tensor({2, 3, 4, 4}, rng), true);
    auto b = leaf(random_tensor({2, 3, 4, 4}, rng), true);
    for (int64_t i = 0; i < b->value.numel(); ++i) b->value[i] = 1.5 + 0.2 * rng.normal();

    auto f = [&] {
        auto t = add(mul(a, b), divide(a, b));
        t = add(t, leaky_relu(sub(a, b), 0.2));
        t = add(t, sigmoid(a));
        t = add(t, softplus(b));
        t = add(t, exp_(scale(a, 0.3)));
        t = add(t, sqrt_(add(square(a), offset(square(b), 0.1))));
        return mean_all(t);
    };
    auto res = gradcheck(f, {a, b});
    INFO("worst rel err ", res.worst);
    CHECK(res.ok());
}

TEST_CASE("broadcast ops reduce gradients correctly") {
    Rng rng(2);
    auto x = leaf(random_tensor({2, 3, 4, 4}, rng), true);
    auto cmask = leaf(random_tensor({2, 3, 1, 1}, rng), true);
    auto smask = leaf(random_tensor({2, 1, 4, 4}, rng), true);
    auto bias = leaf(random_tensor({1, 3, 1, 1}, rng), true);
    auto f = [&] { return mean_all(add(mul(mul(x, cmask), smask), bias)); };
    auto res = gradcheck(f, {x, cmask, smask, bias});
    CHECK(res.ok());
}

TEST_CASE("matmul, slice, concat, reshape gradients") {
    Rng rng(3);
    auto a = leaf(random_tensor({3, 5}, rng), true);
    auto b = leaf(random_tensor({5, 4}, rng), true);
    auto c = leaf(random_tensor({3, 4}, rng), true);
    auto f = [&] {
        auto m = matmul(a, b);
        auto cc = concat(m, c, 1);
        auto s = slice(cc, 1, 2, 4);
        return mean_all(square(reshape(s, {12, 1})));
    };
    auto res = gradcheck(f, {a, b, c});
    CHECK(res.ok());
}

TEST_CASE("conv2d primitive trio gradients") {
    Rng rng(4);
    auto x = leaf(random_tensor({2, 3, 6, 6}, rng), true);
    auto w = leaf(random_tensor({4, 3, 3, 3}, rng, 0.5), true);
    SUBCASE("stride 1") {
        auto f = [&] { return mean_all(square(conv2d(x, w, 1, 1))); };
        CHECK(gradcheck(f, {x, w}).ok());
    }
    SUBCASE("stride 2") {
        auto f = [&] { return mean_all(square(conv2d(x, w, 2, 1))); };
        CHECK(gradcheck(f, {x, w}).ok());
    }
    SUBCASE("input-grad op is differentiable") {
        auto gy = leaf(random_tensor({2, 4, 6, 6}, rng), true);
        auto f = [&] {
            return mean_all(square(conv2d_input_grad(w, gy, {2, 3, 6, 6}, 1, 1)));
        };
        CHECK(gradcheck(f, {w, gy}).ok());
    }
    SUBCASE("weight-grad op is differentiable") {
        auto gy = leaf(random_tensor({2, 4, 6, 6}, rng), true);
        auto f = [&] {
            return mean_all(square(conv2d_weight_grad(x, gy, {4, 3, 3, 3}, 1, 1)));
        };
        CHECK(gradcheck(f, {x, gy}).ok());
    }
}

TEST_CASE("upsample and sum-pool are adjoint and differentiable") {
    Rng rng(5);
    auto x = leaf(random_tensor({1, 2, 4, 4}, rng), true);
    auto f = [&] { return mean_all(square(upsample2x(x))); };
    CHECK(gradcheck(f, {x}).ok());
    auto y = leaf(random_tensor({1, 2, 4, 4}, rng), true);
    auto g = [&] { return mean_all(square(downsample_sum2x(y))); };
    CHECK(gradcheck(g, {y}).ok());
}

TEST_CASE("second-order gradients through a gradient-norm penalty") {
    // d/dw of ||d f/d x||^2 must match finite differences over w.
    Rng rng(6);
    auto x = leaf(random_tensor({2, 2, 4, 4}, rng), true);
    auto w = leaf(random_tensor({3, 2, 3, 3}, rng, 0.5), true);
    auto f = [&] {
        auto y = sum_all(square(conv2d(x, w, 1, 1)));
        auto gx = grad_of(y, {x}, true)[0];
        return mean_all(square(gx));
    };
    auto res = gradcheck(f, {w}, 1e-5, 32);
    INFO("worst rel err ", res.worst);
    CHECK(res.ok());
}

TEST_CASE("two-way softmax masks are complementary") {
    Rng rng(7);
    auto a = constant(random_tensor({2, 5, 1, 1}, rng));
    auto b = constant(random_tensor({2, 5, 1, 1}, rng));
    auto m = two_way_softmax(a, b);
    auto mc = one_minus(m);
    for (int64_t i = 0; i < m->value.numel(); ++i) {
        CHECK(m->value[i] > 0.0);
        CHECK(m->value[i] < 1.0);
        CHECK(m->value[i] + mc->value[i] == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("detach cuts the graph") {
    auto a = leaf(Tensor<double>::scalar(2.0), true);
    auto y = mul(detach(a), a);  // d/da = detached value = 2
    auto g = grad_of(y, {a}, false)[0];
    CHECK(g->value[0] == doctest::Approx(2.0));
}

TEST_CASE("grad slots are cleared between passes") {
    auto a = leaf(Tensor<double>::scalar(3.0), true);
    auto y1 = square(a);
    auto g1 = grad_of(y1, {a}, false)[0];
    CHECK(g1->value[0] == doctest::Approx(6.0));
    auto y2 = square(a);
    auto g2 = grad_of(y2, {a}, false)[0];
    CHECK(g2->value[0] == doctest::Approx(6.0));  // not accumulated twice
}
