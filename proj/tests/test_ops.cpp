#include <cmath>
#include <limits>

#include "bitexpand/adam.hpp"
#include "bitexpand/errors.hpp"
#include "bitexpand/ops.hpp"
#include "bitexpand/parallel.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bitexpand;

namespace {

ConvParams identity_kernel(std::size_t c) {
    ConvParams p;
    p.weight = Tensor({c, c, 3, 3});
    for (std::size_t i = 0; i < c; ++i) p.weight.at(i, i, 1, 1) = 1.0f;
    p.bias.assign(c, 0.0f);
    return p;
}

}  // namespace

TEST_CASE("conv2d: identity kernel reproduces the input") {
    Rng rng(1);
    const Tensor x = oracle::random_tensor({1, 1, 4, 4}, rng);
    const Tensor y = conv2d(x, identity_kernel(1));
    CHECK(y.storage() == x.storage());
}

TEST_CASE("conv2d: stride-2 window overlap counts") {
    ConvParams p;
    p.weight = Tensor({1, 1, 3, 3}, 1.0f);
    p.bias = {0.0f};
    p.stride = 2;
    const Tensor y = conv2d(Tensor({1, 1, 4, 4}, 1.0f), p);
    REQUIRE(y.shape() == Shape{1, 1, 2, 2});
    CHECK(y.at(0, 0, 0, 0) == 4.0f);
    CHECK(y.at(0, 0, 0, 1) == 6.0f);
    CHECK(y.at(0, 0, 1, 1) == 9.0f);
}

TEST_CASE("conv2d: output size is ceil(h / stride)") {
    Rng rng(2);
    for (std::size_t h : {5u, 6u, 7u, 8u}) {
        for (int d : {1, 2}) {
            const auto p = oracle::random_conv(2, 1, 3, 2, d, rng);
            const Tensor y = conv2d(Tensor({1, 1, h, h + 1}), p);
            CHECK(y.h() == (h + 1) / 2);
            CHECK(y.w() == (h + 2) / 2);
        }
    }
}

TEST_CASE("conv2d matches the naive loop nest on 100 cases per stride and dilation") {
    Rng rng(3);
    for (int stride : {1, 2}) {
        for (int dilation : {1, 2}) {
            double worst = 0.0;
            for (int trial = 0; trial < 100; ++trial) {
                const std::size_t n = 1 + rng.uniform_int(0, 1), ci = 1 + rng.uniform_int(0, 2),
                                  co = 1 + rng.uniform_int(0, 2);
                const std::size_t h = 5 + rng.uniform_int(0, 4), w = 5 + rng.uniform_int(0, 4);
                const std::size_t k = rng.uniform_int(0, 3) == 0 ? 1 : 3;
                const Tensor x = oracle::random_tensor({n, ci, h, w}, rng);
                const auto p = oracle::random_conv(co, ci, k, stride, dilation, rng);
                std::size_t oh = 0, ow = 0;
                const auto ref = oracle::naive_conv(x, p, oh, ow);
                const Tensor y = conv2d(x, p);
                REQUIRE(y.shape() == Shape{n, co, oh, ow});
                worst = std::max(worst, oracle::max_rel_diff(y.storage(), ref));
            }
            CAPTURE(stride);
            CAPTURE(dilation);
            CHECK(worst < 1e-5);
        }
    }
}

TEST_CASE("conv2d on the 2x3x8x8 example agrees with the naive reference") {
    Rng rng(4);
    const Tensor x = oracle::random_tensor({2, 3, 8, 8}, rng);
    const auto p = oracle::random_conv(4, 3, 3, 1, 1, rng);
    std::size_t oh = 0, ow = 0;
    const auto ref = oracle::naive_conv(x, p, oh, ow);
    CHECK(oracle::max_rel_diff(conv2d(x, p).storage(), ref) < 1e-5);
}

TEST_CASE("conv2d: errors") {
    Rng rng(5);
    const auto p = oracle::random_conv(2, 3, 3, 1, 1, rng);
    CHECK_THROWS_AS(conv2d(Tensor({1, 2, 4, 4}), p), ArgumentError);
    Tensor bad({1, 3, 4, 4});
    bad.at(0, 1, 2, 2) = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(conv2d(bad, p), ComputationError);
    CHECK_THROWS_AS(conv2d_backward(Tensor({1, 3, 4, 4}), p, Tensor({1, 2, 3, 4})), ArgumentError);
}

TEST_CASE("conv2d_backward: bias gradient is the per-channel sum") {
    Rng rng(6);
    const Tensor x = oracle::random_tensor({2, 2, 5, 5}, rng);
    const auto p = oracle::random_conv(3, 2, 3, 1, 2, rng);
    const Tensor g = oracle::random_tensor({2, 3, 5, 5}, rng);
    const auto grads = conv2d_backward(x, p, g);
    for (std::size_t c = 0; c < 3; ++c) {
        double s = 0.0;
        for (std::size_t n = 0; n < 2; ++n)
            for (std::size_t i = 0; i < 25; ++i) s += g.plane(n, c)[i];
        CHECK(grads.grad_bias[c] == doctest::Approx(s).epsilon(1e-6));
    }
}

TEST_CASE("conv2d_backward: identity kernel passes the gradient through") {
    Rng rng(7);
    const Tensor x = oracle::random_tensor({1, 2, 6, 6}, rng);
    const Tensor g = oracle::random_tensor({1, 2, 6, 6}, rng);
    CHECK(conv2d_backward(x, identity_kernel(2), g).grad_x.storage() == g.storage());
}

TEST_CASE("conv2d_backward matches central finite differences") {
    Rng rng(8);
    for (int stride : {1, 2}) {
        for (int dilation : {1, 2}) {
            Tensor x = oracle::random_tensor({1, 2, 6, 6}, rng);
            auto p = oracle::random_conv(3, 2, 3, stride, dilation, rng);
            const Tensor r = oracle::random_tensor(conv2d(x, p).shape(), rng);
            const auto grads = conv2d_backward(x, p, r);
            auto loss = [&] {
                std::size_t oh = 0, ow = 0;
                return oracle::dot(oracle::naive_conv(x, p, oh, ow), r);
            };
            double worst = 0.0;
            for (std::size_t i = 0; i < x.numel(); ++i) {
                worst = std::max(worst, oracle::grad_error(grads.grad_x.data()[i],
                                                           oracle::central_difference(x.data()[i], 1e-3, loss)));
            }
            for (std::size_t i = 0; i < p.weight.numel(); ++i) {
                worst = std::max(worst, oracle::grad_error(grads.grad_weight.data()[i],
                                                           oracle::central_difference(p.weight.data()[i], 1e-3, loss)));
            }
            for (std::size_t i = 0; i < p.bias.size(); ++i) {
                worst = std::max(worst,
                                 oracle::grad_error(grads.grad_bias[i], oracle::central_difference(p.bias[i], 1e-3, loss)));
            }
            CAPTURE(stride);
            CAPTURE(dilation);
            CHECK(worst < 1e-4);
        }
    }
}

TEST_CASE("transposed_conv2d: shape contract and zero input") {
    Rng rng(9);
    ConvParams p;
    p.weight = oracle::random_tensor({4, 2, 3, 3}, rng);
    p.bias = {0.25f, -0.5f};
    p.stride = 2;
    const Tensor y = transposed_conv2d(Tensor({1, 4, 8, 8}), p);
    REQUIRE(y.shape() == Shape{1, 2, 16, 16});
    for (std::size_t i = 0; i < 256; ++i) {
        CHECK(y.plane(0, 0)[i] == 0.25f);
        CHECK(y.plane(0, 1)[i] == -0.5f);
    }
}

TEST_CASE("transposed_conv2d: single pixel with an all-ones kernel") {
    ConvParams p;
    p.weight = Tensor({1, 1, 3, 3}, 1.0f);
    p.bias = {0.0f};
    p.stride = 2;
    const float v = 1.5f;
    const Tensor y = transposed_conv2d(Tensor({1, 1, 1, 1}, v), p);
    REQUIRE(y.shape() == Shape{1, 1, 2, 2});
    const auto ref = oracle::naive_transposed(Tensor({1, 1, 1, 1}, v), p, 2, 2);
    double total = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(y.data()[i] == doctest::Approx(ref[i]));
        total += y.data()[i];
    }
    // five of the nine taps fall outside the 2x2 output
    CHECK(total == doctest::Approx(v * 9 - v * 5));
}

TEST_CASE("transposed_conv2d is the adjoint of the stride-2 conv2d") {
    Rng rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t h = 2 + rng.uniform_int(0, 4), w = 2 + rng.uniform_int(0, 4);
        ConvParams p = oracle::random_conv(3, 2, 3, 2, 1, rng);  // conv: 2 -> 3 channels
        ConvParams pt = p;
        pt.bias.assign(2, 0.0f);
        p.bias.assign(3, 0.0f);
        const Tensor x = oracle::random_tensor({1, 2, 2 * h, 2 * w}, rng);
        const Tensor y = oracle::random_tensor({1, 3, h, w}, rng);
        const double lhs = dot(conv2d(x, p), y);
        const double rhs = dot(x, transposed_conv2d(y, pt));
        CHECK(std::abs(lhs - rhs) <= 1e-5 * std::max(1.0, std::abs(lhs)));
    }
}

TEST_CASE("transposed_conv2d matches the naive transpose on 100 cases") {
    Rng rng(11);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t ci = 1 + rng.uniform_int(0, 2), co = 1 + rng.uniform_int(0, 2);
        const std::size_t h = 1 + rng.uniform_int(0, 5), w = 1 + rng.uniform_int(0, 5);
        ConvParams p;
        p.weight = oracle::random_tensor({ci, co, 3, 3}, rng);
        p.bias.resize(co);
        for (float& b : p.bias) b = static_cast<float>(rng.uniform(-1, 1));
        p.stride = 2;
        const Tensor x = oracle::random_tensor({1 + static_cast<std::size_t>(rng.uniform_int(0, 1)), ci, h, w}, rng);
        const auto ref = oracle::naive_transposed(x, p, 2 * h, 2 * w);
        worst = std::max(worst, oracle::max_rel_diff(transposed_conv2d(x, p).storage(), ref));
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("transposed_conv2d_backward matches central finite differences") {
    Rng rng(12);
    Tensor x = oracle::random_tensor({1, 2, 3, 3}, rng);
    ConvParams p;
    p.weight = oracle::random_tensor({2, 3, 3, 3}, rng);
    p.bias = {0.1f, -0.2f, 0.3f};
    p.stride = 2;
    const Tensor r = oracle::random_tensor({1, 3, 6, 6}, rng);
    const auto grads = transposed_conv2d_backward(x, p, r);
    auto loss = [&] { return oracle::dot(oracle::naive_transposed(x, p, 6, 6), r); };
    double worst = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        worst = std::max(worst, oracle::grad_error(grads.grad_x.data()[i],
                                                   oracle::central_difference(x.data()[i], 1e-3, loss)));
    }
    for (std::size_t i = 0; i < p.weight.numel(); ++i) {
        worst = std::max(worst, oracle::grad_error(grads.grad_weight.data()[i],
                                                   oracle::central_difference(p.weight.data()[i], 1e-3, loss)));
    }
    for (std::size_t i = 0; i < 3; ++i) {
        worst = std::max(worst, oracle::grad_error(grads.grad_bias[i], oracle::central_difference(p.bias[i], 1e-3, loss)));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("leaky_relu values and derivative") {
    const Tensor x({1, 1, 1, 3}, std::vector<float>{-1.0f, 3.5f, -2.0f});
    const Tensor y = leaky_relu(x, 0.2f);
    CHECK(y.data()[0] == doctest::Approx(-0.2));
    CHECK(y.data()[1] == 3.5f);
    const Tensor g = leaky_relu_backward(Tensor({1, 1, 1, 2}, std::vector<float>{-2.0f, 2.0f}), 0.2f,
                                         Tensor({1, 1, 1, 2}, 1.0f));
    CHECK(g.data()[0] == doctest::Approx(0.2));
    CHECK(g.data()[1] == 1.0f);
}

TEST_CASE("leaky_relu_backward matches finite differences away from zero") {
    Rng rng(13);
    Tensor x = oracle::random_tensor({1, 2, 6, 6}, rng);
    for (float& v : x.data()) {
        if (std::abs(v) < 0.01f) v = 0.05f;
    }
    const Tensor r = oracle::random_tensor(x.shape(), rng);
    const Tensor g = leaky_relu_backward(x, 0.2f, r);
    auto loss = [&] { return dot(leaky_relu(x, 0.2f), r); };
    double worst = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        worst = std::max(worst, oracle::grad_error(g.data()[i], oracle::central_difference(x.data()[i], 1e-3, loss)));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("bilinear_upsample: half-pixel convention") {
    const Tensor row({1, 1, 1, 2}, std::vector<float>{0.0f, 2.0f});
    const Tensor up = bilinear_upsample(row, 1, 4);
    CHECK(up.data()[0] == 0.0f);
    CHECK(up.data()[1] == doctest::Approx(0.5));
    CHECK(up.data()[2] == doctest::Approx(1.5));
    CHECK(up.data()[3] == 2.0f);

    const Tensor flat = bilinear_upsample(Tensor({1, 2, 3, 5}, 0.7f), 9, 11);
    for (float v : flat.data()) CHECK(v == doctest::Approx(0.7f));
    CHECK_THROWS_AS(bilinear_upsample(row, 0, 4), ArgumentError);
    CHECK_THROWS_AS(bilinear_upsample(row, 1, 1), ArgumentError);
}

TEST_CASE("bilinear_upsample backward is the exact adjoint") {
    Rng rng(14);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t h = 1 + rng.uniform_int(0, 5), w = 1 + rng.uniform_int(0, 5);
        const std::size_t oh = h * (1 + rng.uniform_int(0, 3)), ow = w + rng.uniform_int(0, 7);
        const Tensor x = oracle::random_tensor({1, 2, h, w}, rng);
        const Tensor y = oracle::random_tensor({1, 2, oh, ow}, rng);
        const double lhs = dot(bilinear_upsample(x, oh, ow), y);
        const double rhs = dot(x, bilinear_upsample_backward(y, h, w));
        CHECK(std::abs(lhs - rhs) <= 1e-5 * std::max(1.0, std::abs(lhs)));
    }
}

TEST_CASE("bilinear_upsample backward matches finite differences") {
    Rng rng(15);
    Tensor x = oracle::random_tensor({1, 2, 3, 3}, rng);
    const Tensor r = oracle::random_tensor({1, 2, 6, 6}, rng);
    const Tensor g = bilinear_upsample_backward(r, 3, 3);
    auto loss = [&] { return oracle::dot(oracle::naive_bilinear(x, 6, 6), r); };
    double worst = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        worst = std::max(worst, oracle::grad_error(g.data()[i], oracle::central_difference(x.data()[i], 1e-3, loss)));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("add and concat_channels") {
    Rng rng(16);
    const Tensor a = oracle::random_tensor({1, 3, 4, 4}, rng);
    const Tensor b = oracle::random_tensor({1, 3, 4, 4}, rng);
    CHECK(add(a, Tensor({1, 3, 4, 4})).storage() == a.storage());
    CHECK(add(a, b).storage() == add(b, a).storage());
    const Tensor one = oracle::random_tensor({1, 1, 4, 4}, rng);
    const Tensor cat = concat_channels(a, one);
    REQUIRE(cat.shape() == Shape{1, 4, 4, 4});
    for (std::size_t c = 0; c < 3; ++c) CHECK(cat.channels(c, 1).storage() == a.channels(c, 1).storage());
    CHECK(cat.channels(3, 1).storage() == one.storage());
    CHECK_THROWS_AS(add(a, one), ArgumentError);
    CHECK_THROWS_AS(concat_channels(a, Tensor({1, 1, 4, 5})), ArgumentError);
}

TEST_CASE("l1_loss definition") {
    Rng rng(17);
    const Tensor a = oracle::random_tensor({2, 3, 4, 4}, rng);
    const auto same = l1_loss(a, a);
    CHECK(same.loss == 0.0);
    for (float g : same.grad.data()) CHECK(g == 0.0f);

    const auto one = l1_loss(Tensor({1, 1, 1, 1}, 1.0f), Tensor({1, 1, 1, 1}, 0.5f));
    CHECK(one.loss == doctest::Approx(0.5));
    CHECK(one.grad.data()[0] == 1.0f);

    // N counts every element of the sample: 1 / (B * c * h * w)
    Tensor pred({1, 3, 2, 2}, 0.0f);
    pred.at(0, 1, 1, 0) = 0.5f;
    const auto r = l1_loss(pred, Tensor({1, 3, 2, 2}, 0.0f));
    CHECK(r.loss == doctest::Approx(0.5 / 12));
    CHECK(r.grad.at(0, 1, 1, 0) == doctest::Approx(1.0 / 12));
    CHECK_THROWS_AS(l1_loss(pred, Tensor({1, 3, 2, 3})), ArgumentError);
}

TEST_CASE("l1_loss gradient matches finite differences away from ties") {
    Rng rng(18);
    Tensor pred = oracle::random_tensor({2, 2, 6, 6}, rng);
    Tensor target = oracle::random_tensor({2, 2, 6, 6}, rng);
    for (std::size_t i = 0; i < pred.numel(); ++i) {
        if (std::abs(pred.data()[i] - target.data()[i]) < 0.01f) pred.data()[i] += 0.05f;
    }
    const auto r = l1_loss(pred, target);
    auto loss = [&] { return l1_loss(pred, target).loss; };
    double worst = 0.0;
    for (std::size_t i = 0; i < pred.numel(); ++i) {
        const double num = oracle::central_difference(pred.data()[i], 1e-3, loss);
        worst = std::max(worst, std::abs(r.grad.data()[i] - num) / std::abs(num));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("adam_step: first step, fixed point and a two-step scalar oracle") {
    const double lr = 1e-3;
    {
        std::vector<float> p(5, 0.5f);
        const std::vector<float> g(5, 1.0f);
        AdamState st;
        std::vector<std::span<float>> ps{p};
        std::vector<std::span<const float>> gs{g};
        adam_step(ps, gs, st, lr);
        CHECK(st.t == 1);
        for (float v : p) CHECK(v == doctest::Approx(0.5 - lr).epsilon(1e-6));
    }
    {
        std::vector<float> p{0.25f, -0.75f};
        const std::vector<float> g(2, 0.0f);
        AdamState st;
        std::vector<std::span<float>> ps{p};
        std::vector<std::span<const float>> gs{g};
        adam_step(ps, gs, st, lr);
        CHECK(p[0] == 0.25f);
        CHECK(p[1] == -0.75f);
    }
    {
        // hand-rolled scalar Adam in double, two steps with constant gradient 0.3
        double theta = 0.1, m = 0.0, v = 0.0;
        const double g = 0.3;
        for (int t = 1; t <= 2; ++t) {
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
            theta -= lr * mh / (std::sqrt(vh) + 1e-8);
        }
        std::vector<float> p{0.1f};
        const std::vector<float> gv{0.3f};
        AdamState st;
        std::vector<std::span<float>> ps{p};
        std::vector<std::span<const float>> gs{gv};
        adam_step(ps, gs, st, lr);
        adam_step(ps, gs, st, lr);
        CHECK(st.t == 2);
        CHECK(std::abs(p[0] - theta) < 1e-7);
    }
    {
        std::vector<float> p(3), g(2);
        AdamState st;
        std::vector<std::span<float>> ps{p};
        std::vector<std::span<const float>> gs{g};
        CHECK_THROWS_AS(adam_step(ps, gs, st, lr), ArgumentError);
        std::vector<float> g3(3);
        std::vector<std::span<const float>> gs3{g3};
        CHECK_THROWS_AS(adam_step(ps, gs3, st, 0.0), ArgumentError);
    }
}

TEST_CASE("ops are deterministic across thread counts") {
    Rng rng(19);
    const Tensor x = oracle::random_tensor({2, 4, 12, 12}, rng);
    const auto p = oracle::random_conv(5, 4, 3, 2, 2, rng);
    const Tensor g = oracle::random_tensor(conv2d(x, p).shape(), rng);
    set_num_threads(1);
    const Tensor y1 = conv2d(x, p);
    const auto b1 = conv2d_backward(x, p, g);
    set_num_threads(3);
    const Tensor y3 = conv2d(x, p);
    const auto b3 = conv2d_backward(x, p, g);
    set_num_threads(1);
    CHECK(y1.storage() == y3.storage());
    CHECK(b1.grad_x.storage() == b3.grad_x.storage());
    CHECK(b1.grad_weight.storage() == b3.grad_weight.storage());
    CHECK(conv2d(x, p).storage() == y1.storage());
}
