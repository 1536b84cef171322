// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstring>

#include "aca/autodiff.hpp"
#include "aca/kernels.hpp"
#include "aca/reference.hpp"
#include "oracles.hpp"

using namespace aca;

namespace {

Tensor run_conv(const Tensor& x, const Tensor& k, ConvParams p) {
    Tape tape;
    return conv2d(tape.constant(x), tape.constant(k), p).value();
}

Tensor run_pool(const Tensor& x, PoolMode m, int window, int stride, int padding) {
    Tape tape;
    return pool2d(tape.constant(x), m, window, stride, padding).value();
}

} // namespace

TEST_CASE("conv2d identity kernel reproduces the input") {
    Tensor x({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    Tensor k({1, 1, 1, 1}, Real(1));
    const Tensor y = run_conv(x, k, {});
    CHECK(y.shape() == x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("conv2d of a constant with an all-ones 3x3 kernel gives 9v inside") {
    const Real v = Real(0.75);
    Tensor x({1, 1, 5, 5}, v);
    Tensor k({1, 1, 3, 3}, Real(1));
    const Tensor y = run_conv(x, k, {1, 1, 1, 1});
    for (int i = 1; i < 4; ++i)
        for (int j = 1; j < 4; ++j) CHECK(y.at(0, 0, i, j) == doctest::Approx(9 * v));
}

TEST_CASE("conv2d matches the direct-loop oracle on random shapes") {
    Rng rng(11);
    {
        const Tensor x = oracle::random_tensor({2, 4, 6, 6}, rng);
        const Tensor k = oracle::random_tensor({4, 4, 3, 3}, rng);
        const Tensor want = oracle::conv2d(x, k, 1, 1, 1, 1);
        CHECK(oracle::max_abs_diff(run_conv(x, k, {1, 1, 1, 1}), want) <= 1e-5 * oracle::max_abs(want));
    }
    struct Case {
        int c, out, k, stride, dilation, groups, size;
    };
    const Case cases[] = {{8, 8, 3, 1, 1, 8, 8}, {8, 8, 5, 1, 2, 8, 8}, {8, 4, 1, 1, 1, 1, 8}, {6, 6, 3, 2, 1, 6, 8},
                          {8, 8, 5, 2, 2, 8, 8}, {4, 8, 3, 1, 1, 2, 7}, {3, 5, 3, 2, 1, 1, 5}, {8, 8, 5, 1, 1, 8, 4}};
    for (const Case& cs : cases) {
        CAPTURE(cs.c);
        CAPTURE(cs.k);
        CAPTURE(cs.stride);
        CAPTURE(cs.dilation);
        CAPTURE(cs.groups);
        const Tensor x = oracle::random_tensor({4, cs.c, cs.size, cs.size}, rng);
        const Tensor k = oracle::random_tensor({cs.out, cs.c / cs.groups, cs.k, cs.k}, rng);
        const int pad = cs.dilation * (cs.k - 1) / 2;
        const Tensor want = oracle::conv2d(x, k, cs.stride, cs.dilation, pad, cs.groups);
        const Tensor got = run_conv(x, k, {cs.stride, cs.dilation, pad, cs.groups});
        REQUIRE(got.shape() == want.shape());
        CHECK(oracle::max_abs_diff(got, want) <= 1e-5 * oracle::max_abs(want));
    }
}

TEST_CASE("conv2d rejects invalid geometry") {
    Tensor x({1, 4, 4, 4});
    CHECK_THROWS_AS(run_conv(x, Tensor({4, 4, 2, 2}), {1, 1, 0, 1}), ConfigError);  // even kernel
    CHECK_THROWS_AS(run_conv(x, Tensor({4, 2, 3, 3}), {1, 1, 1, 3}), ConfigError);  // groups do not divide
    CHECK_THROWS_AS(run_conv(x, Tensor({4, 4, 3, 3}), {1, 1, 0, 1}), ConfigError);  // not "same"
    CHECK_THROWS_AS(run_conv(Tensor({1, 4, 0, 4}), Tensor({4, 4, 1, 1}), {}), ConfigError);
}

TEST_CASE("conv kernels agree with the serial reference for both gradients") {
    Rng rng(5);
    struct Case {
        int c, out, k, stride, dilation, groups, size;
    };
    const Case cases[] = {{8, 8, 3, 1, 1, 8, 8}, {8, 8, 5, 1, 2, 8, 6}, {8, 6, 1, 1, 1, 1, 8},
                          {6, 6, 5, 2, 1, 6, 8}, {4, 8, 3, 2, 1, 1, 8}, {8, 8, 3, 1, 2, 8, 4}};
    for (const Case& cs : cases) {
        const Shape xs{3, cs.c, cs.size, cs.size}, ks{cs.out, cs.c / cs.groups, cs.k, cs.k};
        const auto g = make_conv_geometry(xs, ks, cs.stride, cs.dilation, cs.dilation * (cs.k - 1) / 2, cs.groups);
        const Tensor x = oracle::random_tensor(xs, rng), k = oracle::random_tensor(ks, rng);
        const Tensor gy = oracle::random_tensor({3, cs.out, g.out_height, g.out_width}, rng);
        Tensor gx_fast(xs), gx_ref(xs), gk_fast(ks), gk_ref(ks);
        kernels::conv2d_backward_input(g, gy.ptr(), k.ptr(), gx_fast.ptr());
        reference::conv2d_backward_input(g, gy.ptr(), k.ptr(), gx_ref.ptr());
        kernels::conv2d_backward_kernel(g, gy.ptr(), x.ptr(), gk_fast.ptr());
        reference::conv2d_backward_kernel(g, gy.ptr(), x.ptr(), gk_ref.ptr());
        CHECK(oracle::max_abs_diff(gx_fast, gx_ref) <= 1e-5 * oracle::max_abs(gx_ref));
        CHECK(oracle::max_abs_diff(gk_fast, gk_ref) <= 1e-5 * oracle::max_abs(gk_ref));
    }
}

TEST_CASE("kernels are bit-identical across thread counts") {
    Rng rng(9);
    const Shape xs{8, 16, 16, 16}, ks{16, 1, 5, 5};
    const auto g = make_conv_geometry(xs, ks, 1, 2, 4, 16);
    const Tensor x = oracle::random_tensor(xs, rng), k = oracle::random_tensor(ks, rng);
    const Tensor gy = oracle::random_tensor({8, 16, 16, 16}, rng);
    auto run = [&](int threads) {
        kernels::set_threads(threads);
        Tensor y(gy.shape()), gx(xs), gk(ks);
        kernels::conv2d_forward(g, x.ptr(), k.ptr(), y.ptr());
        kernels::conv2d_backward_input(g, gy.ptr(), k.ptr(), gx.ptr());
        kernels::conv2d_backward_kernel(g, gy.ptr(), x.ptr(), gk.ptr());
        return std::vector<Tensor>{y, gx, gk};
    };
    const int before = kernels::max_threads();
    const auto one = run(1);
    const auto four = run(4);
    kernels::set_threads(before);
    for (std::size_t i = 0; i < one.size(); ++i)
        CHECK(std::memcmp(one[i].ptr(), four[i].ptr(), one[i].size() * sizeof(Real)) == 0);
}

TEST_CASE("pool2d: constant invariance, center maximum, oracle agreement") {
    for (PoolMode m : {PoolMode::max, PoolMode::average}) {
        const Tensor y = run_pool(Tensor({2, 3, 5, 5}, Real(-1.5)), m, 3, 1, 1);
        for (Real v : y.data()) CHECK(v == Real(-1.5));
    }
    Tensor x({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    CHECK(run_pool(x, PoolMode::max, 3, 1, 1).at(0, 0, 1, 1) == Real(9));

    Rng rng(2);
    for (int stride : {1, 2})
        for (int size : {4, 7, 8}) {
            const Tensor r = oracle::random_tensor({4, 8, size, size}, rng);
            for (bool max_mode : {true, false}) {
                const Tensor got = run_pool(r, max_mode ? PoolMode::max : PoolMode::average, 3, stride, 1);
                const Tensor want = oracle::pool2d(r, max_mode, 3, stride, 1);
                if (max_mode) {
                    CHECK(oracle::max_abs_diff(got, want) == 0.0);
                } else {
                    CHECK(oracle::max_abs_diff(got, want) <= 1e-6 * oracle::max_abs(want));
                }
            }
        }
    CHECK_THROWS_AS(run_pool(x, PoolMode::max, 2, 1, 1), ConfigError);
}

TEST_CASE("pool backward matches the reference") {
    Rng rng(4);
    const Shape s{2, 3, 8, 8};
    const auto g = make_pool_geometry(s, 3, 2, 1);
    const Tensor x = oracle::random_tensor(s, rng);
    const Tensor gy = oracle::random_tensor({2, 3, 4, 4}, rng);
    for (PoolMode m : {PoolMode::max, PoolMode::average}) {
        Tensor a(s), b(s);
        kernels::pool2d_backward(g, m, x.ptr(), gy.ptr(), a.ptr());
        reference::pool2d_backward(g, m, x.ptr(), gy.ptr(), b.ptr());
        CHECK(oracle::max_abs_diff(a, b) <= 1e-6);
    }
}

TEST_CASE("normalize: standardized input passes through, statistics of random input") {
    Rng rng(3);
    Tensor x({4, 2, 3, 3});
    for (int c = 0; c < 2; ++c) {
        std::vector<double> vals;
        for (int i = 0; i < 36; ++i) vals.push_back(rng.normal());
        double m = 0, v = 0;
        for (double d : vals) m += d;
        m /= 36;
        for (double d : vals) v += (d - m) * (d - m);
        v /= 36;
        int i = 0;
        for (int n = 0; n < 4; ++n)
            for (int h = 0; h < 3; ++h)
                for (int w = 0; w < 3; ++w) x.at(n, c, h, w) = static_cast<Real>((vals[i++] - m) / std::sqrt(v));
    }
    Tape tape;
    const Tensor y = normalize(tape.constant(x), {}).value();
    CHECK(oracle::max_abs_diff(y, x) < 1e-3);

    const Tensor r = oracle::random_tensor({4, 3, 5, 5}, rng, 3.0);
    const Tensor z = normalize(tape.constant(r), {}).value();
    double mean[3], var[3];
    kernels::channel_moments(z.shape(), z.ptr(), mean, var);
    for (int c = 0; c < 3; ++c) {
        CHECK(std::abs(mean[c]) < 1e-5);
        CHECK(std::abs(var[c] - 1.0) < 1e-3);
    }

    Var scale = tape.constant(Tensor({1, 3, 1, 1}, Real(0)));
    Var shift = tape.constant(Tensor({1, 3, 1, 1}, {Real(0.5), Real(-1), Real(2)}));
    NormOptions opt;
    opt.scale = &scale;
    opt.shift = &shift;
    const Tensor s = normalize(tape.constant(r), opt).value();
    for (int n = 0; n < 4; ++n)
        for (int c = 0; c < 3; ++c) CHECK(s.at(n, c, 2, 2) == shift.value()[static_cast<std::size_t>(c)]);

    const Tensor flat = normalize(tape.constant(Tensor({2, 1, 2, 2}, Real(4))), {}).value();
    CHECK(flat.all_finite());
}

TEST_CASE("softmax: symmetry, shift invariance, oracle, normalization") {
    const std::vector<Real> zeros(4, Real(0));
    for (Real p : softmax(zeros)) CHECK(p == doctest::Approx(0.25));

    const std::vector<Real> a{Real(0.5), Real(1.25), Real(-2)}, b{Real(3.5), Real(4.25), Real(1)};
    CHECK(softmax(a) == softmax(b));

    const auto p = softmax(std::vector<Real>{1, 2, 3});
    const auto q = oracle::softmax({1, 2, 3});
    for (int i = 0; i < 3; ++i) CHECK(std::abs(p[i] - q[i]) < 1e-7);

    Rng rng(8);
    for (int t = 0; t < 1000; ++t) {
        std::vector<Real> z(1 + rng.below(10));
        for (auto& v : z) v = static_cast<Real>(rng.uniform(-30, 30));
        double s = 0;
        for (Real v : softmax(z)) {
            CHECK(v > 0);
            CHECK(v <= 1);
            s += v;
        }
        CHECK(std::abs(s - 1.0) < 1e-6);
    }
    CHECK_THROWS_AS(softmax(std::vector<Real>{}), ConfigError);
}

TEST_CASE("backward: sum, bilinear, shared branches, usage errors") {
    Rng rng(1);
    Tape tape;
    Var x = tape.leaf(oracle::random_tensor({2, 3, 2, 2}, rng));
    Var y = tape.leaf(oracle::random_tensor({2, 3, 2, 2}, rng));
    {
        const Gradients g = tape.backward(sum(x));
        for (Real v : g.of(x).data()) CHECK(v == 1);
    }
    {
        const Gradients g = tape.backward(sum(mul(x, y)));
        CHECK(oracle::max_abs_diff(g.of(x), y.value()) == 0);
        CHECK(oracle::max_abs_diff(g.of(y), x.value()) == 0);
    }
    {
        // x feeds two branches; the gradient is the sum of the branch gradients.
        const Gradients both = tape.backward(sum(add(relu(x), mul(x, y))));
        const Gradients b1 = tape.backward(sum(relu(x)));
        const Gradients b2 = tape.backward(sum(mul(x, y)));
        for (std::size_t i = 0; i < x.value().size(); ++i)
            CHECK(both.of(x)[i] == doctest::Approx(b1.of(x)[i] + b2.of(x)[i]));
    }
    Tape other;
    Var z = other.leaf(Tensor::scalar(1));
    CHECK_THROWS_AS(tape.backward(z), UsageError);
    CHECK_THROWS_AS(tape.backward(x), UsageError);
}

TEST_CASE("concat_channels: single part, order, slice round trip") {
    Rng rng(6);
    Tape tape;
    Var a = tape.leaf(oracle::random_tensor({2, 3, 4, 4}, rng));
    Var b = tape.leaf(oracle::random_tensor({2, 5, 4, 4}, rng));
    {
        const Var one[] = {a};
        CHECK(oracle::max_abs_diff(concat_channels(one).value(), a.value()) == 0);
    }
    const Var parts[] = {a, b};
    Var c = concat_channels(parts);
    CHECK(c.shape().c == 8);
    CHECK(oracle::max_abs_diff(slice_channels(c, 0, 3).value(), a.value()) == 0);
    CHECK(oracle::max_abs_diff(slice_channels(c, 3, 8).value(), b.value()) == 0);
    const Gradients g = tape.backward(sum(mul(slice_channels(c, 3, 8), b)));
    CHECK(oracle::max_abs(g.of(a)) == 0);
    CHECK(oracle::max_abs_diff(g.of(b), scale(b, 2).value()) == 0);
    Var bad = tape.leaf(Tensor({2, 1, 3, 4}));
    const Var mismatched[] = {a, bad};
    CHECK_THROWS_AS(concat_channels(mismatched), ConfigError);
}

TEST_CASE("shape mismatches are errors, not broadcasts") {
    Tape tape;
    Var a = tape.leaf(Tensor({1, 2, 2, 2}));
    Var b = tape.leaf(Tensor({1, 2, 2, 1}));
    CHECK_THROWS_AS(add(a, b), ConfigError);
    CHECK_THROWS_AS(mul(a, b), ConfigError);
}

TEST_CASE("linear and cross-entropy plumbing") {
    Tape tape;
    Var x = tape.leaf(Tensor({2, 3, 1, 1}, {1, 2, 3, -1, 0, 1}));
    Var w = tape.leaf(Tensor({2, 3, 1, 1}, {1, 0, 0, 0, 1, 1}));
    Var b = tape.leaf(Tensor({1, 2, 1, 1}, {Real(0.5), Real(-0.5)}));
    const Tensor y = linear(x, w, b).value();
    CHECK(y.at(0, 0, 0, 0) == doctest::Approx(1.5));
    CHECK(y.at(0, 1, 0, 0) == doctest::Approx(4.5));
    CHECK(y.at(1, 0, 0, 0) == doctest::Approx(-0.5));
    CHECK(y.at(1, 1, 0, 0) == doctest::Approx(0.5));
    const std::vector<int> labels{1, 0};
    const double l0 = -std::log(oracle::softmax({1.5, 4.5})[1]);
    const double l1 = -std::log(oracle::softmax({-0.5, 0.5})[0]);
    CHECK(cross_entropy(linear(x, w, b), labels).value()[0] == doctest::Approx((l0 + l1) / 2).epsilon(1e-6));
    Var gap = global_avg_pool(tape.leaf(Tensor({1, 2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8})));
    CHECK(gap.value()[0] == doctest::Approx(2.5));
    CHECK(gap.value()[1] == doctest::Approx(6.5));
}
