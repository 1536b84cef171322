// SPDX-License-Identifier: Apache-2.0
// OpenMP kernels against the serial reference on super-net sized layers.
#include <benchmark/benchmark.h>

#include "aca/kernels.hpp"
#include "aca/reference.hpp"
#include "aca/rng.hpp"

namespace {

using namespace aca;

struct ConvCase {
    ConvGeometry g;
    Tensor x, k, y;
};

// range(0): channels, range(1): kernel, range(2): 1 for depthwise.
ConvCase make_conv(const benchmark::State& state) {
    const int c = static_cast<int>(state.range(0));
    const int kernel = static_cast<int>(state.range(1));
    const int groups = state.range(2) ? c : 1;
    const Shape xs{32, c, 16, 16}, ks{c, c / groups, kernel, kernel};
    ConvCase cc{make_conv_geometry(xs, ks, 1, 1, (kernel - 1) / 2, groups), Tensor(xs), Tensor(ks), {}};
    cc.y = Tensor({32, c, cc.g.out_height, cc.g.out_width});
    Rng rng(7);
    for (std::size_t i = 0; i < cc.x.size(); ++i) cc.x[i] = static_cast<Real>(rng.normal());
    for (std::size_t i = 0; i < cc.k.size(); ++i) cc.k[i] = static_cast<Real>(rng.normal());
    return cc;
}

void set_conv_counters(benchmark::State& state, const ConvGeometry& g) {
    const double macs = static_cast<double>(g.batch) * g.out_channels * g.out_height * g.out_width *
                        g.in_per_group() * g.kernel * g.kernel;
    state.counters["MAC/s"] = benchmark::Counter(macs, benchmark::Counter::kIsIterationInvariantRate);
    state.counters["threads"] = kernels::max_threads();
}

template <auto Forward>
void conv_forward(benchmark::State& state) {
    ConvCase cc = make_conv(state);
    for (auto _ : state) {
        Forward(cc.g, cc.x.ptr(), cc.k.ptr(), cc.y.ptr());
        benchmark::DoNotOptimize(cc.y.ptr());
    }
    set_conv_counters(state, cc.g);
}

template <auto BackwardInput, auto BackwardKernel>
void conv_backward(benchmark::State& state) {
    ConvCase cc = make_conv(state);
    Tensor gx(cc.x.shape()), gk(cc.k.shape());
    for (auto _ : state) {
        BackwardInput(cc.g, cc.y.ptr(), cc.k.ptr(), gx.ptr());
        BackwardKernel(cc.g, cc.y.ptr(), cc.x.ptr(), gk.ptr());
        benchmark::DoNotOptimize(gx.ptr());
        benchmark::DoNotOptimize(gk.ptr());
    }
    set_conv_counters(state, cc.g);
}

template <auto Forward, auto Backward>
void pool(benchmark::State& state) {
    const Shape s{32, static_cast<int>(state.range(0)), 16, 16};
    const PoolGeometry g = make_pool_geometry(s, 3, 1, 1);
    Tensor x(s), y(s), gy(s), gx(s);
    Rng rng(9);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<Real>(rng.normal());
    const PoolMode mode = state.range(1) ? PoolMode::max : PoolMode::average;
    for (auto _ : state) {
        Forward(g, mode, x.ptr(), y.ptr());
        Backward(g, mode, x.ptr(), y.ptr(), gx.ptr());
        benchmark::DoNotOptimize(gx.ptr());
    }
    state.counters["threads"] = kernels::max_threads();
}

void conv_args(benchmark::internal::Benchmark* b) {
    b->ArgNames({"C", "k", "dw"});
    for (int c : {8, 16, 32}) {
        b->Args({c, 1, 0});
        b->Args({c, 3, 1});
        b->Args({c, 5, 1});
    }
}

void pool_args(benchmark::internal::Benchmark* b) {
    b->ArgNames({"C", "max"});
    for (int c : {8, 32}) {
        b->Args({c, 0});
        b->Args({c, 1});
    }
}

} // namespace

BENCHMARK(conv_forward<kernels::conv2d_forward>)->Name("conv_forward/kernels")->Apply(conv_args);
BENCHMARK(conv_forward<reference::conv2d_forward>)->Name("conv_forward/reference")->Apply(conv_args);
BENCHMARK(conv_backward<kernels::conv2d_backward_input, kernels::conv2d_backward_kernel>)
    ->Name("conv_backward/kernels")
    ->Apply(conv_args);
BENCHMARK(conv_backward<reference::conv2d_backward_input, reference::conv2d_backward_kernel>)
    ->Name("conv_backward/reference")
    ->Apply(conv_args);
BENCHMARK(pool<kernels::pool2d_forward, kernels::pool2d_backward>)->Name("pool/kernels")->Apply(pool_args);
BENCHMARK(pool<reference::pool2d_forward, reference::pool2d_backward>)->Name("pool/reference")->Apply(pool_args);

BENCHMARK_MAIN();
