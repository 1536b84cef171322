// SPDX-License-Identifier: Apache-2.0
#include "aca/kernels.hpp"

#include <algorithm>
#include <limits>
#include <vector>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace aca {
namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

// Planes smaller than this are not worth a parallel region.
constexpr std::size_t kParallelWork = 1 << 14;

} // namespace

ConvGeometry make_conv_geometry(const Shape& input, const Shape& kernel, int stride, int dilation, int padding,
                                int groups) {
    ConvGeometry g;
    g.batch = input.n;
    g.in_channels = input.c;
    g.height = input.h;
    g.width = input.w;
    g.out_channels = kernel.n;
    g.kernel = kernel.h;
    g.stride = stride;
    g.dilation = dilation;
    g.padding = padding;
    g.groups = groups;
    if (input.h <= 0 || input.w <= 0) throw ConfigError("conv2d: zero-sized spatial input " + input.str());
    if (stride < 1 || dilation < 1 || padding < 0 || groups < 1)
        throw ConfigError("conv2d: invalid stride/dilation/padding/groups");
    if (kernel.h != kernel.w || kernel.h % 2 == 0) throw ConfigError("conv2d: kernel must be square and odd, got " + kernel.str());
    if (input.c % groups != 0 || kernel.n % groups != 0)
        throw ConfigError("conv2d: channels not divisible by groups");
    if (kernel.c != input.c / groups)
        throw ConfigError("conv2d: kernel " + kernel.str() + " does not match input " + input.str() + " with groups " +
                          std::to_string(groups));
    const int span = dilation * (g.kernel - 1) + 1;
    g.out_height = (input.h + 2 * padding - span) / stride + 1;
    g.out_width = (input.w + 2 * padding - span) / stride + 1;
    if (g.out_height != ceil_div(input.h, stride) || g.out_width != ceil_div(input.w, stride))
        throw ConfigError("conv2d: padding " + std::to_string(padding) + " does not give same-size output");
    return g;
}

PoolGeometry make_pool_geometry(const Shape& input, int window, int stride, int padding) {
    if (window < 1 || window % 2 == 0 || stride < 1 || padding < 0 || padding >= window)
        throw ConfigError("pool2d: invalid window/stride/padding");
    if (input.h <= 0 || input.w <= 0) throw ConfigError("pool2d: zero-sized spatial input " + input.str());
    PoolGeometry g;
    g.batch = input.n;
    g.channels = input.c;
    g.height = input.h;
    g.width = input.w;
    g.window = window;
    g.stride = stride;
    g.padding = padding;
    g.out_height = (input.h + 2 * padding - window) / stride + 1;
    g.out_width = (input.w + 2 * padding - window) / stride + 1;
    if (g.out_height <= 0 || g.out_width <= 0) throw ConfigError("pool2d: window larger than padded input");
    return g;
}

namespace kernels {

int max_threads() noexcept {
#if defined(_OPENMP)
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_threads(int n) noexcept {
#if defined(_OPENMP)
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

double dot(const Real* a, const Real* b, std::size_t n) noexcept {
    constexpr std::size_t L = 16;
    Real lanes[L] = {};
    std::size_t i = 0;
    for (; i + L <= n; i += L)
        for (std::size_t l = 0; l < L; ++l) lanes[l] += a[i + l] * b[i + l];
    double s = 0.0;
    for (std::size_t l = 0; l < L; ++l) s += lanes[l];
    for (; i < n; ++i) s += static_cast<double>(a[i]) * b[i];
    return s;
}

namespace {

/// Zero-padded copy of every (batch, channel) plane.
std::vector<Real> pad_planes(const ConvGeometry& g, const Real* input) {
    const int p = g.padding;
    const int hp = g.height + 2 * p;
    const int wp = g.width + 2 * p;
    const int planes = g.batch * g.in_channels;
    std::vector<Real> out(static_cast<std::size_t>(planes) * hp * wp, Real(0));
    for (int plane = 0; plane < planes; ++plane) {
        const Real* src = input + static_cast<std::size_t>(plane) * g.height * g.width;
        Real* dst = out.data() + static_cast<std::size_t>(plane) * hp * wp;
        for (int y = 0; y < g.height; ++y)
            std::copy_n(src + static_cast<std::size_t>(y) * g.width, g.width,
                        dst + static_cast<std::size_t>(y + p) * wp + p);
    }
    return out;
}

bool is_pointwise(const ConvGeometry& g) { return g.kernel == 1 && g.stride == 1 && g.padding == 0; }

} // namespace

// Stride-1 convolutions use "wide" indexing: output pixel (oy, ox) lives at
// oy * wp + ox, where wp is the padded input width. Tap (ky, kx) then reads the
// padded plane at a constant offset, so each tap is one contiguous loop over
// wide_len(g) elements. Columns ox >= out_width are scratch.
namespace {

int padded_width(const ConvGeometry& g) { return g.width + 2 * g.padding; }

std::size_t wide_len(const ConvGeometry& g) {
    return static_cast<std::size_t>(g.out_height - 1) * padded_width(g) + g.out_width;
}

std::size_t tap_offset(const ConvGeometry& g, int ky, int kx) {
    return static_cast<std::size_t>(ky * g.dilation) * padded_width(g) + kx * g.dilation;
}

/// Expands a dense output plane into wide layout with zero scratch columns.
void widen(const ConvGeometry& g, const Real* dense, Real* wide) {
    const int wp = padded_width(g);
    for (int oy = 0; oy < g.out_height; ++oy) {
        Real* row = wide + static_cast<std::size_t>(oy) * wp;
        std::copy_n(dense + static_cast<std::size_t>(oy) * g.out_width, g.out_width, row);
        if (oy + 1 < g.out_height) std::fill(row + g.out_width, row + wp, Real(0));
    }
}

} // namespace

void conv2d_forward(const ConvGeometry& g, const Real* input, const Real* kernel, Real* output) {
    const int icpg = g.in_per_group();
    const int ocpg = g.out_per_group();
    const int K = g.kernel;
    const int s = g.stride;
    const int wp = padded_width(g);
    const std::size_t in_plane = static_cast<std::size_t>(g.height + 2 * g.padding) * wp;
    const std::size_t out_plane = static_cast<std::size_t>(g.out_height) * g.out_width;
    const bool pointwise = is_pointwise(g);
    std::vector<Real> padded;
    const Real* src = input;
    if (!pointwise && g.padding > 0) {
        padded = pad_planes(g, input);
        src = padded.data();
    }
    const int planes = g.batch * g.out_channels;
    const bool par = out_plane * static_cast<std::size_t>(planes) * icpg * K * K > kParallelWork;
    const std::size_t wlen = wide_len(g);

#pragma omp parallel if (par)
    {
        std::vector<Real> wide(!pointwise && s == 1 ? wlen : 0);
#pragma omp for schedule(static)
        for (int plane = 0; plane < planes; ++plane) {
            const int b = plane / g.out_channels;
            const int o = plane % g.out_channels;
            const int grp = o / ocpg;
            Real* out = output + static_cast<std::size_t>(plane) * out_plane;
            if (pointwise) {
                std::fill(out, out + out_plane, Real(0));
                for (int icg = 0; icg < icpg; ++icg) {
                    const Real* in = src + (static_cast<std::size_t>(b) * g.in_channels + grp * icpg + icg) * in_plane;
                    const Real wv = kernel[static_cast<std::size_t>(o) * icpg + icg];
                    for (std::size_t i = 0; i < out_plane; ++i) out[i] += wv * in[i];
                }
                continue;
            }
            if (s == 1) {
                std::fill(wide.begin(), wide.end(), Real(0));
                Real* acc = wide.data();
                for (int icg = 0; icg < icpg; ++icg) {
                    const Real* in = src + (static_cast<std::size_t>(b) * g.in_channels + grp * icpg + icg) * in_plane;
                    const Real* wk = kernel + (static_cast<std::size_t>(o) * icpg + icg) * K * K;
                    for (int ky = 0; ky < K; ++ky)
                        for (int kx = 0; kx < K; ++kx) {
                            const Real wv = wk[ky * K + kx];
                            const Real* tap = in + tap_offset(g, ky, kx);
                            for (std::size_t i = 0; i < wlen; ++i) acc[i] += wv * tap[i];
                        }
                }
                for (int oy = 0; oy < g.out_height; ++oy)
                    std::copy_n(acc + static_cast<std::size_t>(oy) * wp, g.out_width,
                                out + static_cast<std::size_t>(oy) * g.out_width);
                continue;
            }
            std::fill(out, out + out_plane, Real(0));
            for (int icg = 0; icg < icpg; ++icg) {
                const Real* in = src + (static_cast<std::size_t>(b) * g.in_channels + grp * icpg + icg) * in_plane;
                const Real* wk = kernel + (static_cast<std::size_t>(o) * icpg + icg) * K * K;
                for (int ky = 0; ky < K; ++ky)
                    for (int kx = 0; kx < K; ++kx) {
                        const Real wv = wk[ky * K + kx];
                        for (int oy = 0; oy < g.out_height; ++oy) {
                            Real* orow = out + static_cast<std::size_t>(oy) * g.out_width;
                            const Real* irow =
                                in + static_cast<std::size_t>(oy * s + ky * g.dilation) * wp + kx * g.dilation;
                            for (int ox = 0; ox < g.out_width; ++ox) orow[ox] += wv * irow[ox * s];
                        }
                    }
            }
        }
    }
}

void conv2d_backward_input(const ConvGeometry& g, const Real* grad_output, const Real* kernel, Real* grad_input) {
    const int icpg = g.in_per_group();
    const int ocpg = g.out_per_group();
    const int K = g.kernel;
    const int s = g.stride;
    const int p = g.padding;
    const int wp = padded_width(g);
    const std::size_t padded_plane = static_cast<std::size_t>(g.height + 2 * p) * wp;
    const std::size_t in_plane = static_cast<std::size_t>(g.height) * g.width;
    const std::size_t out_plane = static_cast<std::size_t>(g.out_height) * g.out_width;
    const bool pointwise = is_pointwise(g);
    const int planes = g.batch * g.in_channels;
    const bool par = out_plane * static_cast<std::size_t>(planes) * ocpg * K * K > kParallelWork;
    const std::size_t wlen = wide_len(g);

#pragma omp parallel if (par)
    {
        std::vector<Real> scratch(pointwise ? 0 : padded_plane);
        std::vector<Real> wide(!pointwise && s == 1 ? wlen : 0);
#pragma omp for schedule(static)
        for (int plane = 0; plane < planes; ++plane) {
            const int b = plane / g.in_channels;
            const int ic = plane % g.in_channels;
            const int grp = ic / icpg;
            const int icg = ic % icpg;
            Real* gin = grad_input + static_cast<std::size_t>(plane) * in_plane;
            if (pointwise) {
                for (int og = 0; og < ocpg; ++og) {
                    const int o = grp * ocpg + og;
                    const Real* gout = grad_output + (static_cast<std::size_t>(b) * g.out_channels + o) * out_plane;
                    const Real wv = kernel[static_cast<std::size_t>(o) * icpg + icg];
                    for (std::size_t i = 0; i < in_plane; ++i) gin[i] += wv * gout[i];
                }
                continue;
            }
            std::fill(scratch.begin(), scratch.end(), Real(0));
            for (int og = 0; og < ocpg; ++og) {
                const int o = grp * ocpg + og;
                const Real* gout = grad_output + (static_cast<std::size_t>(b) * g.out_channels + o) * out_plane;
                const Real* wk = kernel + (static_cast<std::size_t>(o) * icpg + icg) * K * K;
                if (s == 1) {
                    widen(g, gout, wide.data());
                    const Real* gw = wide.data();
                    for (int ky = 0; ky < K; ++ky)
                        for (int kx = 0; kx < K; ++kx) {
                            const Real wv = wk[ky * K + kx];
                            Real* tap = scratch.data() + tap_offset(g, ky, kx);
                            for (std::size_t i = 0; i < wlen; ++i) tap[i] += wv * gw[i];
                        }
                    continue;
                }
                for (int ky = 0; ky < K; ++ky)
                    for (int kx = 0; kx < K; ++kx) {
                        const Real wv = wk[ky * K + kx];
                        for (int oy = 0; oy < g.out_height; ++oy) {
                            const Real* grow = gout + static_cast<std::size_t>(oy) * g.out_width;
                            Real* irow = scratch.data() + static_cast<std::size_t>(oy * s + ky * g.dilation) * wp +
                                         kx * g.dilation;
                            for (int ox = 0; ox < g.out_width; ++ox) irow[ox * s] += wv * grow[ox];
                        }
                    }
            }
            for (int y = 0; y < g.height; ++y) {
                const Real* srow = scratch.data() + static_cast<std::size_t>(y + p) * wp + p;
                Real* drow = gin + static_cast<std::size_t>(y) * g.width;
                for (int x = 0; x < g.width; ++x) drow[x] += srow[x];
            }
        }
    }
}

void conv2d_backward_kernel(const ConvGeometry& g, const Real* grad_output, const Real* input, Real* grad_kernel) {
    const int icpg = g.in_per_group();
    const int ocpg = g.out_per_group();
    const int K = g.kernel;
    const int s = g.stride;
    const int wp = padded_width(g);
    const std::size_t in_plane = static_cast<std::size_t>(g.height + 2 * g.padding) * wp;
    const std::size_t out_plane = static_cast<std::size_t>(g.out_height) * g.out_width;
    const bool pointwise = is_pointwise(g);
    std::vector<Real> padded;
    const Real* src = input;
    if (!pointwise && g.padding > 0) {
        padded = pad_planes(g, input);
        src = padded.data();
    }
    const bool par = out_plane * static_cast<std::size_t>(g.batch) * g.out_channels * icpg * K * K > kParallelWork;
    const std::size_t ow = static_cast<std::size_t>(g.out_width);
    const std::size_t wlen = wide_len(g);

    if (pointwise) {
        // One output channel per iteration; lanes[icg][p] collects products over the batch.
#pragma omp parallel if (par)
        {
            std::vector<Real> lanes(static_cast<std::size_t>(icpg) * out_plane);
#pragma omp for schedule(static)
            for (int o = 0; o < g.out_channels; ++o) {
                const int grp = o / ocpg;
                std::fill(lanes.begin(), lanes.end(), Real(0));
                for (int b = 0; b < g.batch; ++b) {
                    const Real* gout = grad_output + (static_cast<std::size_t>(b) * g.out_channels + o) * out_plane;
                    for (int icg = 0; icg < icpg; ++icg) {
                        const Real* in = src + (static_cast<std::size_t>(b) * g.in_channels + grp * icpg + icg) * in_plane;
                        Real* lane = lanes.data() + static_cast<std::size_t>(icg) * out_plane;
                        for (std::size_t i = 0; i < out_plane; ++i) lane[i] += gout[i] * in[i];
                    }
                }
                for (int icg = 0; icg < icpg; ++icg) {
                    const Real* lane = lanes.data() + static_cast<std::size_t>(icg) * out_plane;
                    double acc = 0.0;
                    for (std::size_t i = 0; i < out_plane; ++i) acc += lane[i];
                    grad_kernel[static_cast<std::size_t>(o) * icpg + icg] += static_cast<Real>(acc);
                }
            }
        }
        return;
    }

    const std::size_t taps = static_cast<std::size_t>(g.out_channels) * icpg;
    const std::size_t lane_len = s == 1 ? wlen : ow;

#pragma omp parallel if (par)
    {
        // Per-tap lane buffers: products are summed elementwise and collapsed
        // once at the end, in a fixed order.
        std::vector<Real> lanes(static_cast<std::size_t>(K) * K * lane_len);
        std::vector<Real> wide(s == 1 ? wlen : 0);
#pragma omp for schedule(static)
        for (std::size_t t = 0; t < taps; ++t) {
            const int o = static_cast<int>(t / icpg);
            const int icg = static_cast<int>(t % icpg);
            const int ic = (o / ocpg) * icpg + icg;
            Real* gw = grad_kernel + t * K * K;
            std::fill(lanes.begin(), lanes.end(), Real(0));
            for (int b = 0; b < g.batch; ++b) {
                const Real* gout = grad_output + (static_cast<std::size_t>(b) * g.out_channels + o) * out_plane;
                const Real* in = src + (static_cast<std::size_t>(b) * g.in_channels + ic) * in_plane;
                if (s == 1) {
                    widen(g, gout, wide.data());
                    const Real* gwide = wide.data();
                    for (int ky = 0; ky < K; ++ky)
                        for (int kx = 0; kx < K; ++kx) {
                            Real* lane = lanes.data() + static_cast<std::size_t>(ky * K + kx) * lane_len;
                            const Real* tap = in + tap_offset(g, ky, kx);
                            for (std::size_t i = 0; i < wlen; ++i) lane[i] += gwide[i] * tap[i];
                        }
                    continue;
                }
                for (int oy = 0; oy < g.out_height; ++oy) {
                    const Real* grow = gout + static_cast<std::size_t>(oy) * ow;
                    for (int ky = 0; ky < K; ++ky) {
                        const Real* base = in + static_cast<std::size_t>(oy * s + ky * g.dilation) * wp;
                        for (int kx = 0; kx < K; ++kx) {
                            Real* lane = lanes.data() + static_cast<std::size_t>(ky * K + kx) * lane_len;
                            const Real* irow = base + kx * g.dilation;
                            for (std::size_t ox = 0; ox < ow; ++ox) lane[ox] += grow[ox] * irow[ox * s];
                        }
                    }
                }
            }
            for (int tap = 0; tap < K * K; ++tap) {
                double acc = 0.0;
                const Real* lane = lanes.data() + static_cast<std::size_t>(tap) * lane_len;
                for (std::size_t i = 0; i < lane_len; ++i) acc += lane[i];
                gw[tap] += static_cast<Real>(acc);
            }
        }
    }
}

void pool2d_forward(const PoolGeometry& g, PoolMode mode, const Real* input, Real* output) {
    const std::size_t in_plane = static_cast<std::size_t>(g.height) * g.width;
    const std::size_t out_plane = static_cast<std::size_t>(g.out_height) * g.out_width;
    const int planes = g.batch * g.channels;
    const bool par = out_plane * static_cast<std::size_t>(planes) * g.window * g.window > kParallelWork;

#pragma omp parallel for schedule(static) if (par)
    for (int plane = 0; plane < planes; ++plane) {
        const Real* in = input + static_cast<std::size_t>(plane) * in_plane;
        Real* out = output + static_cast<std::size_t>(plane) * out_plane;
        for (int oy = 0; oy < g.out_height; ++oy) {
            const int y0 = std::max(0, oy * g.stride - g.padding);
            const int y1 = std::min(g.height, oy * g.stride - g.padding + g.window);
            for (int ox = 0; ox < g.out_width; ++ox) {
                const int x0 = std::max(0, ox * g.stride - g.padding);
                const int x1 = std::min(g.width, ox * g.stride - g.padding + g.window);
                if (mode == PoolMode::max) {
                    Real m = -std::numeric_limits<Real>::infinity();
                    for (int y = y0; y < y1; ++y)
                        for (int x = x0; x < x1; ++x) m = std::max(m, in[y * g.width + x]);
                    out[oy * g.out_width + ox] = m;
                } else {
                    Real s = 0;
                    for (int y = y0; y < y1; ++y)
                        for (int x = x0; x < x1; ++x) s += in[y * g.width + x];
                    out[oy * g.out_width + ox] = s / static_cast<Real>((y1 - y0) * (x1 - x0));
                }
            }
        }
    }
}

void pool2d_backward(const PoolGeometry& g, PoolMode mode, const Real* input, const Real* grad_output,
                     Real* grad_input) {
    const std::size_t in_plane = static_cast<std::size_t>(g.height) * g.width;
    const std::size_t out_plane = static_cast<std::size_t>(g.out_height) * g.out_width;
    const int planes = g.batch * g.channels;
    const bool par = out_plane * static_cast<std::size_t>(planes) * g.window * g.window > kParallelWork;

#pragma omp parallel for schedule(static) if (par)
    for (int plane = 0; plane < planes; ++plane) {
        const Real* in = input + static_cast<std::size_t>(plane) * in_plane;
        const Real* gout = grad_output + static_cast<std::size_t>(plane) * out_plane;
        Real* gin = grad_input + static_cast<std::size_t>(plane) * in_plane;
        for (int oy = 0; oy < g.out_height; ++oy) {
            const int y0 = std::max(0, oy * g.stride - g.padding);
            const int y1 = std::min(g.height, oy * g.stride - g.padding + g.window);
            for (int ox = 0; ox < g.out_width; ++ox) {
                const int x0 = std::max(0, ox * g.stride - g.padding);
                const int x1 = std::min(g.width, ox * g.stride - g.padding + g.window);
                const Real go = gout[oy * g.out_width + ox];
                if (mode == PoolMode::max) {
                    // First maximum in scan order receives the gradient.
                    int best = y0 * g.width + x0;
                    for (int y = y0; y < y1; ++y)
                        for (int x = x0; x < x1; ++x)
                            if (in[y * g.width + x] > in[best]) best = y * g.width + x;
                    gin[best] += go;
                } else {
                    const Real share = go / static_cast<Real>((y1 - y0) * (x1 - x0));
                    for (int y = y0; y < y1; ++y)
                        for (int x = x0; x < x1; ++x) gin[y * g.width + x] += share;
                }
            }
        }
    }
}

void channel_moments(const Shape& s, const Real* x, double* mean, double* var) {
    const std::size_t plane = s.plane();
    const double count = static_cast<double>(s.n) * static_cast<double>(plane);
    const bool par = s.numel() > kParallelWork;

#pragma omp parallel for schedule(static) if (par)
    for (int c = 0; c < s.c; ++c) {
        double sum = 0.0;
        for (int b = 0; b < s.n; ++b) {
            const Real* p = x + (static_cast<std::size_t>(b) * s.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) sum += p[i];
        }
        const double m = sum / count;
        double sq = 0.0;
        for (int b = 0; b < s.n; ++b) {
            const Real* p = x + (static_cast<std::size_t>(b) * s.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                const double d = p[i] - m;
                sq += d * d;
            }
        }
        mean[c] = m;
        var[c] = sq / count;
    }
}

} // namespace kernels
} // namespace aca
