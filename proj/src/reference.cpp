// SPDX-License-Identifier: Apache-2.0
#include "aca/reference.hpp"

#include <limits>

namespace aca::reference {
namespace {

struct Idx {
    const ConvGeometry& g;
    std::size_t in(int b, int c, int y, int x) const {
        return ((static_cast<std::size_t>(b) * g.in_channels + c) * g.height + y) * g.width + x;
    }
    std::size_t out(int b, int c, int y, int x) const {
        return ((static_cast<std::size_t>(b) * g.out_channels + c) * g.out_height + y) * g.out_width + x;
    }
    std::size_t w(int o, int icg, int ky, int kx) const {
        return ((static_cast<std::size_t>(o) * g.in_per_group() + icg) * g.kernel + ky) * g.kernel + kx;
    }
};

} // namespace

void conv2d_forward(const ConvGeometry& g, const Real* input, const Real* kernel, Real* output) {
    const Idx ix{g};
    const int icpg = g.in_per_group();
    const int ocpg = g.out_per_group();
    for (int b = 0; b < g.batch; ++b)
        for (int o = 0; o < g.out_channels; ++o)
            for (int oy = 0; oy < g.out_height; ++oy)
                for (int ox = 0; ox < g.out_width; ++ox) {
                    double acc = 0.0;
                    for (int icg = 0; icg < icpg; ++icg)
                        for (int ky = 0; ky < g.kernel; ++ky)
                            for (int kx = 0; kx < g.kernel; ++kx) {
                                const int iy = oy * g.stride + ky * g.dilation - g.padding;
                                const int jx = ox * g.stride + kx * g.dilation - g.padding;
                                if (iy < 0 || iy >= g.height || jx < 0 || jx >= g.width) continue;
                                const int ic = (o / ocpg) * icpg + icg;
                                acc += static_cast<double>(input[ix.in(b, ic, iy, jx)]) * kernel[ix.w(o, icg, ky, kx)];
                            }
                    output[ix.out(b, o, oy, ox)] = static_cast<Real>(acc);
                }
}

void conv2d_backward_input(const ConvGeometry& g, const Real* grad_output, const Real* kernel, Real* grad_input) {
    const Idx ix{g};
    const int icpg = g.in_per_group();
    const int ocpg = g.out_per_group();
    for (int b = 0; b < g.batch; ++b)
        for (int ic = 0; ic < g.in_channels; ++ic)
            for (int iy = 0; iy < g.height; ++iy)
                for (int jx = 0; jx < g.width; ++jx) {
                    double acc = 0.0;
                    const int grp = ic / icpg;
                    for (int og = 0; og < ocpg; ++og)
                        for (int ky = 0; ky < g.kernel; ++ky)
                            for (int kx = 0; kx < g.kernel; ++kx) {
                                const int ny = iy + g.padding - ky * g.dilation;
                                const int nx = jx + g.padding - kx * g.dilation;
                                if (ny < 0 || nx < 0 || ny % g.stride != 0 || nx % g.stride != 0) continue;
                                const int oy = ny / g.stride;
                                const int ox = nx / g.stride;
                                if (oy >= g.out_height || ox >= g.out_width) continue;
                                const int o = grp * ocpg + og;
                                acc += static_cast<double>(grad_output[ix.out(b, o, oy, ox)]) *
                                       kernel[ix.w(o, ic % icpg, ky, kx)];
                            }
                    grad_input[ix.in(b, ic, iy, jx)] += static_cast<Real>(acc);
                }
}

void conv2d_backward_kernel(const ConvGeometry& g, const Real* grad_output, const Real* input, Real* grad_kernel) {
    const Idx ix{g};
    const int icpg = g.in_per_group();
    const int ocpg = g.out_per_group();
    for (int o = 0; o < g.out_channels; ++o)
        for (int icg = 0; icg < icpg; ++icg)
            for (int ky = 0; ky < g.kernel; ++ky)
                for (int kx = 0; kx < g.kernel; ++kx) {
                    double acc = 0.0;
                    const int ic = (o / ocpg) * icpg + icg;
                    for (int b = 0; b < g.batch; ++b)
                        for (int oy = 0; oy < g.out_height; ++oy)
                            for (int ox = 0; ox < g.out_width; ++ox) {
                                const int iy = oy * g.stride + ky * g.dilation - g.padding;
                                const int jx = ox * g.stride + kx * g.dilation - g.padding;
                                if (iy < 0 || iy >= g.height || jx < 0 || jx >= g.width) continue;
                                acc += static_cast<double>(grad_output[ix.out(b, o, oy, ox)]) *
                                       input[ix.in(b, ic, iy, jx)];
                            }
                    grad_kernel[ix.w(o, icg, ky, kx)] += static_cast<Real>(acc);
                }
}

void pool2d_forward(const PoolGeometry& g, PoolMode mode, const Real* input, Real* output) {
    for (int p = 0; p < g.batch * g.channels; ++p)
        for (int oy = 0; oy < g.out_height; ++oy)
            for (int ox = 0; ox < g.out_width; ++ox) {
                double best = -std::numeric_limits<double>::infinity();
                double sum = 0.0;
                int count = 0;
                for (int wy = 0; wy < g.window; ++wy)
                    for (int wx = 0; wx < g.window; ++wx) {
                        const int y = oy * g.stride - g.padding + wy;
                        const int x = ox * g.stride - g.padding + wx;
                        if (y < 0 || y >= g.height || x < 0 || x >= g.width) continue;
                        const double v = input[(static_cast<std::size_t>(p) * g.height + y) * g.width + x];
                        if (v > best) best = v;
                        sum += v;
                        ++count;
                    }
                output[(static_cast<std::size_t>(p) * g.out_height + oy) * g.out_width + ox] =
                    static_cast<Real>(mode == PoolMode::max ? best : sum / count);
            }
}

void pool2d_backward(const PoolGeometry& g, PoolMode mode, const Real* input, const Real* grad_output,
                     Real* grad_input) {
    for (int p = 0; p < g.batch * g.channels; ++p)
        for (int oy = 0; oy < g.out_height; ++oy)
            for (int ox = 0; ox < g.out_width; ++ox) {
                const double go = grad_output[(static_cast<std::size_t>(p) * g.out_height + oy) * g.out_width + ox];
                int count = 0;
                std::size_t arg = 0;
                double best = -std::numeric_limits<double>::infinity();
                for (int wy = 0; wy < g.window; ++wy)
                    for (int wx = 0; wx < g.window; ++wx) {
                        const int y = oy * g.stride - g.padding + wy;
                        const int x = ox * g.stride - g.padding + wx;
                        if (y < 0 || y >= g.height || x < 0 || x >= g.width) continue;
                        const std::size_t at = (static_cast<std::size_t>(p) * g.height + y) * g.width + x;
                        if (input[at] > best) {
                            best = input[at];
                            arg = at;
                        }
                        ++count;
                    }
                if (mode == PoolMode::max) {
                    grad_input[arg] += static_cast<Real>(go);
                    continue;
                }
                for (int wy = 0; wy < g.window; ++wy)
                    for (int wx = 0; wx < g.window; ++wx) {
                        const int y = oy * g.stride - g.padding + wy;
                        const int x = ox * g.stride - g.padding + wx;
                        if (y < 0 || y >= g.height || x < 0 || x >= g.width) continue;
                        grad_input[(static_cast<std::size_t>(p) * g.height + y) * g.width + x] +=
                            static_cast<Real>(go / count);
                    }
            }
}

} // namespace aca::reference
