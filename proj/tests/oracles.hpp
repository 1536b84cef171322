// SPDX-License-Identifier: Apache-2.0
// Independent naive implementations used as test oracles.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "aca/rng.hpp"
#include "aca/tensor.hpp"

namespace oracle {

using aca::Real;
using aca::Shape;
using aca::Tensor;

inline Tensor random_tensor(Shape s, aca::Rng& rng, double scale = 1.0) {
    Tensor t(s);
    for (auto& v : t.data()) v = static_cast<Real>(scale * rng.normal());
    return t;
}

/// Direct convolution, zero padding, 64-bit accumulation. Output side
/// ceil(in / stride).
inline Tensor conv2d(const Tensor& x, const Tensor& k, int stride, int dilation, int padding, int groups) {
    const Shape s = x.shape(), ks = k.shape();
    const int oh = (s.h + stride - 1) / stride, ow = (s.w + stride - 1) / stride;
    const int icpg = s.c / groups, ocpg = ks.n / groups;
    Tensor out({s.n, ks.n, oh, ow});
    for (int b = 0; b < s.n; ++b)
        for (int o = 0; o < ks.n; ++o)
            for (int y = 0; y < oh; ++y)
                for (int xx = 0; xx < ow; ++xx) {
                    double acc = 0.0;
                    const int g = o / ocpg;
                    for (int ic = 0; ic < icpg; ++ic)
                        for (int ky = 0; ky < ks.h; ++ky)
                            for (int kx = 0; kx < ks.w; ++kx) {
                                const int iy = y * stride - padding + ky * dilation;
                                const int ix = xx * stride - padding + kx * dilation;
                                if (iy < 0 || iy >= s.h || ix < 0 || ix >= s.w) continue;
                                acc += static_cast<double>(x.at(b, g * icpg + ic, iy, ix)) * k.at(o, ic, ky, kx);
                            }
                    out.at(b, o, y, xx) = static_cast<Real>(acc);
                }
    return out;
}

/// Sliding-window pooling; average divides by the in-bounds count.
inline Tensor pool2d(const Tensor& x, bool max_mode, int window, int stride, int padding) {
    const Shape s = x.shape();
    const int oh = (s.h + stride - 1) / stride, ow = (s.w + stride - 1) / stride;
    Tensor out({s.n, s.c, oh, ow});
    for (int b = 0; b < s.n; ++b)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < oh; ++y)
                for (int xx = 0; xx < ow; ++xx) {
                    double best = -std::numeric_limits<double>::infinity(), sum = 0.0;
                    int count = 0;
                    for (int dy = 0; dy < window; ++dy)
                        for (int dx = 0; dx < window; ++dx) {
                            const int iy = y * stride - padding + dy, ix = xx * stride - padding + dx;
                            if (iy < 0 || iy >= s.h || ix < 0 || ix >= s.w) continue;
                            const double v = x.at(b, c, iy, ix);
                            best = std::max(best, v);
                            sum += v;
                            ++count;
                        }
                    out.at(b, c, y, xx) = static_cast<Real>(max_mode ? best : sum / count);
                }
    return out;
}

inline std::vector<double> softmax(const std::vector<double>& z) {
    const double m = *std::max_element(z.begin(), z.end());
    std::vector<double> e;
    double s = 0.0;
    for (double v : z) {
        e.push_back(std::exp(v - m));
        s += e.back();
    }
    for (double& v : e) v /= s;
    return e;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
    return m;
}

inline double max_abs(const Tensor& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i])));
    return m;
}

} // namespace oracle
