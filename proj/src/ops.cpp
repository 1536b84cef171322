// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <memory>

#include "aca/autodiff.hpp"

namespace aca {
namespace {

Tape& common_tape(std::span<const Var> vars) {
    if (vars.empty()) throw ConfigError("operation needs at least one operand");
    Tape& t = vars.front().tape();
    for (const Var& v : vars)
        if (&v.tape() != &t) throw UsageError("operands recorded on different tapes");
    return t;
}

} // namespace

std::vector<Real> softmax(std::span<const Real> logits) {
    if (logits.empty()) throw ConfigError("softmax of an empty sequence");
    const Real m = *std::max_element(logits.begin(), logits.end());
    std::vector<Real> out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        total += out[i];
    }
    for (auto& v : out) v = static_cast<Real>(v / total);
    return out;
}

Var add(Var a, Var b) {
    require_same_shape(a.shape(), b.shape(), "add");
    Tensor out = a.value();
    out.accumulate(b.value());
    return a.tape().record(std::move(out), {a, b}, [](BackwardContext& ctx) {
        for (std::size_t i = 0; i < 2; ++i)
            if (Tensor* g = ctx.grad(i)) g->accumulate(ctx.grad_output());
    });
}

Var add_n(std::span<const Var> terms) {
    Tape& tape = common_tape(terms);
    Tensor out = terms.front().value();
    for (std::size_t i = 1; i < terms.size(); ++i) {
        require_same_shape(out.shape(), terms[i].shape(), "add_n");
        out.accumulate(terms[i].value());
    }
    if (terms.size() == 1) {
        return tape.record(std::move(out), terms, [](BackwardContext& ctx) {
            if (Tensor* g = ctx.grad(0)) g->accumulate(ctx.grad_output());
        });
    }
    const std::size_t n = terms.size();
    return tape.record(std::move(out), terms, [n](BackwardContext& ctx) {
        for (std::size_t i = 0; i < n; ++i)
            if (Tensor* g = ctx.grad(i)) g->accumulate(ctx.grad_output());
    });
}

Var mul(Var a, Var b) {
    require_same_shape(a.shape(), b.shape(), "mul");
    Tensor out(a.shape());
    const auto& x = a.value();
    const auto& y = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
    return a.tape().record(std::move(out), {a, b}, [](BackwardContext& ctx) {
        const Tensor& go = ctx.grad_output();
        if (Tensor* g = ctx.grad(0)) {
            const Tensor& y = ctx.input(1);
            for (std::size_t i = 0; i < go.size(); ++i) (*g)[i] += go[i] * y[i];
        }
        if (Tensor* g = ctx.grad(1)) {
            const Tensor& x = ctx.input(0);
            for (std::size_t i = 0; i < go.size(); ++i) (*g)[i] += go[i] * x[i];
        }
    });
}

Var scale(Var a, Real factor) {
    Tensor out = a.value();
    for (auto& v : out.data()) v *= factor;
    return a.tape().record(std::move(out), {a}, [factor](BackwardContext& ctx) {
        if (Tensor* g = ctx.grad(0)) {
            const Tensor& go = ctx.grad_output();
            for (std::size_t i = 0; i < go.size(); ++i) (*g)[i] += factor * go[i];
        }
    });
}

Var relu(Var x) {
    Tensor out = x.value();
    for (auto& v : out.data()) v = v > Real(0) ? v : Real(0);
    return x.tape().record(std::move(out), {x}, [](BackwardContext& ctx) {
        if (Tensor* g = ctx.grad(0)) {
            const Tensor& in = ctx.input(0);
            const Tensor& go = ctx.grad_output();
            Real* gp = g->ptr();
            const Real* ip = in.ptr();
            const Real* op = go.ptr();
            for (std::size_t i = 0; i < go.size(); ++i) gp[i] += ip[i] > Real(0) ? op[i] : Real(0);
        }
    });
}

Var sum(Var x) {
    const Real total = static_cast<Real>(x.value().sum());
    return x.tape().record(Tensor::scalar(total), {x}, [](BackwardContext& ctx) {
        if (Tensor* g = ctx.grad(0)) {
            const Real go = ctx.grad_output()[0];
            for (auto& v : g->data()) v += go;
        }
    });
}

Var conv2d(Var input, Var kernel, const ConvParams& p) {
    const ConvGeometry geom =
        make_conv_geometry(input.shape(), kernel.shape(), p.stride, p.dilation, p.padding, p.groups);
    Tensor out({geom.batch, geom.out_channels, geom.out_height, geom.out_width});
    kernels::conv2d_forward(geom, input.value().ptr(), kernel.value().ptr(), out.ptr());
    return input.tape().record(std::move(out), {input, kernel}, [geom](BackwardContext& ctx) {
        const Tensor& go = ctx.grad_output();
        if (Tensor* g = ctx.grad(0)) kernels::conv2d_backward_input(geom, go.ptr(), ctx.input(1).ptr(), g->ptr());
        if (Tensor* g = ctx.grad(1)) kernels::conv2d_backward_kernel(geom, go.ptr(), ctx.input(0).ptr(), g->ptr());
    });
}

Var pool2d(Var input, PoolMode mode, int window, int stride, int padding) {
    const PoolGeometry geom = make_pool_geometry(input.shape(), window, stride, padding);
    Tensor out({geom.batch, geom.channels, geom.out_height, geom.out_width});
    kernels::pool2d_forward(geom, mode, input.value().ptr(), out.ptr());
    return input.tape().record(std::move(out), {input}, [geom, mode](BackwardContext& ctx) {
        if (Tensor* g = ctx.grad(0))
            kernels::pool2d_backward(geom, mode, ctx.input(0).ptr(), ctx.grad_output().ptr(), g->ptr());
    });
}

Var normalize(Var input, const NormOptions& opt) {
    const Shape s = input.shape();
    const std::size_t plane = s.plane();
    const std::size_t count = static_cast<std::size_t>(s.n) * plane;
    const bool affine = opt.scale != nullptr;
    if (affine != (opt.shift != nullptr)) throw ConfigError("normalize: scale and shift must be given together");
    if (affine) {
        const Shape ps{1, s.c, 1, 1};
        require_same_shape(opt.scale->shape(), ps, "normalize scale");
        require_same_shape(opt.shift->shape(), ps, "normalize shift");
    }
    if (opt.training && count < 2) throw ConfigError("normalize: need at least 2 values per channel in training");
    if (!opt.training && (opt.running == nullptr || static_cast<int>(opt.running->mean.size()) != s.c))
        throw ConfigError("normalize: inference mode needs running statistics for every channel");
    if (opt.running && static_cast<int>(opt.running->mean.size()) != s.c)
        throw ConfigError("normalize: running statistics have the wrong channel count");

    std::vector<double> mean(s.c), var(s.c);
    if (opt.training) {
        kernels::channel_moments(s, input.value().ptr(), mean.data(), var.data());
        if (opt.running) {
            const double unbias = static_cast<double>(count) / static_cast<double>(count - 1);
            for (int c = 0; c < s.c; ++c) {
                opt.running->mean[c] = static_cast<Real>((1 - kNormMomentum) * opt.running->mean[c] + kNormMomentum * mean[c]);
                opt.running->var[c] =
                    static_cast<Real>((1 - kNormMomentum) * opt.running->var[c] + kNormMomentum * var[c] * unbias);
            }
        }
    } else {
        for (int c = 0; c < s.c; ++c) {
            mean[c] = opt.running->mean[c];
            var[c] = opt.running->var[c];
        }
    }

    auto inv_std = std::make_shared<std::vector<Real>>(s.c);
    for (int c = 0; c < s.c; ++c) (*inv_std)[c] = static_cast<Real>(1.0 / std::sqrt(var[c] + kNormEpsilon));

    // Normalized values are kept for backward when the affine transform hides them.
    auto xhat = std::make_shared<Tensor>(s);
    const Tensor& x = input.value();
    for (int b = 0; b < s.n; ++b)
        for (int c = 0; c < s.c; ++c) {
            const std::size_t base = (static_cast<std::size_t>(b) * s.c + c) * plane;
            const Real m = static_cast<Real>(mean[c]);
            const Real is = (*inv_std)[c];
            for (std::size_t i = 0; i < plane; ++i) (*xhat)[base + i] = (x[base + i] - m) * is;
        }

    std::vector<Var> parents{input};
    Tensor out;
    if (affine) {
        parents.push_back(*opt.scale);
        parents.push_back(*opt.shift);
        out = Tensor(s);
        const Tensor& gamma = opt.scale->value();
        const Tensor& beta = opt.shift->value();
        for (int b = 0; b < s.n; ++b)
            for (int c = 0; c < s.c; ++c) {
                const std::size_t base = (static_cast<std::size_t>(b) * s.c + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) out[base + i] = gamma[c] * (*xhat)[base + i] + beta[c];
            }
    } else {
        out = *xhat;
    }

    const bool training = opt.training;
    return input.tape().record(std::move(out), parents, [=](BackwardContext& ctx) {
        const Tensor& go = ctx.grad_output();
        std::vector<double> sum_dy(s.c, 0.0), sum_dy_xhat(s.c, 0.0);
        for (int b = 0; b < s.n; ++b)
            for (int c = 0; c < s.c; ++c) {
                const std::size_t base = (static_cast<std::size_t>(b) * s.c + c) * plane;
                double a = 0.0, d = 0.0;
                for (std::size_t i = 0; i < plane; ++i) {
                    a += go[base + i];
                    d += static_cast<double>(go[base + i]) * (*xhat)[base + i];
                }
                sum_dy[c] += a;
                sum_dy_xhat[c] += d;
            }
        std::vector<Real> gamma(s.c, Real(1));
        if (affine) {
            const Tensor& gv = ctx.input(1);
            for (int c = 0; c < s.c; ++c) gamma[c] = gv[c];
            if (Tensor* g = ctx.grad(1))
                for (int c = 0; c < s.c; ++c) (*g)[c] += static_cast<Real>(sum_dy_xhat[c]);
            if (Tensor* g = ctx.grad(2))
                for (int c = 0; c < s.c; ++c) (*g)[c] += static_cast<Real>(sum_dy[c]);
        }
        Tensor* gx = ctx.grad(0);
        if (!gx) return;
        const double n = static_cast<double>(count);
        for (int b = 0; b < s.n; ++b)
            for (int c = 0; c < s.c; ++c) {
                const std::size_t base = (static_cast<std::size_t>(b) * s.c + c) * plane;
                const double k = static_cast<double>(gamma[c]) * (*inv_std)[c];
                if (!training) {
                    for (std::size_t i = 0; i < plane; ++i) (*gx)[base + i] += static_cast<Real>(k * go[base + i]);
                    continue;
                }
                const double m_dy = sum_dy[c] / n;
                const double m_dyx = sum_dy_xhat[c] / n;
                for (std::size_t i = 0; i < plane; ++i)
                    (*gx)[base + i] += static_cast<Real>(k * (go[base + i] - m_dy - (*xhat)[base + i] * m_dyx));
            }
    });
}

Var softmax(Var logits) {
    Tensor out(logits.shape(), softmax(logits.value().data()));
    return logits.tape().record(std::move(out), {logits}, [](BackwardContext& ctx) {
        Tensor* g = ctx.grad(0);
        if (!g) return;
        // Output value is recomputed from the input: p = softmax(logits).
        const std::vector<Real> p = softmax(ctx.input(0).data());
        const Tensor& go = ctx.grad_output();
        double inner = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) inner += static_cast<double>(go[i]) * p[i];
        for (std::size_t i = 0; i < p.size(); ++i) (*g)[i] += static_cast<Real>(p[i] * (go[i] - inner));
    });
}

Var mix(std::span<const Var> terms, Var weights) {
    Tape& tape = common_tape(terms);
    if (weights.value().size() != terms.size())
        throw ConfigError("mix: " + std::to_string(terms.size()) + " terms but " +
                          std::to_string(weights.value().size()) + " weights");
    const Shape s = terms.front().shape();
    Tensor out(s);
    const Tensor& w = weights.value();
    for (std::size_t k = 0; k < terms.size(); ++k) {
        require_same_shape(terms[k].shape(), s, "mix");
        const Tensor& y = terms[k].value();
        const Real wk = w[k];
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += wk * y[i];
    }
    std::vector<Var> parents(terms.begin(), terms.end());
    parents.push_back(weights);
    const std::size_t K = terms.size();
    return tape.record(std::move(out), parents, [K](BackwardContext& ctx) {
        const Tensor& go = ctx.grad_output();
        const Tensor& w = ctx.input(K);
        Tensor* gw = ctx.grad(K);
        for (std::size_t k = 0; k < K; ++k) {
            if (Tensor* g = ctx.grad(k)) {
                const Real wk = w[k];
                for (std::size_t i = 0; i < go.size(); ++i) (*g)[i] += wk * go[i];
            }
            if (gw) (*gw)[k] += static_cast<Real>(kernels::dot(go.ptr(), ctx.input(k).ptr(), go.size()));
        }
    });
}

Var concat_channels(std::span<const Var> parts) {
    Tape& tape = common_tape(parts);
    const Shape first = parts.front().shape();
    int channels = 0;
    for (const Var& p : parts) {
        const Shape s = p.shape();
        if (s.n != first.n || s.h != first.h || s.w != first.w)
            throw ConfigError("concat_channels: spatial/batch mismatch " + s.str() + " vs " + first.str());
        channels += s.c;
    }
    const Shape os{first.n, channels, first.h, first.w};
    Tensor out(os);
    const std::size_t plane = os.plane();
    std::vector<int> offsets;
    int at = 0;
    for (const Var& p : parts) {
        offsets.push_back(at);
        const Tensor& v = p.value();
        for (int b = 0; b < os.n; ++b)
            std::copy_n(v.ptr() + static_cast<std::size_t>(b) * v.shape().c * plane,
                        static_cast<std::size_t>(v.shape().c) * plane,
                        out.ptr() + (static_cast<std::size_t>(b) * os.c + at) * plane);
        at += p.shape().c;
    }
    return tape.record(std::move(out), parts, [offsets, os, plane](BackwardContext& ctx) {
        const Tensor& go = ctx.grad_output();
        for (std::size_t k = 0; k < offsets.size(); ++k) {
            Tensor* g = ctx.grad(k);
            if (!g) continue;
            const int c = g->shape().c;
            for (int b = 0; b < os.n; ++b) {
                const Real* src = go.ptr() + (static_cast<std::size_t>(b) * os.c + offsets[k]) * plane;
                Real* dst = g->ptr() + static_cast<std::size_t>(b) * c * plane;
                for (std::size_t i = 0; i < static_cast<std::size_t>(c) * plane; ++i) dst[i] += src[i];
            }
        }
    });
}

Var slice_channels(Var x, int begin, int end) {
    const Shape s = x.shape();
    if (begin < 0 || end > s.c || begin > end)
        throw ConfigError("slice_channels: [" + std::to_string(begin) + "," + std::to_string(end) +
                          ") out of range for " + std::to_string(s.c) + " channels");
    const Shape os{s.n, end - begin, s.h, s.w};
    const std::size_t plane = s.plane();
    Tensor out(os);
    for (int b = 0; b < s.n; ++b)
        std::copy_n(x.value().ptr() + (static_cast<std::size_t>(b) * s.c + begin) * plane,
                    static_cast<std::size_t>(os.c) * plane, out.ptr() + static_cast<std::size_t>(b) * os.c * plane);
    return x.tape().record(std::move(out), {x}, [s, os, begin, plane](BackwardContext& ctx) {
        Tensor* g = ctx.grad(0);
        if (!g) return;
        const Tensor& go = ctx.grad_output();
        for (int b = 0; b < s.n; ++b) {
            const Real* src = go.ptr() + static_cast<std::size_t>(b) * os.c * plane;
            Real* dst = g->ptr() + (static_cast<std::size_t>(b) * s.c + begin) * plane;
            for (std::size_t i = 0; i < static_cast<std::size_t>(os.c) * plane; ++i) dst[i] += src[i];
        }
    });
}

Var subsample(Var x, int stride, int offset) {
    const Shape s = x.shape();
    if (stride < 1 || offset < 0 || offset >= s.h || offset >= s.w)
        throw ConfigError("subsample: invalid stride/offset for " + s.str());
    const Shape os{s.n, s.c, (s.h - offset + stride - 1) / stride, (s.w - offset + stride - 1) / stride};
    Tensor out(os);
    const Tensor& in = x.value();
    for (int p = 0; p < s.n * s.c; ++p)
        for (int y = 0; y < os.h; ++y)
            for (int xx = 0; xx < os.w; ++xx)
                out[(static_cast<std::size_t>(p) * os.h + y) * os.w + xx] =
                    in[(static_cast<std::size_t>(p) * s.h + offset + y * stride) * s.w + offset + xx * stride];
    return x.tape().record(std::move(out), {x}, [s, os, stride, offset](BackwardContext& ctx) {
        Tensor* g = ctx.grad(0);
        if (!g) return;
        const Tensor& go = ctx.grad_output();
        for (int p = 0; p < s.n * s.c; ++p)
            for (int y = 0; y < os.h; ++y)
                for (int xx = 0; xx < os.w; ++xx)
                    (*g)[(static_cast<std::size_t>(p) * s.h + offset + y * stride) * s.w + offset + xx * stride] +=
                        go[(static_cast<std::size_t>(p) * os.h + y) * os.w + xx];
    });
}

Var global_avg_pool(Var x) {
    const Shape s = x.shape();
    const std::size_t plane = s.plane();
    if (plane == 0) throw ConfigError("global_avg_pool: zero-sized spatial input");
    Tensor out({s.n, s.c, 1, 1});
    for (int p = 0; p < s.n * s.c; ++p) {
        double acc = 0.0;
        const Real* src = x.value().ptr() + static_cast<std::size_t>(p) * plane;
        for (std::size_t i = 0; i < plane; ++i) acc += src[i];
        out[p] = static_cast<Real>(acc / static_cast<double>(plane));
    }
    return x.tape().record(std::move(out), {x}, [s, plane](BackwardContext& ctx) {
        Tensor* g = ctx.grad(0);
        if (!g) return;
        const Tensor& go = ctx.grad_output();
        for (int p = 0; p < s.n * s.c; ++p) {
            const Real share = go[p] / static_cast<Real>(plane);
            Real* dst = g->ptr() + static_cast<std::size_t>(p) * plane;
            for (std::size_t i = 0; i < plane; ++i) dst[i] += share;
        }
    });
}

Var linear(Var x, Var weight, Var bias) {
    const Shape xs = x.shape();
    const Shape ws = weight.shape();
    if (xs.h != 1 || xs.w != 1 || ws.h != 1 || ws.w != 1 || ws.c != xs.c)
        throw ConfigError("linear: input " + xs.str() + " incompatible with weight " + ws.str());
    require_same_shape(bias.shape(), Shape{1, ws.n, 1, 1}, "linear bias");
    const int in = xs.c;
    const int outf = ws.n;
    Tensor out({xs.n, outf, 1, 1});
    for (int b = 0; b < xs.n; ++b)
        for (int o = 0; o < outf; ++o)
            out[static_cast<std::size_t>(b) * outf + o] = static_cast<Real>(
                bias.value()[o] + kernels::dot(x.value().ptr() + static_cast<std::size_t>(b) * in,
                                               weight.value().ptr() + static_cast<std::size_t>(o) * in, in));
    return x.tape().record(std::move(out), {x, weight, bias}, [xs, in, outf](BackwardContext& ctx) {
        const Tensor& go = ctx.grad_output();
        if (Tensor* g = ctx.grad(0)) {
            const Tensor& w = ctx.input(1);
            for (int b = 0; b < xs.n; ++b)
                for (int o = 0; o < outf; ++o) {
                    const Real gv = go[static_cast<std::size_t>(b) * outf + o];
                    for (int i = 0; i < in; ++i)
                        (*g)[static_cast<std::size_t>(b) * in + i] += gv * w[static_cast<std::size_t>(o) * in + i];
                }
        }
        if (Tensor* g = ctx.grad(1)) {
            const Tensor& xv = ctx.input(0);
            for (int o = 0; o < outf; ++o)
                for (int i = 0; i < in; ++i) {
                    double acc = 0.0;
                    for (int b = 0; b < xs.n; ++b)
                        acc += static_cast<double>(go[static_cast<std::size_t>(b) * outf + o]) *
                               xv[static_cast<std::size_t>(b) * in + i];
                    (*g)[static_cast<std::size_t>(o) * in + i] += static_cast<Real>(acc);
                }
        }
        if (Tensor* g = ctx.grad(2)) {
            for (int o = 0; o < outf; ++o) {
                double acc = 0.0;
                for (int b = 0; b < xs.n; ++b) acc += go[static_cast<std::size_t>(b) * outf + o];
                (*g)[o] += static_cast<Real>(acc);
            }
        }
    });
}

Var cross_entropy(Var logits, std::span<const int> labels) {
    const Shape s = logits.shape();
    if (s.h != 1 || s.w != 1) throw ConfigError("cross_entropy: logits must be (n, k, 1, 1), got " + s.str());
    if (static_cast<int>(labels.size()) != s.n || s.n == 0)
        throw ConfigError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch " + std::to_string(s.n));
    const int K = s.c;
    auto probs = std::make_shared<std::vector<Real>>(static_cast<std::size_t>(s.n) * K);
    double loss = 0.0;
    for (int b = 0; b < s.n; ++b) {
        if (labels[b] < 0 || labels[b] >= K) throw ConfigError("cross_entropy: label out of range");
        const std::span<const Real> row(logits.value().ptr() + static_cast<std::size_t>(b) * K, K);
        const std::vector<Real> p = softmax(row);
        std::copy(p.begin(), p.end(), probs->begin() + static_cast<std::ptrdiff_t>(b) * K);
        const Real m = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (Real v : row) z += std::exp(static_cast<double>(v - m));
        loss += std::log(z) + m - row[labels[b]];
    }
    std::vector<int> lab(labels.begin(), labels.end());
    return logits.tape().record(
        Tensor::scalar(static_cast<Real>(loss / s.n)), {logits}, [probs, lab, K](BackwardContext& ctx) {
            Tensor* g = ctx.grad(0);
            if (!g) return;
            const Real scale_ = ctx.grad_output()[0] / static_cast<Real>(lab.size());
            for (std::size_t b = 0; b < lab.size(); ++b)
                for (int k = 0; k < K; ++k) {
                    const std::size_t i = b * K + k;
                    (*g)[i] += scale_ * ((*probs)[i] - (k == lab[b] ? Real(1) : Real(0)));
                }
        });
}

} // namespace aca
