// SPDX-License-Identifier: Apache-2.0
#include "aca/operations.hpp"

namespace aca {

std::size_t conv_param_count(int in_channels, int out_channels, int kernel, int groups) {
    return static_cast<std::size_t>(out_channels) * (in_channels / groups) * kernel * kernel;
}

std::size_t conv_mac_count(const Shape& output, int in_channels, int kernel, int groups) {
    return output.numel() * static_cast<std::size_t>(in_channels / groups) * kernel * kernel;
}

Norm::Norm(ParamStore& store, std::string name, int channels, bool affine)
    : name_(std::move(name)), channels_(channels), affine_(affine) {
    store.add_stats(name_, channels);
    if (affine) {
        store.add(name_ + ".scale", Tensor({1, channels, 1, 1}, Real(1)));
        store.add(name_ + ".shift", Tensor({1, channels, 1, 1}, Real(0)));
    }
}

Var Norm::forward(Var x, ParamBinding& params, bool training) const {
    NormOptions opt;
    opt.training = training;
    opt.running = &params.stats(name_);
    Var gamma, beta;
    if (affine_) {
        gamma = params(name_ + ".scale");
        beta = params(name_ + ".shift");
        opt.scale = &gamma;
        opt.shift = &beta;
    }
    return normalize(x, opt);
}

ReluConvNorm::ReluConvNorm(ParamStore& store, Rng& rng, const std::string& name, int in_channels, int out_channels,
                           int kernel, int stride, bool affine)
    : name_(name), in_(in_channels), out_(out_channels), kernel_(kernel), stride_(stride) {
    store.add(name + ".conv", he_normal({out_channels, in_channels, kernel, kernel}, rng));
    norm_ = Norm(store, name + ".bn", out_channels, affine);
}

Var ReluConvNorm::forward(Var x, ParamBinding& params, bool training) const {
    Var y = conv2d(relu(x), params(name_ + ".conv"), {stride_, 1, (kernel_ - 1) / 2, 1});
    return norm_.forward(y, params, training);
}

std::size_t ReluConvNorm::param_count() const {
    return conv_param_count(in_, out_, kernel_, 1) + norm_.param_count();
}

std::size_t ReluConvNorm::mac_count(const Shape& input) const {
    const Shape out{input.n, out_, (input.h + stride_ - 1) / stride_, (input.w + stride_ - 1) / stride_};
    return conv_mac_count(out, in_, kernel_, 1);
}

FactorizedReduce::FactorizedReduce(ParamStore& store, Rng& rng, const std::string& name, int in_channels,
                                   int out_channels, bool affine)
    : name_(name), in_(in_channels), out_(out_channels) {
    if (out_channels < 1) throw ConfigError("FactorizedReduce: needs at least one output channel");
    store.add(name + ".conv1", he_normal({out_channels - out_channels / 2, in_channels, 1, 1}, rng));
    if (out_channels / 2 > 0) store.add(name + ".conv2", he_normal({out_channels / 2, in_channels, 1, 1}, rng));
    norm_ = Norm(store, name + ".bn", out_channels, affine);
}

Var FactorizedReduce::forward(Var x, ParamBinding& params, bool training, const Var* relu_x) const {
    const Shape s = x.shape();
    if (s.h % 2 != 0 || s.w % 2 != 0)
        throw ConfigError("FactorizedReduce: spatial size must be even, got " + s.str());
    Var r = relu_x ? *relu_x : relu(x);
    Var a = conv2d(subsample(r, 2, 0), params(name_ + ".conv1"), {});
    if (out_ / 2 == 0) return norm_.forward(a, params, training);
    Var b = conv2d(subsample(r, 2, 1), params(name_ + ".conv2"), {});
    const Var parts[] = {a, b};
    return norm_.forward(concat_channels(parts), params, training);
}

std::size_t FactorizedReduce::param_count() const {
    return conv_param_count(in_, out_, 1, 1) + norm_.param_count();
}

std::size_t FactorizedReduce::mac_count(const Shape& input) const {
    const Shape out{input.n, out_, input.h / 2, input.w / 2};
    return conv_mac_count(out, in_, 1, 1);
}

Operation::Operation(OpKind kind, ParamStore& store, Rng& rng, const std::string& name, int in_channels,
                     int out_channels, int stride, const BlockOptions& options)
    : kind_(kind), name_(name), in_(in_channels), out_(out_channels), stride_(stride), kernel_(op_kernel(kind)),
      dilation_(op_dilation(kind)) {
    if (stride != 1 && stride != 2) throw ConfigError("operation stride must be 1 or 2");
    if (out_channels < 1 || out_channels > in_channels)
        throw ConfigError("operation '" + name + "': output channels " + std::to_string(out_channels) +
                          " outside [1, " + std::to_string(in_channels) + "]");
    if (options.sepconv_repeats != 1 && options.sepconv_repeats != 2)
        throw ConfigError("sepconv_repeats must be 1 or 2");

    if (is_parametric(kind)) {
        const bool dilated = dilation_ > 1;
        const int repeats = dilated ? 1 : options.sepconv_repeats;
        for (int r = 0; r < repeats; ++r) {
            ConvStage st;
            const std::string suffix = r == 0 ? "" : std::to_string(r + 1);
            st.dw = name + ".dw" + suffix;
            st.pw = name + ".pw" + suffix;
            st.in = in_channels;
            st.out = r + 1 == repeats ? out_channels : in_channels;
            st.stride = r == 0 ? stride : 1;
            store.add(st.dw, he_normal({in_channels, 1, kernel_, kernel_}, rng));
            store.add(st.pw, he_normal({st.out, in_channels, 1, 1}, rng));
            st.norm = Norm(store, name + ".bn" + suffix, st.out, options.affine);
            stages_.push_back(std::move(st));
        }
    } else if (kind == OpKind::MaxPool3x3 || kind == OpKind::AvgPool3x3) {
        if (options.norm_after_pool) pool_norm_.emplace(store, name + ".bn", out_channels, false);
    } else if (kind == OpKind::SkipConnect && stride == 2) {
        reduce_ = std::make_shared<FactorizedReduce>(store, rng, name + ".reduce", out_channels, out_channels,
                                                     options.affine);
    }
}

Var Operation::forward(Var x, ParamBinding& params, bool training, const Var* relu_x) const {
    const Shape s = x.shape();
    if (s.c != in_)
        throw ConfigError("operation '" + name_ + "' expects " + std::to_string(in_) + " channels, got " + s.str());
    auto narrowed = [&](Var v) { return out_ == in_ ? v : slice_channels(v, 0, out_); };

    switch (kind_) {
    case OpKind::Zero: {
        const Shape os{s.n, out_, (s.h + stride_ - 1) / stride_, (s.w + stride_ - 1) / stride_};
        return x.tape().constant(Tensor(os));
    }
    case OpKind::SkipConnect:
        if (stride_ == 1) return narrowed(x);
        return reduce_->forward(narrowed(x), params, training, out_ == in_ ? relu_x : nullptr);
    case OpKind::MaxPool3x3:
    case OpKind::AvgPool3x3: {
        const PoolMode mode = kind_ == OpKind::MaxPool3x3 ? PoolMode::max : PoolMode::average;
        Var y = pool2d(narrowed(x), mode, 3, stride_, 1);
        return pool_norm_ ? pool_norm_->forward(y, params, training) : y;
    }
    default:
        break;
    }

    Var y = x;
    for (std::size_t i = 0; i < stages_.size(); ++i) {
        const ConvStage& st = stages_[i];
        const int pad = dilation_ * (kernel_ - 1) / 2;
        const Var r = i == 0 && relu_x ? *relu_x : relu(y);
        y = conv2d(r, params(st.dw), {st.stride, dilation_, pad, st.in});
        y = conv2d(y, params(st.pw), {});
        y = st.norm.forward(y, params, training);
    }
    return y;
}

std::size_t Operation::param_count() const {
    std::size_t n = 0;
    for (const ConvStage& st : stages_)
        n += conv_param_count(st.in, st.in, kernel_, st.in) + conv_param_count(st.in, st.out, 1, 1) +
             st.norm.param_count();
    if (reduce_) n += reduce_->param_count();
    return n;
}

std::size_t Operation::mac_count(const Shape& input) const {
    const Shape reduced{input.n, in_, (input.h + stride_ - 1) / stride_, (input.w + stride_ - 1) / stride_};
    std::size_t n = 0;
    for (const ConvStage& st : stages_) {
        n += conv_mac_count({reduced.n, st.in, reduced.h, reduced.w}, st.in, kernel_, st.in);
        n += conv_mac_count({reduced.n, st.out, reduced.h, reduced.w}, st.in, 1, 1);
    }
    if (reduce_) n += reduce_->mac_count({input.n, out_, input.h, input.w});
    return n;
}

Var apply_operation(const Operation& op, Var x, ParamBinding& params, bool training) {
    return op.forward(x, params, training);
}

} // namespace aca
