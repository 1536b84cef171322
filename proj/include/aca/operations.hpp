// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <optional>
#include <string>

#include "aca/param_store.hpp"
#include "aca/search_space.hpp"

namespace aca {

struct BlockOptions {
    /// Learnable per-channel scale/shift in normalization layers.
    bool affine = false;
    /// 1 or 2 relu-depthwise-pointwise-norm stages for non-dilated SepConv.
    int sepconv_repeats = 1;
    /// Affine-free normalization after pooling (super-net only).
    bool norm_after_pool = false;
};

std::size_t conv_param_count(int in_channels, int out_channels, int kernel, int groups);
std::size_t conv_mac_count(const Shape& output, int in_channels, int kernel, int groups);

class Norm {
public:
    Norm() = default;
    Norm(ParamStore& store, std::string name, int channels, bool affine);

    Var forward(Var x, ParamBinding& params, bool training) const;
    std::size_t param_count() const noexcept { return affine_ ? 2 * static_cast<std::size_t>(channels_) : 0; }

private:
    std::string name_;
    int channels_ = 0;
    bool affine_ = false;
};

/// relu -> k x k conv -> norm.
class ReluConvNorm {
public:
    ReluConvNorm(ParamStore& store, Rng& rng, const std::string& name, int in_channels, int out_channels, int kernel,
                 int stride, bool affine);

    Var forward(Var x, ParamBinding& params, bool training) const;
    std::size_t param_count() const;
    std::size_t mac_count(const Shape& input) const;

private:
    std::string name_;
    int in_ = 0, out_ = 0, kernel_ = 1, stride_ = 1;
    Norm norm_;
};

/// Channel-preserving strided reduction: relu, then two 1x1 paths on the
/// stride-2 subsamplings at pixel offsets 0 and 1, concatenated, then norm.
/// The first path produces out - out/2 channels, the second out/2.
class FactorizedReduce {
public:
    FactorizedReduce(ParamStore& store, Rng& rng, const std::string& name, int in_channels, int out_channels,
                     bool affine);

    /// `relu_x`, when given, must equal relu(x) and is reused.
    Var forward(Var x, ParamBinding& params, bool training, const Var* relu_x = nullptr) const;
    std::size_t param_count() const;
    std::size_t mac_count(const Shape& input) const;

private:
    std::string name_;
    int in_ = 0, out_ = 0;
    Norm norm_;
};

/// One candidate operation instance with private weights. Maps in_channels to
/// out_channels (<= in_channels); non-convolutional kinds act on the first
/// out_channels input channels.
class Operation {
public:
    Operation(OpKind kind, ParamStore& store, Rng& rng, const std::string& name, int in_channels, int out_channels,
              int stride, const BlockOptions& options);

    OpKind kind() const noexcept { return kind_; }
    int stride() const noexcept { return stride_; }
    int out_channels() const noexcept { return out_; }

    /// `relu_x`, when given, must equal relu(x); candidates on one edge share it.
    Var forward(Var x, ParamBinding& params, bool training, const Var* relu_x = nullptr) const;
    std::size_t param_count() const;
    std::size_t mac_count(const Shape& input) const;

private:
    struct ConvStage {
        std::string dw, pw;
        int in = 0, out = 0, stride = 1;
        Norm norm;
    };

    OpKind kind_;
    std::string name_;
    int in_ = 0, out_ = 0, stride_ = 1;
    int kernel_ = 3, dilation_ = 1;
    std::vector<ConvStage> stages_;
    std::optional<Norm> pool_norm_;
    std::shared_ptr<FactorizedReduce> reduce_;
};

/// o_k(w, x): forwards `x` through `op` on the tape of `x`.
Var apply_operation(const Operation& op, Var x, ParamBinding& params, bool training);

} // namespace aca
