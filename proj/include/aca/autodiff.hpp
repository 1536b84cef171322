// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "aca/kernels.hpp"
#include "aca/tensor.hpp"

namespace aca {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    Tape& tape() const;
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }
    bool requires_grad() const;

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = std::numeric_limits<std::size_t>::max();
};

/// Accumulated gradients, indexed by tape node.
class Gradients {
public:
    bool has(Var v) const noexcept { return v.id() < grads_.size() && grads_[v.id()].size() > 0; }
    /// Throws UsageError when `v` received no gradient.
    const Tensor& of(Var v) const;

private:
    friend class Tape;
    std::vector<Tensor> grads_;
};

/// Access handed to a node's backward function.
class BackwardContext {
public:
    const Tensor& grad_output() const noexcept { return *grad_out_; }
    const Tensor& input(std::size_t i) const;
    /// Gradient buffer for parent i (zero-initialized on first use), or nullptr
    /// when that parent does not require a gradient.
    Tensor* grad(std::size_t i);

private:
    friend class Tape;
    BackwardContext(Tape& tape, std::span<const std::size_t> parents, const Tensor& grad_out)
        : tape_(tape), parents_(parents), grad_out_(&grad_out) {}

    Tape& tape_;
    std::span<const std::size_t> parents_;
    const Tensor* grad_out_;
};

using BackwardFn = std::function<void(BackwardContext&)>;

/// Reverse-mode gradient tape. Nodes are appended in evaluation order, so the
/// node list is always topologically sorted.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor value, bool requires_grad = true);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    /// Appends a node computed from `parents`. The backward function is kept
    /// only when some parent requires a gradient.
    Var record(Tensor value, std::span<const Var> parents, BackwardFn backward);
    Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward) {
        return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(backward));
    }

    const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
    bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. `loss` must be
    /// a single-element tensor recorded on this tape.
    Gradients backward(Var loss);

private:
    friend class BackwardContext;
    struct Node {
        Tensor value;
        std::vector<std::size_t> parents;
        BackwardFn backward;
        bool requires_grad = false;
    };

    std::deque<Node> nodes_;  // stable addresses: Var::value() references survive appends
    std::vector<Tensor>* active_grads_ = nullptr;
};

// Differentiable primitives. All inputs must live on the same tape; shapes must
// match exactly except where noted.

Var add(Var a, Var b);
Var add_n(std::span<const Var> terms);
Var mul(Var a, Var b);
Var scale(Var a, Real factor);
Var relu(Var x);
Var sum(Var x);

struct ConvParams {
    int stride = 1;
    int dilation = 1;
    int padding = 0;
    int groups = 1;
};
Var conv2d(Var input, Var kernel, const ConvParams& params);

Var pool2d(Var input, PoolMode mode, int window, int stride, int padding);

/// Running statistics of one normalization layer.
struct RunningStats {
    std::vector<Real> mean;
    std::vector<Real> var;
    explicit RunningStats(int channels = 0) : mean(channels, Real(0)), var(channels, Real(1)) {}
};

inline constexpr Real kNormEpsilon = Real(1e-5);
inline constexpr Real kNormMomentum = Real(0.1);

struct NormOptions {
    bool training = true;
    /// Updated in training mode, consumed in inference mode. May be null in
    /// training mode.
    RunningStats* running = nullptr;
    /// Optional per-channel affine parameters of shape (1, C, 1, 1).
    const Var* scale = nullptr;
    const Var* shift = nullptr;
};
Var normalize(Var input, const NormOptions& options);

/// Softmax over every element of the tensor.
Var softmax(Var logits);
/// sum_k weights[k] * terms[k]; weights has terms.size() elements.
Var mix(std::span<const Var> terms, Var weights);

Var concat_channels(std::span<const Var> parts);
Var slice_channels(Var x, int begin, int end);
/// Keeps pixels at (offset + stride*i, offset + stride*j).
Var subsample(Var x, int stride, int offset);
/// (n, c, h, w) -> (n, c, 1, 1).
Var global_avg_pool(Var x);
/// x: (n, in, 1, 1), weight: (out, in, 1, 1), bias: (1, out, 1, 1) -> (n, out, 1, 1).
Var linear(Var x, Var weight, Var bias);
/// Mean softmax cross-entropy of logits (n, k, 1, 1) against labels.
Var cross_entropy(Var logits, std::span<const int> labels);

/// Max-subtracted softmax; throws ConfigError on empty input.
std::vector<Real> softmax(std::span<const Real> logits);

} // namespace aca
