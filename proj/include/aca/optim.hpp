// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "aca/param_store.hpp"

namespace aca {

/// Cosine decay from `base` at epoch 0 to 0 at epoch `epochs - 1`.
double cosine_lr(double base, int epoch, int epochs);

/// SGD with heavy-ball momentum and L2 weight decay folded into the gradient:
///   v = momentum * v + (g + decay * w);  w -= lr * v
class Sgd {
public:
    Sgd(double momentum, double weight_decay) : momentum_(momentum), decay_(weight_decay) {}

    /// Updates every bound entry of `store` that received a gradient.
    void step(ParamStore& store, const ParamBinding& binding, const Gradients& grads, double lr);

private:
    double momentum_;
    double decay_;
    std::map<std::string, std::vector<Real>> velocity_;
};

/// Adam with bias correction and L2 weight decay folded into the gradient.
class Adam {
public:
    Adam(double beta1, double beta2, double weight_decay, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), decay_(weight_decay), eps_(eps) {}

    void step(ParamStore& store, const ParamBinding& binding, const Gradients& grads, double lr);

private:
    struct Moments {
        std::vector<double> m, v;
    };
    double beta1_, beta2_, decay_, eps_;
    long steps_ = 0;
    std::map<std::string, Moments> moments_;
};

} // namespace aca
