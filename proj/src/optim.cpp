// SPDX-License-Identifier: Apache-2.0
#include "aca/optim.hpp"

#include <cmath>
#include <numbers>

namespace aca {

double cosine_lr(double base, int epoch, int epochs) {
    if (epochs <= 1) return base;
    const double t = static_cast<double>(epoch) / static_cast<double>(epochs - 1);
    return 0.5 * base * (1.0 + std::cos(std::numbers::pi * t));
}

void Sgd::step(ParamStore& store, const ParamBinding& binding, const Gradients& grads, double lr) {
    for (const auto& [name, var] : binding.bound()) {
        if (!grads.has(var)) continue;
        const Tensor& g = grads.of(var);
        Tensor& w = store.value(name);
        auto& v = velocity_[name];
        if (v.empty()) v.assign(w.size(), Real(0));
        const Real mu = static_cast<Real>(momentum_);
        const Real wd = static_cast<Real>(decay_);
        const Real rate = static_cast<Real>(lr);
        for (std::size_t i = 0; i < w.size(); ++i) {
            v[i] = mu * v[i] + (g[i] + wd * w[i]);
            w[i] -= rate * v[i];
        }
    }
}

void Adam::step(ParamStore& store, const ParamBinding& binding, const Gradients& grads, double lr) {
    ++steps_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
    for (const auto& [name, var] : binding.bound()) {
        if (!grads.has(var)) continue;
        const Tensor& g = grads.of(var);
        Tensor& w = store.value(name);
        auto& mo = moments_[name];
        if (mo.m.empty()) {
            mo.m.assign(w.size(), 0.0);
            mo.v.assign(w.size(), 0.0);
        }
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = static_cast<double>(g[i]) + decay_ * static_cast<double>(w[i]);
            mo.m[i] = beta1_ * mo.m[i] + (1.0 - beta1_) * gi;
            mo.v[i] = beta2_ * mo.v[i] + (1.0 - beta2_) * gi * gi;
            const double mhat = mo.m[i] / c1;
            const double vhat = mo.v[i] / c2;
            w[i] = static_cast<Real>(static_cast<double>(w[i]) - lr * mhat / (std::sqrt(vhat) + eps_));
        }
    }
}

} // namespace aca
