// SPDX-License-Identifier: Apache-2.0
#include "aca/param_store.hpp"

#include <cmath>
#include <cstring>

namespace aca {

Tensor& ParamStore::add(const std::string& name, Tensor init) {
    auto [it, inserted] = params_.emplace(name, std::move(init));
    if (!inserted) throw ConfigError("duplicate parameter name '" + name + "'");
    return it->second;
}

RunningStats& ParamStore::add_stats(const std::string& name, int channels) {
    auto [it, inserted] = stats_.emplace(name, RunningStats(channels));
    if (!inserted) throw ConfigError("duplicate statistics name '" + name + "'");
    return it->second;
}

Tensor& ParamStore::value(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("missing parameter '" + name + "'");
    return it->second;
}

const Tensor& ParamStore::value(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("missing parameter '" + name + "'");
    return it->second;
}

RunningStats& ParamStore::stats(const std::string& name) {
    auto it = stats_.find(name);
    if (it == stats_.end()) throw ConfigError("missing statistics '" + name + "'");
    return it->second;
}

const RunningStats& ParamStore::stats(const std::string& name) const {
    auto it = stats_.find(name);
    if (it == stats_.end()) throw ConfigError("missing statistics '" + name + "'");
    return it->second;
}

std::size_t ParamStore::param_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : params_) n += t.size();
    return n;
}

std::uint64_t ParamStore::checksum() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ULL;
        }
    };
    for (const auto& [name, t] : params_) {
        mix(name.data(), name.size());
        mix(t.ptr(), t.size() * sizeof(Real));
    }
    for (const auto& [name, s] : stats_) {
        mix(name.data(), name.size());
        mix(s.mean.data(), s.mean.size() * sizeof(Real));
        mix(s.var.data(), s.var.size() * sizeof(Real));
    }
    return h;
}

Tensor he_normal(Shape kernel_shape, Rng& rng) {
    Tensor t(kernel_shape);
    const double fan_in = static_cast<double>(kernel_shape.c) * kernel_shape.h * kernel_shape.w;
    const double std = std::sqrt(2.0 / fan_in);
    for (auto& v : t.data()) v = static_cast<Real>(rng.normal() * std);
    return t;
}

Var ParamBinding::operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    Var v = tape_.leaf(store_.value(name), trainable_);
    bound_.emplace(name, v);
    return v;
}

} // namespace aca
