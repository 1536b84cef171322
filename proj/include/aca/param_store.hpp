// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "aca/autodiff.hpp"
#include "aca/rng.hpp"

namespace aca {

/// Named learnable tensors plus normalization running statistics.
class ParamStore {
public:
    /// Registers a new parameter; names must be unique.
    Tensor& add(const std::string& name, Tensor init);
    RunningStats& add_stats(const std::string& name, int channels);

    bool contains(const std::string& name) const { return params_.count(name) != 0; }
    Tensor& value(const std::string& name);
    const Tensor& value(const std::string& name) const;
    RunningStats& stats(const std::string& name);
    const RunningStats& stats(const std::string& name) const;

    const std::map<std::string, Tensor>& params() const noexcept { return params_; }
    std::map<std::string, Tensor>& params() noexcept { return params_; }
    const std::map<std::string, RunningStats>& all_stats() const noexcept { return stats_; }
    std::map<std::string, RunningStats>& all_stats() noexcept { return stats_; }

    std::size_t param_count() const;
    /// FNV-1a over names and raw value bytes, for determinism checks.
    std::uint64_t checksum() const;

private:
    std::map<std::string, Tensor> params_;
    std::map<std::string, RunningStats> stats_;
};

/// He-normal initialization for a conv kernel of shape (out, in/groups, k, k).
Tensor he_normal(Shape kernel_shape, Rng& rng);

/// Binds store entries onto a tape lazily, one leaf per name.
class ParamBinding {
public:
    ParamBinding(Tape& tape, ParamStore& store, bool trainable) : tape_(tape), store_(store), trainable_(trainable) {}

    Var operator()(const std::string& name);
    RunningStats& stats(const std::string& name) { return store_.stats(name); }
    const std::map<std::string, Var>& bound() const noexcept { return bound_; }
    Tape& tape() noexcept { return tape_; }

private:
    Tape& tape_;
    ParamStore& store_;
    bool trainable_;
    std::map<std::string, Var> bound_;
};

} // namespace aca
