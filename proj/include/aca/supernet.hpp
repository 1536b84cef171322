// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aca/checkpoint.hpp"
#include "aca/macro.hpp"

namespace aca {

/// Architecture parameters: one row of |ops| logits per edge, one matrix per
/// cell type, shared by all cells of that type.
class ArchParams {
public:
    ArchParams() = default;
    ArchParams(int edges, int ops);
    /// Independent N(0, stddev^2) entries.
    static ArchParams gaussian(int edges, int ops, Rng& rng, double stddev = 1e-3);

    int edges() const noexcept { return edges_; }
    int ops() const noexcept { return ops_; }

    static std::string row_name(CellType type, int edge);
    std::span<Real> row(CellType type, int edge);
    std::span<const Real> row(CellType type, int edge) const;

    ParamStore& store() noexcept { return store_; }
    const ParamStore& store() const noexcept { return store_; }
    bool all_finite() const;

    /// Rank-2 (edges, ops) arrays named alpha.normal / alpha.reduce.
    std::vector<NamedArray> to_arrays() const;
    static ArchParams from_arrays(const std::vector<NamedArray>& arrays);

    bool operator==(const ArchParams& other) const;

private:
    int edges_ = 0;
    int ops_ = 0;
    ParamStore store_;
};

/// Operation strengths of one edge: softmax of its alpha row.
std::vector<Real> strengths(const ArchParams& arch, CellType type, int edge);

struct SuperNetConfig {
    SpaceId space = SpaceId::S6;
    int repeats = 1;
    int nodes = 4;
    int init_channels = 8;
    int in_channels = 3;
    int num_classes = 3;
    int sepconv_repeats = 1;
};

/// Parameter bindings for one forward pass.
struct SuperNetPass {
    ParamBinding& weights;
    ParamBinding& alphas;
    bool training = true;
};

class SuperNet {
public:
    /// Weights and alpha are drawn from independent streams derived from `seed`.
    SuperNet(const SuperNetConfig& config, std::uint64_t seed);

    const SuperNetConfig& config() const noexcept { return config_; }
    const SearchSpace& space() const noexcept { return space_; }
    const CellTopology& topology() const noexcept { return topology_; }
    const NetworkLayout& layout() const noexcept { return skeleton_.layout(); }
    const Skeleton& skeleton() const noexcept { return skeleton_; }

    ArchParams& arch() noexcept { return arch_; }
    const ArchParams& arch() const noexcept { return arch_; }
    ParamStore& weights() noexcept { return weights_; }
    const ParamStore& weights() const noexcept { return weights_; }

    const Operation& operation(int cell, int edge, int k) const;
    /// Stride of an edge: 2 for edges leaving the inputs of a reduction cell.
    int edge_stride(int cell, int edge) const;

    /// Softmax strengths of (cell type, edge) as a tape value (1, K, 1, 1).
    Var edge_strengths(CellType type, int edge, SuperNetPass& pass) const;
    /// sum_k p_k * o_k(w_k, x).
    Var mixed_edge_forward(int cell, int edge, Var x, SuperNetPass& pass) const;
    /// Intermediate nodes from preprocessed inputs; returns the concat of all nodes.
    Var cell_body(int cell, Var in0, Var in1, SuperNetPass& pass) const;
    /// Preprocessing followed by cell_body.
    Var cell_forward(int cell, Var s0, Var s1, SuperNetPass& pass) const;
    /// Logits (n, classes, 1, 1).
    Var forward(Var images, SuperNetPass& pass) const;

    /// Convenience: fresh tape, batch statistics, returns logits.
    Tensor logits(const Tensor& images) const;

    std::vector<NamedArray> to_arrays() const;
    /// Restores alpha, weights and statistics from checkpoint arrays written by to_arrays.
    void load_arrays(const std::vector<NamedArray>& arrays);

private:
    SuperNetConfig config_;
    SearchSpace space_;
    CellTopology topology_;
    ParamStore weights_;
    ArchParams arch_;
    Skeleton skeleton_;
    // ops_[cell][edge][k]
    std::vector<std::vector<std::vector<Operation>>> ops_;
};

/// Arrays for every parameter and running statistic of a store (rank-4 dims).
void append_store_arrays(const ParamStore& store, std::vector<NamedArray>& out);
/// Overwrites store entries from arrays; missing or mis-shaped entries throw ConfigError.
void load_store_arrays(ParamStore& store, const std::vector<NamedArray>& arrays);

} // namespace aca
