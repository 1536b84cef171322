// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>
#include <variant>
#include <vector>

#include "aca/operations.hpp"
#include "aca/search_space.hpp"

namespace aca {

/// Channel bookkeeping of one cell in the stacked network.
struct CellPlan {
    CellType type = CellType::Normal;
    bool reduction_prev = false;
    int prev_prev_channels = 0;
    int prev_channels = 0;
    int node_channels = 0;
};

/// Everything around the cells: stem, per-cell input preprocessing, and the
/// pooled linear classifier. Shared by the super-net and the target-net.
class Skeleton {
public:
    Skeleton(const NetworkLayout& layout, int in_channels, int intermediate_nodes, ParamStore& store, Rng& rng,
             bool affine);

    const std::vector<CellPlan>& plans() const noexcept { return plans_; }
    const NetworkLayout& layout() const noexcept { return layout_; }
    int in_channels() const noexcept { return in_channels_; }

    Var stem(Var images, ParamBinding& params, bool training) const;
    /// Aligns (prev-prev, prev) cell outputs to the cell's node width and resolution.
    std::pair<Var, Var> preprocess(int cell, Var s0, Var s1, ParamBinding& params, bool training) const;
    Var classify(Var features, ParamBinding& params) const;

    /// Runs stem -> cells -> classifier; `body(cell, in0, in1)` computes one
    /// cell from its preprocessed inputs.
    template <class Body>
    Var forward(Var images, ParamBinding& params, bool training, Body&& body) const {
        check_input(images.shape());
        Var s0 = stem(images, params, training);
        Var s1 = s0;
        for (int c = 0; c < static_cast<int>(plans_.size()); ++c) {
            auto [in0, in1] = preprocess(c, s0, s1, params, training);
            Var out = body(c, in0, in1);
            s0 = s1;
            s1 = out;
        }
        return classify(s1, params);
    }

    /// Throws ConfigError unless the input has the expected channels and a
    /// spatial size divisible by 4 (two stride-2 reductions).
    void check_input(const Shape& images) const;

    std::size_t param_count() const;
    /// Multiply-adds of stem, preprocessing and classifier for one sample of size h x w.
    std::size_t mac_count(int height, int width) const;

private:
    using Preprocess = std::variant<ReluConvNorm, FactorizedReduce>;

    NetworkLayout layout_;
    int in_channels_ = 3;
    int nodes_ = 4;
    std::vector<CellPlan> plans_;
    std::vector<std::pair<Preprocess, Preprocess>> pre_;
    Norm stem_norm_;
    int classifier_in_ = 0;
};

} // namespace aca
