// SPDX-License-Identifier: Apache-2.0
#include "aca/macro.hpp"

#include <cmath>

namespace aca {

Skeleton::Skeleton(const NetworkLayout& layout, int in_channels, int intermediate_nodes, ParamStore& store, Rng& rng,
                   bool affine)
    : layout_(layout), in_channels_(in_channels), nodes_(intermediate_nodes) {
    if (in_channels < 1) throw ConfigError("network needs at least one input channel");
    const int c0 = layout.init_channels;
    store.add("stem.conv", he_normal({c0, in_channels, 3, 3}, rng));
    stem_norm_ = Norm(store, "stem.bn", c0, affine);

    int c_pp = c0, c_p = c0, c = c0;
    bool reduction_prev = false;
    for (std::size_t i = 0; i < layout.cells.size(); ++i) {
        const CellType t = layout.cells[i];
        if (t == CellType::Reduction) c *= 2;
        plans_.push_back({t, reduction_prev, c_pp, c_p, c});
        const std::string name = "cell" + std::to_string(i);
        Preprocess p0 = reduction_prev
                            ? Preprocess(std::in_place_type<FactorizedReduce>, store, rng, name + ".pre0", c_pp, c, affine)
                            : Preprocess(std::in_place_type<ReluConvNorm>, store, rng, name + ".pre0", c_pp, c, 1, 1, affine);
        Preprocess p1(std::in_place_type<ReluConvNorm>, store, rng, name + ".pre1", c_p, c, 1, 1, affine);
        pre_.emplace_back(std::move(p0), std::move(p1));
        reduction_prev = t == CellType::Reduction;
        c_pp = c_p;
        c_p = intermediate_nodes * c;
    }
    classifier_in_ = c_p;
    const int classes = layout.num_classes;
    Tensor w({classes, c_p, 1, 1});
    const double bound = 1.0 / std::sqrt(static_cast<double>(c_p));
    for (auto& v : w.data()) v = static_cast<Real>(rng.uniform(-bound, bound));
    store.add("classifier.weight", std::move(w));
    store.add("classifier.bias", Tensor({1, classes, 1, 1}));
}

void Skeleton::check_input(const Shape& images) const {
    if (images.c != in_channels_)
        throw ConfigError("network expects " + std::to_string(in_channels_) + " input channels, got " + images.str());
    if (images.n < 1 || images.h < 4 || images.w < 4 || images.h % 4 != 0 || images.w % 4 != 0)
        throw ConfigError("input spatial size must be a positive multiple of 4 for two reductions, got " +
                          images.str());
}

Var Skeleton::stem(Var images, ParamBinding& params, bool training) const {
    return stem_norm_.forward(conv2d(images, params("stem.conv"), {1, 1, 1, 1}), params, training);
}

std::pair<Var, Var> Skeleton::preprocess(int cell, Var s0, Var s1, ParamBinding& params, bool training) const {
    auto run = [&](const Preprocess& p, Var x) {
        return std::visit([&](const auto& m) { return m.forward(x, params, training); }, p);
    };
    const auto& [p0, p1] = pre_.at(static_cast<std::size_t>(cell));
    return {run(p0, s0), run(p1, s1)};
}

Var Skeleton::classify(Var features, ParamBinding& params) const {
    return linear(global_avg_pool(features), params("classifier.weight"), params("classifier.bias"));
}

std::size_t Skeleton::param_count() const {
    std::size_t n = conv_param_count(in_channels_, layout_.init_channels, 3, 1) + stem_norm_.param_count();
    for (const auto& [p0, p1] : pre_) {
        n += std::visit([](const auto& m) { return m.param_count(); }, p0);
        n += std::visit([](const auto& m) { return m.param_count(); }, p1);
    }
    n += static_cast<std::size_t>(classifier_in_) * layout_.num_classes + layout_.num_classes;
    return n;
}

std::size_t Skeleton::mac_count(int height, int width) const {
    std::size_t n = conv_mac_count({1, layout_.init_channels, height, width}, in_channels_, 3, 1);
    int h = height, w = width;       // resolution of the prev cell output
    int hpp = height, wpp = width;   // resolution of the prev-prev cell output
    for (std::size_t i = 0; i < plans_.size(); ++i) {
        const CellPlan& plan = plans_[i];
        const auto& [p0, p1] = pre_[i];
        n += std::visit([&](const auto& m) { return m.mac_count({1, plan.prev_prev_channels, hpp, wpp}); }, p0);
        n += std::visit([&](const auto& m) { return m.mac_count({1, plan.prev_channels, h, w}); }, p1);
        hpp = h;
        wpp = w;
        if (plan.type == CellType::Reduction) {
            h = (h + 1) / 2;
            w = (w + 1) / 2;
        }
    }
    n += static_cast<std::size_t>(classifier_in_) * layout_.num_classes;
    return n;
}

} // namespace aca
