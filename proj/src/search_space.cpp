// SPDX-License-Identifier: Apache-2.0
#include "aca/search_space.hpp"

#include <array>

#include "aca/errors.hpp"

namespace aca {
namespace {

constexpr std::array<std::string_view, 8> kOpNames = {
    "SepConv3x3", "SepConv5x5", "DilSepConv3x3", "DilSepConv5x5", "MaxPool3x3", "AvgPool3x3", "SkipConnect", "Zero",
};

constexpr std::array<std::string_view, 4> kSpaceNames = {"S", "S5", "S6", "S7"};

} // namespace

std::string_view op_name(OpKind kind) noexcept { return kOpNames[static_cast<std::size_t>(kind)]; }

OpKind parse_op(std::string_view name) {
    for (std::size_t i = 0; i < kOpNames.size(); ++i)
        if (kOpNames[i] == name) return static_cast<OpKind>(i);
    throw ConfigError("unknown operation '" + std::string(name) + "'");
}

bool is_parametric(OpKind kind) noexcept { return static_cast<int>(kind) <= static_cast<int>(OpKind::DilSepConv5x5); }

int op_kernel(OpKind kind) noexcept {
    switch (kind) {
    case OpKind::SepConv5x5:
    case OpKind::DilSepConv5x5:
        return 5;
    default:
        return 3;
    }
}

int op_dilation(OpKind kind) noexcept {
    return kind == OpKind::DilSepConv3x3 || kind == OpKind::DilSepConv5x5 ? 2 : 1;
}

std::string_view space_name(SpaceId id) noexcept { return kSpaceNames[static_cast<std::size_t>(id)]; }

SpaceId parse_space(std::string_view name) {
    for (std::size_t i = 0; i < kSpaceNames.size(); ++i)
        if (kSpaceNames[i] == name) return static_cast<SpaceId>(i);
    throw ConfigError("unknown search space '" + std::string(name) + "' (expected S, S5, S6 or S7)");
}

int SearchSpace::index_of(OpKind kind) const noexcept {
    for (std::size_t i = 0; i < ops.size(); ++i)
        if (ops[i] == kind) return static_cast<int>(i);
    return -1;
}

std::vector<OpKind> ops_for_space(SpaceId id) {
    using enum OpKind;
    switch (id) {
    case SpaceId::S:
        return {SepConv3x3, SepConv5x5, DilSepConv3x3, DilSepConv5x5, MaxPool3x3, AvgPool3x3, SkipConnect, Zero};
    case SpaceId::S5:
        return {SepConv3x3, SepConv5x5, DilSepConv3x3, DilSepConv5x5, MaxPool3x3, AvgPool3x3, Zero};
    case SpaceId::S6:
        return {SepConv3x3, SepConv5x5, DilSepConv3x3, DilSepConv5x5};
    case SpaceId::S7:
        return {SepConv3x3, SepConv5x5, DilSepConv3x3, DilSepConv5x5, SkipConnect};
    }
    throw ConfigError("unknown search space id");
}

SearchSpace make_space(SpaceId id) { return SearchSpace{id, ops_for_space(id)}; }

int CellTopology::edge_index(int source, int target) const noexcept {
    for (std::size_t i = 0; i < edges.size(); ++i)
        if (edges[i].source == source && edges[i].target == target) return static_cast<int>(i);
    return -1;
}

std::vector<int> CellTopology::edges_into(int target) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < edges.size(); ++i)
        if (edges[i].target == target) out.push_back(static_cast<int>(i));
    return out;
}

CellTopology build_topology(int intermediate_nodes) {
    if (intermediate_nodes < 1) throw ConfigError("cell needs at least one intermediate node");
    CellTopology t;
    t.num_intermediate = intermediate_nodes;
    for (int j = CellTopology::num_inputs; j < t.num_nodes(); ++j)
        for (int i = 0; i < j; ++i) t.edges.push_back({i, j});
    return t;
}

std::string_view cell_type_name(CellType t) noexcept { return t == CellType::Normal ? "normal" : "reduce"; }

std::vector<int> NetworkLayout::node_channels() const {
    std::vector<int> out;
    int c = init_channels;
    for (CellType t : cells) {
        if (t == CellType::Reduction) c *= 2;
        out.push_back(c);
    }
    return out;
}

NetworkLayout network_layout(int repeats, int init_channels, int num_classes) {
    if (repeats < 1) throw ConfigError("network_layout: n must be >= 1");
    if (init_channels < 1) throw ConfigError("network_layout: init_channels must be >= 1");
    if (num_classes < 2) throw ConfigError("network_layout: need at least 2 classes");
    NetworkLayout l;
    l.repeats = repeats;
    l.init_channels = init_channels;
    l.num_classes = num_classes;
    for (int part = 0; part < 3; ++part) {
        if (part > 0) l.cells.push_back(CellType::Reduction);
        for (int i = 0; i < repeats; ++i) l.cells.push_back(CellType::Normal);
    }
    return l;
}

} // namespace aca
