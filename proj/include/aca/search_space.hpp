// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace aca {

/// Candidate operation catalog. Enumerator order is the catalog order.
enum class OpKind : std::uint8_t {
    SepConv3x3,
    SepConv5x5,
    DilSepConv3x3,
    DilSepConv5x5,
    MaxPool3x3,
    AvgPool3x3,
    SkipConnect,
    Zero,
};

std::string_view op_name(OpKind kind) noexcept;
/// Throws ConfigError for unknown names.
OpKind parse_op(std::string_view name);
bool is_parametric(OpKind kind) noexcept;
int op_kernel(OpKind kind) noexcept;
int op_dilation(OpKind kind) noexcept;

enum class SpaceId : std::uint8_t { S, S5, S6, S7 };

std::string_view space_name(SpaceId id) noexcept;
SpaceId parse_space(std::string_view name);

/// Ordered operation list of a named space; the position in `ops` is the
/// operation index k used by architecture parameters.
struct SearchSpace {
    SpaceId id = SpaceId::S;
    std::vector<OpKind> ops;

    int size() const noexcept { return static_cast<int>(ops.size()); }
    /// -1 when the kind is not part of this space.
    int index_of(OpKind kind) const noexcept;
    bool contains(OpKind kind) const noexcept { return index_of(kind) >= 0; }
};

/// S: all 8; S5: S minus SkipConnect; S6: the four convolutions; S7: S6 plus SkipConnect.
std::vector<OpKind> ops_for_space(SpaceId id);
SearchSpace make_space(SpaceId id);

/// Directed edge source -> target inside a cell. Nodes 0 and 1 are the cell
/// inputs; nodes 2 .. B+1 are intermediate.
struct Edge {
    int source = 0;
    int target = 0;
    bool operator==(const Edge&) const = default;
};

struct CellTopology {
    static constexpr int num_inputs = 2;
    int num_intermediate = 4;
    /// Grouped by target node, sources ascending.
    std::vector<Edge> edges;

    int num_nodes() const noexcept { return num_inputs + num_intermediate; }
    /// Position of (source, target) in `edges`, or -1.
    int edge_index(int source, int target) const noexcept;
    /// Indices of the edges entering `target`.
    std::vector<int> edges_into(int target) const;
};

CellTopology build_topology(int intermediate_nodes);

enum class CellType : std::uint8_t { Normal, Reduction };
std::string_view cell_type_name(CellType t) noexcept;

struct NetworkLayout {
    int repeats = 1;  // n
    std::vector<CellType> cells;
    int init_channels = 8;
    int num_classes = 10;

    int depth() const noexcept { return static_cast<int>(cells.size()); }
    /// Channels per intermediate node of each cell (doubles at each reduction).
    std::vector<int> node_channels() const;
};

/// [n x Normal, Reduction, n x Normal, Reduction, n x Normal]; depth 3n + 2.
NetworkLayout network_layout(int repeats, int init_channels, int num_classes);

} // namespace aca
