// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "aca/search_space.hpp"

namespace aca {

class ArchParams;

/// Strengths are kept in integer millionths, the precision of the text format.
inline constexpr std::int64_t kStrengthScale = 1'000'000;

struct GenotypeEntry {
    int node = 0;    // intermediate node index j (2 .. B+1)
    int source = 0;  // source node index i < j
    OpKind op = OpKind::SepConv3x3;
    std::int64_t strength_micro = 0;  // p * 1e6, in [1, 1e6]

    double strength() const noexcept { return static_cast<double>(strength_micro) / kStrengthScale; }
    bool operator==(const GenotypeEntry&) const = default;
};

/// Two retained entries per intermediate node, per cell type.
struct Genotype {
    SpaceId space = SpaceId::S6;
    int nodes = 4;
    std::vector<GenotypeEntry> normal;
    std::vector<GenotypeEntry> reduce;

    const std::vector<GenotypeEntry>& cell(CellType t) const noexcept { return t == CellType::Normal ? normal : reduce; }
    std::vector<GenotypeEntry>& cell(CellType t) noexcept { return t == CellType::Normal ? normal : reduce; }
    /// Entries of one node in stored order.
    std::vector<GenotypeEntry> node_entries(CellType t, int node) const;

    bool operator==(const Genotype&) const = default;
};

std::int64_t quantize_strength(double p);

/// Per node, the two strongest (source, op) pairs from distinct sources. Each
/// source contributes its strongest op; Zero never competes. Ties prefer the
/// lower op index, then the lower source index.
Genotype derive_genotype(const ArchParams& arch, const SearchSpace& space, const CellTopology& topology);

/// Fraction of retained entries that are SkipConnect, over both cell types.
double skip_fraction(const Genotype& g);

/// Throws ParseError when an invariant is violated (line 0: not from text).
void validate(const Genotype& g);

std::string serialize_genotype(const Genotype& g);
Genotype deserialize_genotype(const std::string& text);

/// Channel split of one retained entry: op_channels + skip_channels == total.
struct EntryAllocation {
    GenotypeEntry entry;
    int total = 0;
    int op_channels = 0;
    int skip_channels = 0;

    bool operator==(const EntryAllocation&) const = default;
};

struct CellAllocation {
    CellType type = CellType::Normal;
    std::vector<EntryAllocation> entries;  // genotype order

    bool operator==(const CellAllocation&) const = default;
};

/// ceil(p / p_max * C) with p_max the strongest entry of the same node; exact
/// integer arithmetic on the quantized strengths.
int allocated_channels(std::int64_t strength_micro, std::int64_t max_micro, int channels);

CellAllocation allocate_channels(const Genotype& g, CellType type, const std::map<int, int>& channels_per_node);
CellAllocation allocate_channels(const Genotype& g, CellType type, int channels);
/// Fixed skip width min(fixed, C/2) for every entry, ignoring strengths.
CellAllocation darts_s_allocation(const Genotype& g, CellType type, const std::map<int, int>& channels_per_node,
                                  int fixed = 8);
CellAllocation darts_s_allocation(const Genotype& g, CellType type, int channels, int fixed = 8);
/// Every op at full width, no skip refill.
CellAllocation full_width_allocation(const Genotype& g, CellType type, int channels);

enum class AllocationMode : std::uint8_t { Adaptive, Fixed, FullWidth };

/// One CellAllocation per cell of the layout.
struct NetworkAllocation {
    AllocationMode mode = AllocationMode::Adaptive;
    std::vector<CellAllocation> cells;

    bool operator==(const NetworkAllocation&) const = default;
};

NetworkAllocation allocate_network(const Genotype& g, const NetworkLayout& layout, AllocationMode mode,
                                   int fixed_channels = 8);

std::string serialize_allocation(const NetworkAllocation& a);
NetworkAllocation deserialize_allocation(const std::string& text);
/// Throws ConfigError unless `a` matches the genotype entries and the layout widths.
void check_allocation(const NetworkAllocation& a, const Genotype& g, const NetworkLayout& layout);

/// Graphviz digraph of one cell type, labelled from the first cell of that type.
std::string export_dot(const Genotype& g, const NetworkAllocation& a, CellType type);

} // namespace aca
