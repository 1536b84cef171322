// SPDX-License-Identifier: Apache-2.0
#include "aca/genotype.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "aca/supernet.hpp"

namespace aca {

std::vector<GenotypeEntry> Genotype::node_entries(CellType t, int node) const {
    std::vector<GenotypeEntry> out;
    for (const auto& e : cell(t))
        if (e.node == node) out.push_back(e);
    return out;
}

std::int64_t quantize_strength(double p) {
    const auto q = static_cast<std::int64_t>(std::llround(p * static_cast<double>(kStrengthScale)));
    return std::clamp<std::int64_t>(q, 1, kStrengthScale);
}

Genotype derive_genotype(const ArchParams& arch, const SearchSpace& space, const CellTopology& topology) {
    if (!arch.all_finite()) throw ConfigError("architecture parameters are not finite");
    if (arch.edges() != static_cast<int>(topology.edges.size()) || arch.ops() != space.size())
        throw ConfigError("architecture parameters do not match space " + std::string(space_name(space.id)) +
                          " and topology");
    Genotype g;
    g.space = space.id;
    g.nodes = topology.num_intermediate;
    struct Candidate {
        Real p;
        int k;
        int source;
    };
    for (CellType t : {CellType::Normal, CellType::Reduction}) {
        for (int j = CellTopology::num_inputs; j < topology.num_nodes(); ++j) {
            std::vector<Candidate> cands;
            for (int e : topology.edges_into(j)) {
                const std::vector<Real> p = strengths(arch, t, e);
                int best = -1;
                for (int k = 0; k < space.size(); ++k) {
                    if (space.ops[static_cast<std::size_t>(k)] == OpKind::Zero) continue;
                    if (best < 0 || p[static_cast<std::size_t>(k)] > p[static_cast<std::size_t>(best)]) best = k;
                }
                if (best >= 0) cands.push_back({p[static_cast<std::size_t>(best)], best, topology.edges[static_cast<std::size_t>(e)].source});
            }
            if (cands.size() < 2)
                throw ConfigError("node " + std::to_string(j) + " has fewer than two selectable inputs");
            std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
                if (a.p != b.p) return a.p > b.p;
                if (a.k != b.k) return a.k < b.k;
                return a.source < b.source;
            });
            for (int r = 0; r < 2; ++r) {
                const Candidate& c = cands[static_cast<std::size_t>(r)];
                g.cell(t).push_back({j, c.source, space.ops[static_cast<std::size_t>(c.k)], quantize_strength(c.p)});
            }
        }
    }
    return g;
}

double skip_fraction(const Genotype& g) {
    std::size_t skips = 0, total = 0;
    for (CellType t : {CellType::Normal, CellType::Reduction})
        for (const auto& e : g.cell(t)) {
            ++total;
            if (e.op == OpKind::SkipConnect) ++skips;
        }
    return total == 0 ? 0.0 : static_cast<double>(skips) / static_cast<double>(total);
}

namespace {

std::string format_strength(std::int64_t micro) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%lld.%06lld", static_cast<long long>(micro / kStrengthScale),
                  static_cast<long long>(micro % kStrengthScale));
    return buf;
}

/// Exactly "<digit>.<6 digits>".
bool parse_strength(const std::string& s, std::int64_t& out) {
    if (s.size() != 8 || s[1] != '.') return false;
    if (!std::isdigit(static_cast<unsigned char>(s[0]))) return false;
    std::int64_t frac = 0;
    for (std::size_t i = 2; i < 8; ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
        frac = frac * 10 + (s[i] - '0');
    }
    out = (s[0] - '0') * kStrengthScale + frac;
    return true;
}

bool parse_int(const std::string& s, int& out) {
    if (s.empty() || s.size() > 9) return false;
    for (char c : s)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    out = std::stoi(s);
    return true;
}

/// Splits "key=value" tokens of one line into an ordered list.
std::vector<std::pair<std::string, std::string>> key_values(const std::string& line, std::size_t lineno) {
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos || eq == 0) throw ParseError(lineno, "expected key=value, got '" + tok + "'");
        out.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
    }
    return out;
}

/// Parses "node=<j> src=<i> op=<Name> p=<x.xxxxxx>" followed by `extra` keys.
GenotypeEntry parse_entry(const std::vector<std::pair<std::string, std::string>>& kv, std::size_t lineno,
                          std::size_t expected_keys) {
    static const char* keys[] = {"node", "src", "op", "p"};
    if (kv.size() != expected_keys) throw ParseError(lineno, "wrong number of fields");
    for (std::size_t i = 0; i < 4; ++i)
        if (kv[i].first != keys[i])
            throw ParseError(lineno, std::string("expected '") + keys[i] + "=', got '" + kv[i].first + "='");
    GenotypeEntry e;
    if (!parse_int(kv[0].second, e.node)) throw ParseError(lineno, "bad node index '" + kv[0].second + "'");
    if (!parse_int(kv[1].second, e.source)) throw ParseError(lineno, "bad source index '" + kv[1].second + "'");
    try {
        e.op = parse_op(kv[2].second);
    } catch (const ConfigError&) {
        throw ParseError(lineno, "unknown operation '" + kv[2].second + "'");
    }
    if (!parse_strength(kv[3].second, e.strength_micro))
        throw ParseError(lineno, "strength must be written as d.dddddd, got '" + kv[3].second + "'");
    return e;
}

/// Checks one entry against the node bookkeeping gathered so far.
void check_entry(const Genotype& g, const GenotypeEntry& e, const std::vector<GenotypeEntry>& cell, std::size_t lineno) {
    const SearchSpace space = make_space(g.space);
    if (e.node < CellTopology::num_inputs) throw ParseError(lineno, "node index must be >= 2");
    if (e.source < 0 || e.source >= e.node) throw ParseError(lineno, "source must precede its node");
    if (e.op == OpKind::Zero) throw ParseError(lineno, "Zero cannot be a retained operation");
    if (!space.contains(e.op))
        throw ParseError(lineno, std::string(op_name(e.op)) + " is not in space " + std::string(space_name(g.space)));
    if (e.strength_micro < 1 || e.strength_micro > kStrengthScale) throw ParseError(lineno, "strength outside (0, 1]");
    int same_node = 0;
    for (const auto& o : cell) {
        if (o.node != e.node) continue;
        ++same_node;
        if (o.source == e.source) throw ParseError(lineno, "entries of node " + std::to_string(e.node) + " share a source");
    }
    if (same_node >= 2) throw ParseError(lineno, "duplicate entry for node " + std::to_string(e.node));
}

void check_complete(const Genotype& g, std::size_t lineno) {
    for (CellType t : {CellType::Normal, CellType::Reduction}) {
        for (int j = CellTopology::num_inputs; j < CellTopology::num_inputs + g.nodes; ++j)
            if (g.node_entries(t, j).size() != 2)
                throw ParseError(lineno, std::string(cell_type_name(t)) + " node " + std::to_string(j) +
                                             " needs exactly two entries");
        for (const auto& e : g.cell(t))
            if (e.node >= CellTopology::num_inputs + g.nodes)
                throw ParseError(lineno, "node " + std::to_string(e.node) + " beyond the cell's nodes");
    }
}

} // namespace

void validate(const Genotype& g) {
    if (g.nodes < 1) throw ParseError(0, "genotype needs at least one node");
    for (CellType t : {CellType::Normal, CellType::Reduction}) {
        std::vector<GenotypeEntry> seen;
        for (const auto& e : g.cell(t)) {
            check_entry(g, e, seen, 0);
            seen.push_back(e);
        }
    }
    check_complete(g, 0);
}

std::string serialize_genotype(const Genotype& g) {
    validate(g);
    std::ostringstream out;
    out << "genotype v1\n";
    out << "space " << space_name(g.space) << "\n";
    for (CellType t : {CellType::Normal, CellType::Reduction}) {
        out << cell_type_name(t) << ":\n";
        for (const auto& e : g.cell(t))
            out << "node=" << e.node << " src=" << e.source << " op=" << op_name(e.op)
                << " p=" << format_strength(e.strength_micro) << "\n";
    }
    return out.str();
}

Genotype deserialize_genotype(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    auto next = [&]() {
        if (!std::getline(in, line)) return false;
        ++lineno;
        if (!line.empty() && line.back() == '\r') throw ParseError(lineno, "CR line endings are not supported");
        return true;
    };
    if (!next() || line != "genotype v1") throw ParseError(std::max<std::size_t>(lineno, 1), "expected 'genotype v1'");
    if (!next() || line.rfind("space ", 0) != 0) throw ParseError(lineno, "expected 'space <id>'");
    Genotype g;
    try {
        g.space = parse_space(line.substr(6));
    } catch (const ConfigError&) {
        throw ParseError(lineno, "unknown space '" + line.substr(6) + "'");
    }
    std::vector<GenotypeEntry>* cell = nullptr;
    bool seen_normal = false, seen_reduce = false;
    int max_node = CellTopology::num_inputs - 1;
    while (next()) {
        if (line.empty()) continue;
        if (line == "normal:" || line == "reduce:") {
            const bool normal = line == "normal:";
            if ((normal && (seen_normal || seen_reduce)) || (!normal && (!seen_normal || seen_reduce)))
                throw ParseError(lineno, "cell blocks must appear once each, normal first");
            (normal ? seen_normal : seen_reduce) = true;
            cell = &g.cell(normal ? CellType::Normal : CellType::Reduction);
            continue;
        }
        if (!cell) throw ParseError(lineno, "entry outside a cell block");
        const GenotypeEntry e = parse_entry(key_values(line, lineno), lineno, 4);
        check_entry(g, e, *cell, lineno);
        cell->push_back(e);
        max_node = std::max(max_node, e.node);
    }
    if (!seen_reduce) throw ParseError(lineno + 1, "missing reduce: block");
    g.nodes = max_node - CellTopology::num_inputs + 1;
    if (g.nodes < 1) throw ParseError(lineno, "genotype has no entries");
    check_complete(g, lineno);
    return g;
}

int allocated_channels(std::int64_t strength_micro, std::int64_t max_micro, int channels) {
    if (strength_micro < 1 || max_micro < strength_micro) throw ConfigError("invalid strengths for allocation");
    if (channels < 1) throw ConfigError("channel budget must be >= 1");
    const std::int64_t num = strength_micro * channels;
    const auto c = static_cast<int>((num + max_micro - 1) / max_micro);
    return std::clamp(c, 1, channels);
}

namespace {

int channels_of(const std::map<int, int>& per_node, int node) {
    auto it = per_node.find(node);
    if (it == per_node.end()) throw ConfigError("no channel budget for node " + std::to_string(node));
    return it->second;
}

std::map<int, int> uniform(const Genotype& g, int channels) {
    std::map<int, int> m;
    for (int j = CellTopology::num_inputs; j < CellTopology::num_inputs + g.nodes; ++j) m[j] = channels;
    return m;
}

} // namespace

CellAllocation allocate_channels(const Genotype& g, CellType type, const std::map<int, int>& channels_per_node) {
    CellAllocation out{type, {}};
    for (const auto& e : g.cell(type)) {
        std::int64_t max_micro = 0;
        for (const auto& o : g.cell(type))
            if (o.node == e.node) max_micro = std::max(max_micro, o.strength_micro);
        const int total = channels_of(channels_per_node, e.node);
        const int op = allocated_channels(e.strength_micro, max_micro, total);
        out.entries.push_back({e, total, op, total - op});
    }
    return out;
}

CellAllocation allocate_channels(const Genotype& g, CellType type, int channels) {
    return allocate_channels(g, type, uniform(g, channels));
}

CellAllocation darts_s_allocation(const Genotype& g, CellType type, const std::map<int, int>& channels_per_node,
                                  int fixed) {
    if (fixed < 0) throw ConfigError("fixed skip channels must be >= 0");
    CellAllocation out{type, {}};
    for (const auto& e : g.cell(type)) {
        const int total = channels_of(channels_per_node, e.node);
        if (total < 2) throw ConfigError("fixed allocation needs at least 2 channels per node");
        const int skip = std::min(fixed, total / 2);
        out.entries.push_back({e, total, total - skip, skip});
    }
    return out;
}

CellAllocation darts_s_allocation(const Genotype& g, CellType type, int channels, int fixed) {
    return darts_s_allocation(g, type, uniform(g, channels), fixed);
}

CellAllocation full_width_allocation(const Genotype& g, CellType type, int channels) {
    CellAllocation out{type, {}};
    for (const auto& e : g.cell(type)) out.entries.push_back({e, channels, channels, 0});
    return out;
}

NetworkAllocation allocate_network(const Genotype& g, const NetworkLayout& layout, AllocationMode mode,
                                   int fixed_channels) {
    NetworkAllocation out;
    out.mode = mode;
    const std::vector<int> widths = layout.node_channels();
    for (std::size_t c = 0; c < layout.cells.size(); ++c) {
        const CellType t = layout.cells[c];
        const int width = widths[c];
        switch (mode) {
            case AllocationMode::Adaptive: out.cells.push_back(allocate_channels(g, t, width)); break;
            case AllocationMode::Fixed: out.cells.push_back(darts_s_allocation(g, t, width, fixed_channels)); break;
            case AllocationMode::FullWidth: out.cells.push_back(full_width_allocation(g, t, width)); break;
        }
    }
    return out;
}

namespace {

const char* mode_name(AllocationMode m) {
    switch (m) {
        case AllocationMode::Adaptive: return "adaptive";
        case AllocationMode::Fixed: return "fixed";
        case AllocationMode::FullWidth: return "full";
    }
    return "?";
}

} // namespace

std::string serialize_allocation(const NetworkAllocation& a) {
    std::ostringstream out;
    out << "allocation v1\n";
    out << "mode " << mode_name(a.mode) << "\n";
    for (std::size_t c = 0; c < a.cells.size(); ++c) {
        out << "cell=" << c << " type=" << cell_type_name(a.cells[c].type) << "\n";
        for (const auto& ea : a.cells[c].entries)
            out << "node=" << ea.entry.node << " src=" << ea.entry.source << " op=" << op_name(ea.entry.op)
                << " p=" << format_strength(ea.entry.strength_micro) << " C=" << ea.total
                << " c_op=" << ea.op_channels << " c_skip=" << ea.skip_channels << "\n";
    }
    return out.str();
}

NetworkAllocation deserialize_allocation(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    auto next = [&]() {
        if (!std::getline(in, line)) return false;
        ++lineno;
        return true;
    };
    if (!next() || line != "allocation v1") throw ParseError(std::max<std::size_t>(lineno, 1), "expected 'allocation v1'");
    if (!next() || line.rfind("mode ", 0) != 0) throw ParseError(lineno, "expected 'mode <name>'");
    NetworkAllocation a;
    const std::string mode = line.substr(5);
    if (mode == "adaptive") a.mode = AllocationMode::Adaptive;
    else if (mode == "fixed") a.mode = AllocationMode::Fixed;
    else if (mode == "full") a.mode = AllocationMode::FullWidth;
    else throw ParseError(lineno, "unknown allocation mode '" + mode + "'");
    while (next()) {
        if (line.empty()) continue;
        const auto kv = key_values(line, lineno);
        if (kv.front().first == "cell") {
            int idx = 0;
            if (kv.size() != 2 || !parse_int(kv[0].second, idx) || kv[1].first != "type")
                throw ParseError(lineno, "expected 'cell=<index> type=<normal|reduce>'");
            if (idx != static_cast<int>(a.cells.size())) throw ParseError(lineno, "cells must be numbered in order");
            CellAllocation cell;
            if (kv[1].second == "normal") cell.type = CellType::Normal;
            else if (kv[1].second == "reduce") cell.type = CellType::Reduction;
            else throw ParseError(lineno, "unknown cell type '" + kv[1].second + "'");
            a.cells.push_back(std::move(cell));
            continue;
        }
        if (a.cells.empty()) throw ParseError(lineno, "entry before the first cell line");
        EntryAllocation ea;
        ea.entry = parse_entry(kv, lineno, 7);
        static const char* keys[] = {"C", "c_op", "c_skip"};
        int* fields[] = {&ea.total, &ea.op_channels, &ea.skip_channels};
        for (std::size_t i = 0; i < 3; ++i) {
            if (kv[4 + i].first != keys[i]) throw ParseError(lineno, std::string("expected '") + keys[i] + "='");
            if (!parse_int(kv[4 + i].second, *fields[i])) throw ParseError(lineno, std::string("bad ") + keys[i] + " value");
        }
        if (ea.op_channels < 1 || ea.op_channels + ea.skip_channels != ea.total)
            throw ParseError(lineno, "c_op + c_skip must equal C with c_op >= 1");
        a.cells.back().entries.push_back(ea);
    }
    return a;
}

void check_allocation(const NetworkAllocation& a, const Genotype& g, const NetworkLayout& layout) {
    if (a.cells.size() != layout.cells.size())
        throw ConfigError("allocation has " + std::to_string(a.cells.size()) + " cells, layout has " +
                          std::to_string(layout.cells.size()));
    const std::vector<int> widths = layout.node_channels();
    for (std::size_t c = 0; c < a.cells.size(); ++c) {
        const CellAllocation& cell = a.cells[c];
        const std::string where = "allocation cell " + std::to_string(c);
        if (cell.type != layout.cells[c]) throw ConfigError(where + " has the wrong cell type");
        const auto& entries = g.cell(cell.type);
        if (cell.entries.size() != entries.size()) throw ConfigError(where + " does not match the genotype entries");
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const EntryAllocation& ea = cell.entries[i];
            if (!(ea.entry == entries[i])) throw ConfigError(where + " entry " + std::to_string(i) + " differs from the genotype");
            if (ea.total != widths[c])
                throw ConfigError(where + " plans " + std::to_string(ea.total) + " channels, layout has " +
                                  std::to_string(widths[c]));
            if (ea.op_channels < 1 || ea.skip_channels < 0 || ea.op_channels + ea.skip_channels != ea.total)
                throw ConfigError(where + " has an inconsistent channel split");
        }
    }
}

std::string export_dot(const Genotype& g, const NetworkAllocation& a, CellType type) {
    const CellAllocation* cell = nullptr;
    for (const auto& c : a.cells)
        if (c.type == type) {
            cell = &c;
            break;
        }
    if (!cell) throw ConfigError("allocation has no " + std::string(cell_type_name(type)) + " cell");
    auto node_id = [](int n) {
        if (n == 0) return std::string("\"c_{k-2}\"");
        if (n == 1) return std::string("\"c_{k-1}\"");
        return "\"" + std::to_string(n - CellTopology::num_inputs) + "\"";
    };
    std::ostringstream out;
    out << "digraph " << cell_type_name(type) << " {\n";
    out << "  rankdir=LR;\n";
    out << "  node [shape=box, style=filled, fillcolor=lightgray];\n";
    out << "  " << node_id(0) << ";\n  " << node_id(1) << ";\n";
    for (int j = CellTopology::num_inputs; j < CellTopology::num_inputs + g.nodes; ++j)
        out << "  " << node_id(j) << " [fillcolor=lightblue];\n";
    out << "  \"c_{k}\" [fillcolor=palegoldenrod];\n";
    for (const auto& ea : cell->entries)
        out << "  " << node_id(ea.entry.source) << " -> " << node_id(ea.entry.node) << " [label=\""
            << op_name(ea.entry.op) << " p=" << format_strength(ea.entry.strength_micro) << " c=" << ea.op_channels
            << "/" << ea.total << "\"];\n";
    for (int j = CellTopology::num_inputs; j < CellTopology::num_inputs + g.nodes; ++j)
        out << "  " << node_id(j) << " -> \"c_{k}\";\n";
    out << "}\n";
    return out.str();
}

} // namespace aca
