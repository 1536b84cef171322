// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <regex>
#include <set>

#include "aca/genotype.hpp"
#include "aca/supernet.hpp"
#include "derivation_oracle.hpp"
#include "oracles.hpp"

using namespace aca;
using oracle::entries_of;
using oracle::Entry;
using oracle::random_genotype;
using oracle::two_entry_genotype;

namespace {

void set_row(ArchParams& arch, CellType t, int edge, const std::vector<double>& logits) {
    auto row = arch.row(t, edge);
    for (std::size_t k = 0; k < row.size(); ++k) row[k] = static_cast<Real>(logits[k]);
}

} // namespace

TEST_CASE("derive_genotype matches the brute-force top-2 oracle") {
    Rng rng(99);
    const SpaceId ids[] = {SpaceId::S, SpaceId::S5, SpaceId::S6, SpaceId::S7};
    for (int trial = 0; trial < 100; ++trial) {
        const SearchSpace space = make_space(ids[trial % 4]);
        const int nodes = 1 + trial % 5;
        const CellTopology topo = build_topology(nodes);
        const ArchParams arch =
            ArchParams::gaussian(static_cast<int>(topo.edges.size()), space.size(), rng, 1.0 + trial % 3);
        const Genotype g = derive_genotype(arch, space, topo);
        CHECK_NOTHROW(validate(g));
        for (CellType t : {CellType::Normal, CellType::Reduction})
            for (int j = 2; j < nodes + 2; ++j) {
                CAPTURE(trial);
                CHECK(entries_of(g, t, j) == oracle::top2_node(arch, space, topo, t, j));
                for (const auto& e : g.node_entries(t, j)) {
                    CHECK(e.op != OpKind::Zero);
                    const int edge = topo.edge_index(e.source, e.node);
                    const double p = strengths(arch, t, edge)[static_cast<std::size_t>(space.index_of(e.op))];
                    CHECK(e.strength_micro == quantize_strength(p));
                }
            }
    }
}

TEST_CASE("derive_genotype: forced, ordering, Zero exclusion, ties, shift invariance") {
    {
        const CellTopology topo = build_topology(1);
        ArchParams arch(2, 4);
        set_row(arch, CellType::Normal, 0, {0, 0, -3, 5});
        set_row(arch, CellType::Normal, 1, {-9, 0, 0, 0});
        const Genotype g = derive_genotype(arch, make_space(SpaceId::S6), topo);
        CHECK(entries_of(g, CellType::Normal, 2) ==
              std::set<Entry>{{2, 0, OpKind::DilSepConv5x5}, {2, 1, OpKind::SepConv5x5}});
    }
    {
        const CellTopology topo = build_topology(2);  // node 3 has sources 0, 1, 2
        ArchParams arch(5, 4);
        const double rest[] = {0.1 / 3, 0.2 / 3, 0.15 / 3};
        const double best[] = {0.9, 0.8, 0.85};
        for (int s = 0; s < 3; ++s)
            set_row(arch, CellType::Normal, topo.edge_index(s, 3),
                    {std::log(best[s]), std::log(rest[s]), std::log(rest[s]), std::log(rest[s])});
        const Genotype g = derive_genotype(arch, make_space(SpaceId::S6), topo);
        const auto e = g.node_entries(CellType::Normal, 3);
        CHECK(std::set<int>{e[0].source, e[1].source} == std::set<int>{0, 2});
    }
    {
        const CellTopology topo = build_topology(2);
        const SearchSpace s = make_space(SpaceId::S);
        ArchParams arch(5, 8);
        for (int e = 0; e < 5; ++e) {
            std::vector<double> row(8, 0.0);
            row[static_cast<std::size_t>(s.index_of(OpKind::Zero))] = 10;
            row[static_cast<std::size_t>(s.index_of(OpKind::SkipConnect))] = 2;
            set_row(arch, CellType::Normal, e, row);
            set_row(arch, CellType::Reduction, e, row);
        }
        const Genotype g = derive_genotype(arch, s, topo);
        CHECK(skip_fraction(g) == 1.0);
    }
    {
        const CellTopology topo = build_topology(3);
        const ArchParams arch(9, 5);
        const Genotype g = derive_genotype(arch, make_space(SpaceId::S7), topo);
        for (CellType t : {CellType::Normal, CellType::Reduction})
            for (int j = 2; j < 5; ++j) {
                const auto e = g.node_entries(t, j);
                CHECK(e[0].source == 0);
                CHECK(e[1].source == 1);
                CHECK(e[0].op == OpKind::SepConv3x3);
                CHECK(e[1].op == OpKind::SepConv3x3);
            }
    }
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const SearchSpace space = make_space(trial % 2 ? SpaceId::S : SpaceId::S6);
        const CellTopology topo = build_topology(4);
        ArchParams arch(14, space.size());
        for (CellType t : {CellType::Normal, CellType::Reduction})
            for (int e = 0; e < 14; ++e)
                for (Real& v : arch.row(t, e)) v = static_cast<Real>(rng.below(4096)) / 1024 - 2;
        ArchParams shifted = arch;
        for (CellType t : {CellType::Normal, CellType::Reduction})
            for (int e = 0; e < 14; ++e) {
                const Real c = static_cast<Real>(rng.below(16)) - 8;
                for (Real& v : shifted.row(t, e)) v += c;
                CHECK(strengths(shifted, t, e) == strengths(arch, t, e));
            }
        CHECK(derive_genotype(shifted, space, topo) == derive_genotype(arch, space, topo));
    }
    ArchParams bad(2, 4);
    bad.row(CellType::Normal, 0)[1] = std::numeric_limits<Real>::quiet_NaN();
    CHECK_THROWS_AS(derive_genotype(bad, make_space(SpaceId::S6), build_topology(1)), ConfigError);
    CHECK_THROWS_AS(derive_genotype(ArchParams(2, 5), make_space(SpaceId::S6), build_topology(1)), ConfigError);
}

TEST_CASE("skip_fraction counts over both cell types") {
    Genotype g;
    g.space = SpaceId::S7;
    g.nodes = 4;
    for (CellType t : {CellType::Normal, CellType::Reduction})
        for (int j = 2; j < 6; ++j)
            for (int s = 0; s < 2; ++s) g.cell(t).push_back({j, s, OpKind::SepConv3x3, 500000});
    CHECK(skip_fraction(g) == 0.0);
    g.normal[0].op = g.normal[3].op = g.reduce[7].op = OpKind::SkipConnect;
    CHECK(skip_fraction(g) == 0.1875);
    for (CellType t : {CellType::Normal, CellType::Reduction})
        for (auto& e : g.cell(t)) e.op = OpKind::SkipConnect;
    CHECK(skip_fraction(g) == 1.0);
}

TEST_CASE("adaptive allocation: worked cases and the exhaustive ceiling sweep") {
    {
        const CellAllocation a = allocate_channels(two_entry_genotype(400000, 300000), CellType::Normal, 16);
        CHECK(a.entries[0].op_channels == 16);
        CHECK(a.entries[0].skip_channels == 0);
        CHECK(a.entries[1].op_channels == 12);
        CHECK(a.entries[1].skip_channels == 4);
    }
    {
        const CellAllocation a = allocate_channels(two_entry_genotype(250000, 250000), CellType::Normal, 8);
        for (const auto& e : a.entries) {
            CHECK(e.op_channels == 8);
            CHECK(e.skip_channels == 0);
        }
    }
    const std::int64_t maxima[] = {1000000, 400000, 250000, 100};
    for (std::int64_t pmax : maxima)
        for (int C : {4, 8, 16, 36}) {
            int previous = 0;
            for (int pct = 1; pct <= 100; ++pct) {
                const std::int64_t p = pmax * pct / 100;
                if (p < 1 || p * 100 != pmax * pct) continue;
                const int want = oracle::ceil_ratio(pct, 100, C);
                const CellAllocation a = allocate_channels(two_entry_genotype(pmax, p), CellType::Normal, C);
                const auto& weak = a.entries[1];
                CAPTURE(pmax);
                CAPTURE(C);
                CAPTURE(pct);
                CHECK(weak.op_channels == want);
                CHECK(weak.op_channels + weak.skip_channels == C);
                CHECK(weak.op_channels >= previous);
                CHECK(a.entries[0].op_channels == C);
                CHECK(a.entries[0].skip_channels == 0);
                previous = weak.op_channels;
            }
        }
    Rng rng(31);
    for (int t = 0; t < 2000; ++t) {
        const std::int64_t a = 1 + static_cast<std::int64_t>(rng.below(kStrengthScale));
        const std::int64_t b = 1 + static_cast<std::int64_t>(rng.below(kStrengthScale));
        const int C = 1 + static_cast<int>(rng.below(64));
        Genotype g = two_entry_genotype(std::max(a, b), std::min(a, b));
        const CellAllocation al = allocate_channels(g, CellType::Reduction, C);
        CHECK(al.entries[1].op_channels == oracle::ceil_ratio(std::min(a, b), std::max(a, b), C));
        CHECK(al.entries[1].op_channels >= 1);
    }
}

TEST_CASE("fixed-width allocation") {
    const Genotype g = two_entry_genotype(900000, 100000);
    for (const auto& [C, op, skip] : std::vector<std::tuple<int, int, int>>{{16, 8, 8}, {8, 4, 4}, {64, 56, 8}}) {
        for (const auto& e : darts_s_allocation(g, CellType::Normal, C, 8).entries) {
            CHECK(e.op_channels == op);
            CHECK(e.skip_channels == skip);
        }
    }
    CHECK_THROWS_AS(darts_s_allocation(g, CellType::Normal, 1, 8), ConfigError);
}

TEST_CASE("network allocation follows the layout widths") {
    Rng rng(2);
    const Genotype g = derive_genotype(ArchParams::gaussian(14, 4, rng, 1.0), make_space(SpaceId::S6), build_topology(4));
    const NetworkLayout layout = network_layout(1, 16, 3);
    for (AllocationMode m : {AllocationMode::Adaptive, AllocationMode::Fixed, AllocationMode::FullWidth}) {
        const NetworkAllocation a = allocate_network(g, layout, m);
        REQUIRE(a.cells.size() == 5);
        CHECK_NOTHROW(check_allocation(a, g, layout));
        const auto widths = layout.node_channels();
        for (std::size_t c = 0; c < 5; ++c) {
            CHECK(a.cells[c].type == layout.cells[c]);
            for (const auto& e : a.cells[c].entries) {
                CHECK(e.total == widths[c]);
                CHECK(e.op_channels + e.skip_channels == e.total);
                if (m == AllocationMode::FullWidth) CHECK(e.skip_channels == 0);
                if (m == AllocationMode::Fixed) CHECK(e.skip_channels == std::min(8, widths[c] / 2));
            }
        }
        CHECK(deserialize_allocation(serialize_allocation(a)) == a);
        CHECK(serialize_allocation(deserialize_allocation(serialize_allocation(a))) == serialize_allocation(a));
    }
    NetworkAllocation a = allocate_network(g, layout, AllocationMode::Adaptive);
    CHECK_THROWS_AS(check_allocation(a, g, network_layout(1, 8, 3)), ConfigError);
    CHECK_THROWS_AS(check_allocation(a, g, network_layout(2, 16, 3)), ConfigError);
    a.cells[0].entries[0].entry.source = 1 - a.cells[0].entries[0].entry.source;
    CHECK_THROWS_AS(check_allocation(a, g, layout), ConfigError);
    CHECK_THROWS_AS(deserialize_allocation("allocation v1\nmode adaptive\ncell=0 type=normal\n"
                                           "node=2 src=0 op=SepConv3x3 p=0.500000 C=8 c_op=5 c_skip=4\n"),
                    ParseError);
}

TEST_CASE("genotype text round-trips exactly") {
    Rng rng(50);
    for (int i = 0; i < 50; ++i) {
        const Genotype g = random_genotype(rng);
        const std::string text = serialize_genotype(g);
        const Genotype back = deserialize_genotype(text);
        CHECK(back == g);
        CHECK(serialize_genotype(back) == text);
    }
    const std::string text = serialize_genotype(two_entry_genotype(400000, 300000));
    CHECK(text ==
          "genotype v1\nspace S6\nnormal:\n"
          "node=2 src=0 op=SepConv3x3 p=0.400000\nnode=2 src=1 op=SepConv5x5 p=0.300000\n"
          "reduce:\n"
          "node=2 src=0 op=SepConv3x3 p=0.400000\nnode=2 src=1 op=SepConv5x5 p=0.300000\n");
}

TEST_CASE("genotype parse errors name the offending line") {
    const std::string good = serialize_genotype(two_entry_genotype(400000, 300000));
    auto line_of = [](const std::string& text) -> std::size_t {
        try {
            deserialize_genotype(text);
        } catch (const ParseError& e) {
            return e.line();
        }
        return 0;
    };
    auto replace = [&](const std::string& from, const std::string& to) {
        std::string t = good;
        t.replace(t.find(from), from.size(), to);
        return t;
    };
    CHECK(line_of(replace("node=2 src=1 op=SepConv5x5", "node=2 src=0 op=SepConv5x5")) == 5);
    CHECK(line_of(replace("op=SepConv5x5", "op=Conv9x9")) == 5);
    CHECK(line_of(replace("p=0.300000", "p=0.3")) == 5);
    CHECK(line_of(replace("node=2 src=1", "node2 src=1")) == 5);
    CHECK(line_of(replace("op=SepConv5x5", "op=SkipConnect")) == 5);
    CHECK(line_of(replace("op=SepConv5x5", "op=Zero")) == 5);
    CHECK(line_of(replace("reduce:\n", "reduce:\nnode=2 src=0 op=SepConv3x3 p=0.100000\n")) == 8);
    CHECK(line_of("genotype v1\nspace S6\nnormal:\n"
                  "node=2 src=0 op=SepConv3x3 p=0.400000\nnode=2 src=1 op=SepConv3x3 p=0.400000\n"
                  "node=3 src=0 op=SepConv3x3 p=0.400000\nnode=3 src=1 op=SepConv3x3 p=0.400000\n"
                  "node=3 src=2 op=SepConv3x3 p=0.400000\nreduce:\n") == 8);
    CHECK(line_of(replace("space S6", "space S9")) == 2);
    CHECK(line_of(replace("genotype v1", "genotype v2")) == 1);
    CHECK(line_of(replace("p=0.400000", "p=0.000000")) == 4);
    CHECK(line_of(replace("\n", "\r\n")) == 1);
}

TEST_CASE("DOT export draws every retained entry exactly once") {
    Rng rng(8);
    const Genotype g = derive_genotype(ArchParams::gaussian(14, 5, rng, 1.0), make_space(SpaceId::S7), build_topology(4));
    const NetworkAllocation a = allocate_network(g, network_layout(1, 16, 3), AllocationMode::Adaptive);
    for (CellType t : {CellType::Normal, CellType::Reduction}) {
        const std::string dot = export_dot(g, a, t);
        CHECK(dot == export_dot(g, a, t));
        CHECK(dot.rfind(t == CellType::Normal ? "digraph normal {" : "digraph reduce {", 0) == 0);
        const std::regex label(R"re(label="(\w+) p=(\d\.\d{6}) c=(\d+)/(\d+)")re");
        std::multiset<std::string> drawn;
        for (auto it = std::sregex_iterator(dot.begin(), dot.end(), label); it != std::sregex_iterator(); ++it)
            drawn.insert((*it)[1].str() + " " + (*it)[2].str() + " " + (*it)[3].str() + "/" + (*it)[4].str());
        CHECK(drawn.size() == 8);
        const CellAllocation& first = a.cells[t == CellType::Normal ? 0 : 1];
        for (const auto& ea : first.entries) {
            char p[16];
            std::snprintf(p, sizeof p, "%.6f", ea.entry.strength());
            const std::string key = std::string(op_name(ea.entry.op)) + " " + p + " " +
                                    std::to_string(ea.op_channels) + "/" + std::to_string(ea.total);
            CHECK(drawn.count(key) >= 1);
        }
    }
}
