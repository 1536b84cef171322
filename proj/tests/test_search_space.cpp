// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <set>

#include "aca/operations.hpp"
#include "aca/search_space.hpp"
#include "oracles.hpp"

using namespace aca;

TEST_CASE("operation spaces") {
    const auto s = ops_for_space(SpaceId::S);
    CHECK(s.size() == 8);
    CHECK(std::count(s.begin(), s.end(), OpKind::SkipConnect) == 1);
    CHECK(std::count(s.begin(), s.end(), OpKind::Zero) == 1);

    const std::vector<OpKind> convs{OpKind::SepConv3x3, OpKind::SepConv5x5, OpKind::DilSepConv3x3,
                                    OpKind::DilSepConv5x5};
    CHECK(ops_for_space(SpaceId::S6) == convs);
    auto s7 = convs;
    s7.push_back(OpKind::SkipConnect);
    CHECK(ops_for_space(SpaceId::S7) == s7);

    const auto s5 = ops_for_space(SpaceId::S5);
    CHECK(s5.size() == 7);
    CHECK(std::find(s5.begin(), s5.end(), OpKind::SkipConnect) == s5.end());
    CHECK(std::find(s5.begin(), s5.end(), OpKind::Zero) != s5.end());

    for (SpaceId id : {SpaceId::S, SpaceId::S5, SpaceId::S6, SpaceId::S7}) {
        CHECK(ops_for_space(id) == ops_for_space(id));
        CHECK(parse_space(space_name(id)) == id);
        const SearchSpace sp = make_space(id);
        for (int k = 0; k < sp.size(); ++k) CHECK(sp.index_of(sp.ops[static_cast<std::size_t>(k)]) == k);
    }
    CHECK_THROWS_AS(parse_space("S4"), ConfigError);
    CHECK_THROWS_AS(parse_op("Conv7x7"), ConfigError);
    for (OpKind k : s) CHECK(parse_op(op_name(k)) == k);
    CHECK(is_parametric(OpKind::DilSepConv5x5));
    CHECK_FALSE(is_parametric(OpKind::SkipConnect));
    CHECK(op_dilation(OpKind::DilSepConv3x3) == 2);
    CHECK(op_dilation(OpKind::SepConv5x5) == 1);
}

TEST_CASE("cell topology") {
    CHECK(build_topology(4).edges.size() == 14);
    CHECK(build_topology(1).edges == std::vector<Edge>{{0, 2}, {1, 2}});
    for (int b = 1; b <= 6; ++b) {
        const CellTopology t = build_topology(b);
        std::vector<Edge> brute;
        for (int j = 2; j < b + 2; ++j)
            for (int i = 0; i < j; ++i) brute.push_back({i, j});
        CHECK(t.edges == brute);
        int expected = 0;
        for (int m = 0; m < b; ++m) expected += 2 + m;
        CHECK(static_cast<int>(t.edges.size()) == expected);
        for (int j = 2; j < b + 2; ++j)
            for (int e : t.edges_into(j)) CHECK(t.edges[static_cast<std::size_t>(e)].target == j);
        CHECK(t.edge_index(0, 2) == 0);
        CHECK(t.edge_index(3, 2) == -1);
    }
    CHECK_THROWS_AS(build_topology(0), ConfigError);
}

TEST_CASE("network layout") {
    for (int n = 1; n <= 5; ++n) {
        const NetworkLayout l = network_layout(n, 8, 3);
        const int depth = 3 * n + 2;
        REQUIRE(l.depth() == depth);
        std::vector<int> reductions;
        for (int i = 0; i < depth; ++i)
            if (l.cells[static_cast<std::size_t>(i)] == CellType::Reduction) reductions.push_back(i);
        CHECK(reductions == std::vector<int>{depth / 3, 2 * depth / 3});
        const auto widths = l.node_channels();
        int c = 8;
        for (int i = 0; i < depth; ++i) {
            if (l.cells[static_cast<std::size_t>(i)] == CellType::Reduction) c *= 2;
            CHECK(widths[static_cast<std::size_t>(i)] == c);
        }
    }
    const auto five = network_layout(1, 8, 3).cells;
    using enum CellType;
    CHECK(five == std::vector<CellType>{Normal, Reduction, Normal, Reduction, Normal});
    CHECK(network_layout(2, 8, 3).depth() == 8);
    const auto l5 = network_layout(5, 8, 3);
    CHECK(l5.cells[5] == Reduction);
    CHECK(l5.cells[11] == Reduction);
    CHECK_THROWS_AS(network_layout(0, 8, 3), ConfigError);
}

namespace {

Tensor normalize_oracle(const Tensor& x) {
    const Shape s = x.shape();
    Tensor out(s);
    const double count = static_cast<double>(s.n) * s.h * s.w;
    for (int c = 0; c < s.c; ++c) {
        double mean = 0, var = 0;
        for (int n = 0; n < s.n; ++n)
            for (int h = 0; h < s.h; ++h)
                for (int w = 0; w < s.w; ++w) mean += x.at(n, c, h, w);
        mean /= count;
        for (int n = 0; n < s.n; ++n)
            for (int h = 0; h < s.h; ++h)
                for (int w = 0; w < s.w; ++w) var += (x.at(n, c, h, w) - mean) * (x.at(n, c, h, w) - mean);
        var /= count;
        for (int n = 0; n < s.n; ++n)
            for (int h = 0; h < s.h; ++h)
                for (int w = 0; w < s.w; ++w)
                    out.at(n, c, h, w) = static_cast<Real>((x.at(n, c, h, w) - mean) / std::sqrt(var + kNormEpsilon));
    }
    return out;
}

Tensor relu_oracle(Tensor x) {
    for (auto& v : x.data()) v = std::max(v, Real(0));
    return x;
}

struct OpFixture {
    ParamStore store;
    Rng rng{21};
    Tape tape;
};

} // namespace

TEST_CASE("apply_operation: shapes, identity, zero, composition oracle") {
    Rng data_rng(3);
    const Tensor x = oracle::random_tensor({4, 6, 8, 8}, data_rng);
    for (OpKind kind : ops_for_space(SpaceId::S))
        for (int stride : {1, 2}) {
            OpFixture f;
            const Operation op(kind, f.store, f.rng, "op", 6, 6, stride, {});
            ParamBinding params(f.tape, f.store, true);
            Var xv = f.tape.leaf(x);
            const Var y = apply_operation(op, xv, params, true);
            CAPTURE(op_name(kind));
            CHECK(y.shape() == Shape{4, 6, 8 / stride, 8 / stride});
            if (kind == OpKind::SkipConnect && stride == 1) CHECK(oracle::max_abs_diff(y.value(), x) == 0);
            if (kind == OpKind::Zero) {
                CHECK(oracle::max_abs(y.value()) == 0);
                const Gradients g = f.tape.backward(sum(mul(y, f.tape.constant(Tensor(y.shape(), Real(1))))));
                CHECK((!g.has(xv) || oracle::max_abs(g.of(xv)) == 0));
            }
        }

    for (OpKind kind : {OpKind::SepConv3x3, OpKind::DilSepConv5x5}) {
        OpFixture f;
        const Operation op(kind, f.store, f.rng, "op", 6, 6, 1, {});
        ParamBinding params(f.tape, f.store, true);
        const Tensor got = apply_operation(op, f.tape.leaf(x), params, true).value();
        const int k = op_kernel(kind), d = op_dilation(kind);
        const Tensor dw = oracle::conv2d(relu_oracle(x), f.store.value("op.dw"), 1, d, d * (k - 1) / 2, 6);
        const Tensor want = normalize_oracle(oracle::conv2d(dw, f.store.value("op.pw"), 1, 1, 0, 1));
        CHECK(oracle::max_abs_diff(got, want) < 1e-4);
    }
}

TEST_CASE("operations reject bad strides and channel counts") {
    OpFixture f;
    CHECK_THROWS_AS(Operation(OpKind::SepConv3x3, f.store, f.rng, "a", 4, 4, 3, {}), ConfigError);
    CHECK_THROWS_AS(Operation(OpKind::SepConv3x3, f.store, f.rng, "b", 4, 5, 1, {}), ConfigError);
    const Operation op(OpKind::SepConv3x3, f.store, f.rng, "c", 4, 4, 1, {});
    ParamStore empty;
    ParamBinding params(f.tape, empty, true);
    CHECK_THROWS_AS(op.forward(f.tape.leaf(Tensor({1, 4, 4, 4})), params, true), ConfigError);
}
