// SPDX-License-Identifier: Apache-2.0
#include "aca/supernet.hpp"

#include <cmath>
#include <cstdio>
#include <map>

namespace aca {

ArchParams::ArchParams(int edges, int ops) : edges_(edges), ops_(ops) {
    if (edges < 1 || ops < 1) throw ConfigError("ArchParams: need at least one edge and one operation");
    for (CellType t : {CellType::Normal, CellType::Reduction})
        for (int e = 0; e < edges; ++e) store_.add(row_name(t, e), Tensor({1, ops, 1, 1}));
}

ArchParams ArchParams::gaussian(int edges, int ops, Rng& rng, double stddev) {
    ArchParams a(edges, ops);
    for (auto& [_, t] : a.store_.params())
        for (auto& v : t.data()) v = static_cast<Real>(stddev * rng.normal());
    return a;
}

std::string ArchParams::row_name(CellType type, int edge) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "alpha.%s.%04d", type == CellType::Normal ? "normal" : "reduce", edge);
    return buf;
}

std::span<Real> ArchParams::row(CellType type, int edge) {
    if (edge < 0 || edge >= edges_) throw ConfigError("edge index " + std::to_string(edge) + " out of range");
    return store_.value(row_name(type, edge)).data();
}

std::span<const Real> ArchParams::row(CellType type, int edge) const {
    if (edge < 0 || edge >= edges_) throw ConfigError("edge index " + std::to_string(edge) + " out of range");
    return store_.value(row_name(type, edge)).data();
}

bool ArchParams::all_finite() const {
    for (const auto& [_, t] : store_.params())
        if (!t.all_finite()) return false;
    return true;
}

std::vector<NamedArray> ArchParams::to_arrays() const {
    std::vector<NamedArray> out;
    for (CellType t : {CellType::Normal, CellType::Reduction}) {
        NamedArray a;
        a.name = t == CellType::Normal ? "alpha.normal" : "alpha.reduce";
        a.dims = {static_cast<std::uint32_t>(edges_), static_cast<std::uint32_t>(ops_)};
        for (int e = 0; e < edges_; ++e)
            for (Real v : row(t, e)) a.values.push_back(static_cast<float>(v));
        out.push_back(std::move(a));
    }
    return out;
}

ArchParams ArchParams::from_arrays(const std::vector<NamedArray>& arrays) {
    const NamedArray* normal = nullptr;
    const NamedArray* reduce = nullptr;
    for (const auto& a : arrays) {
        if (a.name == "alpha.normal") normal = &a;
        if (a.name == "alpha.reduce") reduce = &a;
    }
    if (!normal || !reduce) throw ConfigError("checkpoint has no architecture parameters");
    if (normal->dims.size() != 2 || normal->dims != reduce->dims)
        throw ConfigError("checkpoint architecture parameters have inconsistent shapes");
    ArchParams out(static_cast<int>(normal->dims[0]), static_cast<int>(normal->dims[1]));
    for (const auto* a : {normal, reduce}) {
        const CellType t = a == normal ? CellType::Normal : CellType::Reduction;
        for (int e = 0; e < out.edges_; ++e) {
            auto r = out.row(t, e);
            for (int k = 0; k < out.ops_; ++k) r[k] = static_cast<Real>(a->values[static_cast<std::size_t>(e) * out.ops_ + k]);
        }
    }
    return out;
}

bool ArchParams::operator==(const ArchParams& other) const {
    if (edges_ != other.edges_ || ops_ != other.ops_) return false;
    for (const auto& [name, t] : store_.params()) {
        const Tensor& u = other.store_.value(name);
        for (std::size_t i = 0; i < t.size(); ++i)
            if (t[i] != u[i]) return false;
    }
    return true;
}

std::vector<Real> strengths(const ArchParams& arch, CellType type, int edge) {
    return softmax(arch.row(type, edge));
}

namespace {

SuperNetConfig validated(const SuperNetConfig& c) {
    if (c.nodes < 1) throw ConfigError("super-net needs at least one intermediate node");
    if (c.init_channels < 2 || c.init_channels % 2 != 0)
        throw ConfigError("super-net init_channels must be even and >= 2");
    return c;
}

} // namespace

SuperNet::SuperNet(const SuperNetConfig& config, std::uint64_t seed)
    : config_(validated(config)),
      space_(make_space(config.space)),
      topology_(build_topology(config.nodes)),
      skeleton_([&]() -> Skeleton {
          Rng rng(derive_seed(seed, "supernet.weights"));
          return Skeleton(network_layout(config.repeats, config.init_channels, config.num_classes),
                          config.in_channels, config.nodes, weights_, rng, false);
      }()) {
    Rng alpha_rng(derive_seed(seed, "supernet.alpha"));
    arch_ = ArchParams::gaussian(static_cast<int>(topology_.edges.size()), space_.size(), alpha_rng);

    Rng rng(derive_seed(seed, "supernet.ops"));
    BlockOptions opt;
    opt.affine = false;
    opt.sepconv_repeats = config.sepconv_repeats;
    opt.norm_after_pool = true;
    const auto& plans = skeleton_.plans();
    ops_.resize(plans.size());
    for (std::size_t c = 0; c < plans.size(); ++c) {
        for (std::size_t e = 0; e < topology_.edges.size(); ++e) {
            std::vector<Operation> ops;
            const int stride = edge_stride(static_cast<int>(c), static_cast<int>(e));
            for (OpKind kind : space_.ops) {
                const std::string name = "cell" + std::to_string(c) + ".edge" + std::to_string(e) + "." +
                                         std::string(op_name(kind));
                ops.emplace_back(kind, weights_, rng, name, plans[c].node_channels, plans[c].node_channels, stride, opt);
            }
            ops_[c].push_back(std::move(ops));
        }
    }
}

const Operation& SuperNet::operation(int cell, int edge, int k) const {
    return ops_.at(static_cast<std::size_t>(cell)).at(static_cast<std::size_t>(edge)).at(static_cast<std::size_t>(k));
}

int SuperNet::edge_stride(int cell, int edge) const {
    const CellType t = skeleton_.plans().at(static_cast<std::size_t>(cell)).type;
    const Edge& e = topology_.edges.at(static_cast<std::size_t>(edge));
    return t == CellType::Reduction && e.source < CellTopology::num_inputs ? 2 : 1;
}

Var SuperNet::edge_strengths(CellType type, int edge, SuperNetPass& pass) const {
    return softmax(pass.alphas(ArchParams::row_name(type, edge)));
}

Var SuperNet::mixed_edge_forward(int cell, int edge, Var x, SuperNetPass& pass) const {
    const CellType type = skeleton_.plans().at(static_cast<std::size_t>(cell)).type;
    const auto& ops = ops_.at(static_cast<std::size_t>(cell)).at(static_cast<std::size_t>(edge));
    std::vector<Var> outs;
    outs.reserve(ops.size());
    // Every convolutional candidate starts with relu(x); compute it once per edge.
    Var rx;
    for (const Operation& op : ops) {
        if (!rx.valid() && (is_parametric(op.kind()) || (op.kind() == OpKind::SkipConnect && op.stride() == 2)))
            rx = relu(x);
        outs.push_back(op.forward(x, pass.weights, pass.training, rx.valid() ? &rx : nullptr));
    }
    return mix(outs, edge_strengths(type, edge, pass));
}

Var SuperNet::cell_body(int cell, Var in0, Var in1, SuperNetPass& pass) const {
    std::vector<Var> states{in0, in1};
    for (int j = CellTopology::num_inputs; j < topology_.num_nodes(); ++j) {
        std::vector<Var> terms;
        for (int e : topology_.edges_into(j))
            terms.push_back(mixed_edge_forward(cell, e, states[static_cast<std::size_t>(topology_.edges[e].source)], pass));
        states.push_back(add_n(terms));
    }
    const std::span<const Var> nodes(states.begin() + CellTopology::num_inputs, states.end());
    return nodes.size() == 1 ? nodes.front() : concat_channels(nodes);
}

Var SuperNet::cell_forward(int cell, Var s0, Var s1, SuperNetPass& pass) const {
    auto [in0, in1] = skeleton_.preprocess(cell, s0, s1, pass.weights, pass.training);
    return cell_body(cell, in0, in1, pass);
}

Var SuperNet::forward(Var images, SuperNetPass& pass) const {
    return skeleton_.forward(images, pass.weights, pass.training,
                             [&](int cell, Var in0, Var in1) { return cell_body(cell, in0, in1, pass); });
}

Tensor SuperNet::logits(const Tensor& images) const {
    Tape tape;
    // Running statistics are not part of the search state; a scratch copy absorbs updates.
    ParamStore scratch = weights_;
    ArchParams arch = arch_;
    ParamBinding w(tape, scratch, false);
    ParamBinding a(tape, arch.store(), false);
    SuperNetPass pass{w, a, true};
    return forward(tape.constant(images), pass).value();
}

void append_store_arrays(const ParamStore& store, std::vector<NamedArray>& out) {
    for (const auto& [name, t] : store.params()) {
        NamedArray a;
        a.name = name;
        const Shape s = t.shape();
        a.dims = {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c), static_cast<std::uint32_t>(s.h),
                  static_cast<std::uint32_t>(s.w)};
        a.values.assign(t.data().begin(), t.data().end());
        out.push_back(std::move(a));
    }
    for (const auto& [name, st] : store.all_stats()) {
        for (const auto* part : {&st.mean, &st.var}) {
            NamedArray a;
            a.name = name + (part == &st.mean ? ".running_mean" : ".running_var");
            a.dims = {static_cast<std::uint32_t>(part->size())};
            a.values.assign(part->begin(), part->end());
            out.push_back(std::move(a));
        }
    }
}

void load_store_arrays(ParamStore& store, const std::vector<NamedArray>& arrays) {
    std::map<std::string, const NamedArray*> by_name;
    for (const auto& a : arrays) by_name[a.name] = &a;
    auto find = [&](const std::string& name, std::size_t count) -> const NamedArray& {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw ConfigError("checkpoint is missing '" + name + "'");
        if (it->second->values.size() != count)
            throw ConfigError("checkpoint entry '" + name + "' has " + std::to_string(it->second->values.size()) +
                              " values, expected " + std::to_string(count));
        return *it->second;
    };
    for (auto& [name, t] : store.params()) {
        const NamedArray& a = find(name, t.size());
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<Real>(a.values[i]);
    }
    for (auto& [name, st] : store.all_stats()) {
        const NamedArray& m = find(name + ".running_mean", st.mean.size());
        const NamedArray& v = find(name + ".running_var", st.var.size());
        for (std::size_t i = 0; i < st.mean.size(); ++i) {
            st.mean[i] = static_cast<Real>(m.values[i]);
            st.var[i] = static_cast<Real>(v.values[i]);
        }
    }
}

std::vector<NamedArray> SuperNet::to_arrays() const {
    std::vector<NamedArray> out = arch_.to_arrays();
    append_store_arrays(weights_, out);
    return out;
}

void SuperNet::load_arrays(const std::vector<NamedArray>& arrays) {
    ArchParams a = ArchParams::from_arrays(arrays);
    if (a.edges() != arch_.edges() || a.ops() != arch_.ops())
        throw ConfigError("checkpoint architecture shape (" + std::to_string(a.edges()) + " edges, " +
                          std::to_string(a.ops()) + " ops) does not match the configured space " +
                          std::string(space_name(space_.id)) + " with " + std::to_string(arch_.edges()) + " edges");
    arch_ = std::move(a);
    load_store_arrays(weights_, arrays);
}

} // namespace aca
