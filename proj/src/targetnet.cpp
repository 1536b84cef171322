// SPDX-License-Identifier: Apache-2.0
#include "aca/targetnet.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "aca/optim.hpp"
#include "aca/search.hpp"

namespace aca {

std::string_view ablation_name(AblationMode m) noexcept {
    switch (m) {
        case AblationMode::Full: return "full";
        case AblationMode::NoSkip: return "no_skip";
        case AblationMode::NoChannel: return "no_channel";
    }
    return "?";
}

AblationMode parse_ablation(std::string_view name) {
    for (AblationMode m : {AblationMode::Full, AblationMode::NoSkip, AblationMode::NoChannel})
        if (ablation_name(m) == name) return m;
    throw ConfigError("unknown ablation mode '" + std::string(name) + "' (expected full, no_skip or no_channel)");
}

NetworkAllocation effective_allocation(const Genotype& g, const NetworkAllocation& given, const TargetConfig& config,
                                       AblationMode mode) {
    switch (mode) {
        case AblationMode::Full: return given;
        case AblationMode::NoSkip: return allocate_network(g, config.layout(), AllocationMode::FullWidth);
        case AblationMode::NoChannel:
            return allocate_network(g, config.layout(), AllocationMode::Fixed, config.fixed_channels);
    }
    return given;
}

TargetNet::TargetNet(const Genotype& genotype, const NetworkAllocation& allocation, const TargetConfig& config,
                     AblationMode mode, std::uint64_t seed)
    : genotype_(genotype),
      config_(config),
      mode_(mode),
      skeleton_([&]() -> Skeleton {
          validate(genotype);
          const NetworkLayout layout = config.layout();
          check_allocation(allocation, genotype, layout);
          Rng rng(derive_seed(seed, "target.skeleton"));
          return Skeleton(layout, config.in_channels, genotype.nodes, weights_, rng, true);
      }()) {
    allocation_ = effective_allocation(genotype, allocation, config, mode);
    BlockOptions opt;
    opt.affine = true;
    opt.sepconv_repeats = config.sepconv_repeats;
    opt.norm_after_pool = false;
    Rng rng(derive_seed(seed, "target.cells"));
    const auto& plans = skeleton_.plans();
    cells_.resize(plans.size());
    for (std::size_t c = 0; c < plans.size(); ++c) {
        for (const EntryAllocation& ea : allocation_.cells[c].entries) {
            const int stride =
                plans[c].type == CellType::Reduction && ea.entry.source < CellTopology::num_inputs ? 2 : 1;
            const std::string name = "cell" + std::to_string(c) + ".node" + std::to_string(ea.entry.node) + ".src" +
                                     std::to_string(ea.entry.source);
            if (ea.skip_channels > ea.total) throw ConfigError(name + ": skip channels exceed the input width");
            Operation op(ea.entry.op, weights_, rng, name + "." + std::string(op_name(ea.entry.op)), ea.total,
                         ea.op_channels, stride, opt);
            std::optional<FactorizedReduce> refill;
            if (ea.skip_channels > 0 && stride == 2)
                refill.emplace(weights_, rng, name + ".refill", ea.skip_channels, ea.skip_channels, true);
            cells_[c].push_back({ea, stride, std::move(op), std::move(refill)});
        }
    }
}

Var TargetNet::entry_forward(int cell, std::size_t entry, Var x, ParamBinding& params, bool training) const {
    const Entry& e = cells_.at(static_cast<std::size_t>(cell)).at(entry);
    Var y = e.op.forward(x, params, training);
    if (e.alloc.skip_channels == 0) return y;
    Var s = slice_channels(x, 0, e.alloc.skip_channels);
    if (e.refill) s = e.refill->forward(s, params, training);
    const Var parts[] = {y, s};
    return concat_channels(parts);
}

Var TargetNet::cell_body(int cell, Var in0, Var in1, ParamBinding& params, bool training) const {
    const auto& entries = cells_.at(static_cast<std::size_t>(cell));
    std::vector<Var> states{in0, in1};
    for (int j = CellTopology::num_inputs; j < CellTopology::num_inputs + genotype_.nodes; ++j) {
        std::vector<Var> terms;
        for (std::size_t i = 0; i < entries.size(); ++i)
            if (entries[i].alloc.entry.node == j)
                terms.push_back(entry_forward(cell, i, states.at(static_cast<std::size_t>(entries[i].alloc.entry.source)),
                                              params, training));
        states.push_back(add_n(terms));
    }
    const std::span<const Var> nodes(states.begin() + CellTopology::num_inputs, states.end());
    return nodes.size() == 1 ? nodes.front() : concat_channels(nodes);
}

Var TargetNet::forward(Var images, ParamBinding& params, bool training) const {
    return skeleton_.forward(images, params, training,
                             [&](int cell, Var in0, Var in1) { return cell_body(cell, in0, in1, params, training); });
}

Tensor TargetNet::logits(const Tensor& images) const {
    Tape tape;
    // Inference mode only reads the running statistics.
    ParamBinding p(tape, const_cast<ParamStore&>(weights_), false);
    return forward(tape.constant(images), p, false).value();
}

std::size_t TargetNet::param_count() const {
    std::size_t n = skeleton_.param_count();
    for (const auto& cell : cells_)
        for (const Entry& e : cell) {
            n += e.op.param_count();
            if (e.refill) n += e.refill->param_count();
        }
    return n;
}

std::size_t TargetNet::mac_count(int height, int width) const {
    std::size_t n = skeleton_.mac_count(height, width);
    int h = height, w = width;
    for (std::size_t c = 0; c < cells_.size(); ++c) {
        const bool reduction = skeleton_.plans()[c].type == CellType::Reduction;
        const int hr = reduction ? (h + 1) / 2 : h;
        const int wr = reduction ? (w + 1) / 2 : w;
        for (const Entry& e : cells_[c]) {
            const bool from_input = e.alloc.entry.source < CellTopology::num_inputs;
            const Shape in{1, e.alloc.total, from_input ? h : hr, from_input ? w : wr};
            n += e.op.mac_count(in);
            if (e.refill) n += e.refill->mac_count({1, e.alloc.skip_channels, in.h, in.w});
        }
        h = hr;
        w = wr;
    }
    return n;
}

std::vector<NamedArray> TargetNet::to_arrays() const {
    std::vector<NamedArray> out;
    append_store_arrays(weights_, out);
    return out;
}

void TargetNet::load_arrays(const std::vector<NamedArray>& arrays) { load_store_arrays(weights_, arrays); }

ParamsFlops count_params_flops(const TargetNet& net, int height, int width) {
    return {net.param_count(), net.mac_count(height, width)};
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("eval.epochs must be >= 1");
    if (batch_size < 2) throw ConfigError("eval.batch_size must be >= 2");
    for (double v : {lr, momentum, weight_decay})
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("training rates and decays must be finite and >= 0");
}

EvalResult evaluate(const TargetNet& net, const TensorSet& data, int batch_size) {
    if (data.classes != net.config().num_classes)
        throw ConfigError("network has " + std::to_string(net.config().num_classes) + " classes, data has " +
                          std::to_string(data.classes));
    if (data.size() == 0) throw ConfigError("cannot evaluate on an empty dataset");
    const auto batch = static_cast<std::size_t>(std::max(1, batch_size));
    std::size_t correct = 0;
    double loss_sum = 0.0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < data.size(); start += batch) {
        idx.resize(std::min(batch, data.size() - start));
        std::iota(idx.begin(), idx.end(), start);
        const std::vector<int> labels = data.gather_labels(idx);
        Tape tape;
        ParamBinding p(tape, const_cast<ParamStore&>(net.weights()), false);
        Var logits = net.forward(tape.constant(data.gather(idx)), p, false);
        Var loss = cross_entropy(logits, labels);
        loss_sum += static_cast<double>(loss.value()[0]) * static_cast<double>(idx.size());
        correct += count_correct(logits.value(), labels);
    }
    const double n = static_cast<double>(data.size());
    return {static_cast<double>(correct) / n, loss_sum / n};
}

std::string TrainTrace::to_csv(bool wall_time) const {
    std::string out = "epoch,train_loss,train_acc,val_loss,val_acc,seconds\n";
    char buf[256];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.epoch, r.train_loss, r.train_acc, r.val_loss,
                      r.val_acc, wall_time ? r.seconds : 0.0);
        out += buf;
    }
    return out;
}

TrainTrace train_target(TargetNet& net, const TensorSet& train, const TensorSet& val, const TrainConfig& config,
                        const std::function<void(const TrainRecord&)>& on_epoch) {
    config.validate();
    if (train.classes != net.config().num_classes)
        throw ConfigError("network has " + std::to_string(net.config().num_classes) + " classes, data has " +
                          std::to_string(train.classes));
    if (train.size() < 2) throw ConfigError("training needs at least 2 samples");
    Sgd sgd(config.momentum, config.weight_decay);
    Rng rng(derive_seed(config.seed, "train.batches"));
    std::vector<std::size_t> order(train.size());
    const auto batch = static_cast<std::size_t>(config.batch_size);
    TrainTrace trace;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order.begin(), order.end());
        const double lr = cosine_lr(config.lr, epoch, config.epochs);
        double loss_sum = 0.0;
        std::size_t correct = 0, seen = 0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t n = std::min(batch, order.size() - start);
            if (n < 2) break;  // batch statistics need two samples
            const std::span<const std::size_t> idx(order.data() + start, n);
            const std::vector<int> labels = train.gather_labels(idx);
            Tape tape;
            ParamBinding p(tape, net.weights(), true);
            Var logits = net.forward(tape.constant(train.gather(idx)), p, true);
            Var loss = cross_entropy(logits, labels);
            const double l = loss.value()[0];
            if (!std::isfinite(l))
                throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                      std::to_string(start / batch));
            loss_sum += l * static_cast<double>(n);
            correct += count_correct(logits.value(), labels);
            seen += n;
            const Gradients g = tape.backward(loss);
            sgd.step(net.weights(), p, g, lr);
        }
        TrainRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(seen);
        rec.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
        const EvalResult ev = evaluate(net, val);
        rec.val_loss = ev.loss;
        rec.val_acc = ev.accuracy;
        if (!std::isfinite(ev.loss)) throw DivergenceError("non-finite validation loss at epoch " + std::to_string(epoch));
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        trace.records.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    return trace;
}

} // namespace aca
