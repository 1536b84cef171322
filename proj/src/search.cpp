// SPDX-License-Identifier: Apache-2.0
#include "aca/search.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace aca {

void SearchConfig::validate() const {
    if (epochs < 1) throw ConfigError("search.epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("search.batch_size must be >= 1");
    if (!(split > 0.0 && split < 1.0)) throw ConfigError("search.split must lie in (0, 1)");
    for (double v : {w_lr, w_momentum, w_weight_decay, alpha_lr, alpha_weight_decay})
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("search rates and decays must be finite and >= 0");
    if (!(alpha_beta1 >= 0.0 && alpha_beta1 < 1.0 && alpha_beta2 >= 0.0 && alpha_beta2 < 1.0))
        throw ConfigError("Adam betas must lie in [0, 1)");
}

std::size_t count_correct(const Tensor& logits, std::span<const int> labels) {
    const Shape s = logits.shape();
    if (static_cast<std::size_t>(s.n) != labels.size()) throw ConfigError("logits and labels disagree on batch size");
    std::size_t correct = 0;
    for (int i = 0; i < s.n; ++i) {
        int best = 0;
        for (int k = 1; k < s.c; ++k)
            if (logits.at(i, k, 0, 0) > logits.at(i, best, 0, 0)) best = k;
        if (best == labels[static_cast<std::size_t>(i)]) ++correct;
    }
    return correct;
}

StepResult alternating_step(SuperNet& net, SearchOptimizers& opt, const Batch& train, const Batch& val, double w_lr,
                            double alpha_lr) {
    if (train.labels.empty() || val.labels.empty()) throw ConfigError("search batches must be non-empty");
    StepResult r;
    {
        Tape tape;
        ParamBinding w(tape, net.weights(), false);
        ParamBinding a(tape, net.arch().store(), true);
        SuperNetPass pass{w, a, true};
        Var logits = net.forward(tape.constant(val.images), pass);
        Var loss = cross_entropy(logits, val.labels);
        r.val_loss = loss.value()[0];
        if (!std::isfinite(r.val_loss)) throw DivergenceError("non-finite validation loss in the architecture step");
        r.val_correct = count_correct(logits.value(), val.labels);
        const Gradients g = tape.backward(loss);
        opt.alpha.step(net.arch().store(), a, g, alpha_lr);
    }
    {
        Tape tape;
        ParamBinding w(tape, net.weights(), true);
        ParamBinding a(tape, net.arch().store(), false);
        SuperNetPass pass{w, a, true};
        Var loss = cross_entropy(net.forward(tape.constant(train.images), pass), train.labels);
        r.train_loss = loss.value()[0];
        if (!std::isfinite(r.train_loss)) throw DivergenceError("non-finite training loss in the weight step");
        const Gradients g = tape.backward(loss);
        opt.weights.step(net.weights(), w, g, w_lr);
    }
    return r;
}

std::string SearchTrace::to_csv(bool wall_time) const {
    std::string out = "epoch,train_loss,val_loss,val_acc,skip_fraction,seconds\n";
    char buf[256];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.epoch, r.train_loss, r.val_loss, r.val_acc,
                      r.skip_fraction, wall_time ? r.seconds : 0.0);
        out += buf;
    }
    return out;
}

SearchResult run_search(const Dataset& data, const SuperNetConfig& net_config, const SearchConfig& config,
                        const std::function<void(const EpochRecord&)>& on_epoch) {
    config.validate();
    if (data.classes < 2) throw ConfigError("search needs at least 2 classes");
    const auto batch = static_cast<std::size_t>(config.batch_size);
    if (data.size() < 2 * batch)
        throw ConfigError("search needs at least 2 x batch_size = " + std::to_string(2 * batch) + " samples, got " +
                          std::to_string(data.size()));
    if (net_config.num_classes != data.classes)
        throw ConfigError("super-net has " + std::to_string(net_config.num_classes) + " classes, data has " +
                          std::to_string(data.classes));

    auto [w_part, a_part] = split(data, config.split, derive_seed(config.seed, "search.split"));
    if (w_part.size() < batch || a_part.size() < batch)
        throw ConfigError("search split leaves fewer than batch_size samples in one half");
    const Normalizer norm = Normalizer::fit(data);
    const TensorSet w_set(w_part, norm);
    const TensorSet a_set(a_part, norm);

    SearchResult result;
    result.net = std::make_unique<SuperNet>(net_config, derive_seed(config.seed, "search.supernet"));
    SuperNet& net = *result.net;
    SearchOptimizers opt(config);
    Rng rng(derive_seed(config.seed, "search.batches"));

    std::vector<std::size_t> w_order(w_set.size()), a_order(a_set.size());
    const std::size_t steps = w_set.size() / batch;
    const std::size_t a_batches = a_set.size() / batch;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::iota(w_order.begin(), w_order.end(), std::size_t{0});
        std::iota(a_order.begin(), a_order.end(), std::size_t{0});
        rng.shuffle(w_order.begin(), w_order.end());
        rng.shuffle(a_order.begin(), a_order.end());
        const double lr = cosine_lr(config.w_lr, epoch, config.epochs);

        double train_sum = 0.0, val_sum = 0.0;
        std::size_t correct = 0, seen = 0;
        for (std::size_t s = 0; s < steps; ++s) {
            const std::span<const std::size_t> wi(w_order.data() + s * batch, batch);
            const std::span<const std::size_t> ai(a_order.data() + (s % a_batches) * batch, batch);
            const Batch train{w_set.gather(wi), w_set.gather_labels(wi)};
            const Batch val{a_set.gather(ai), a_set.gather_labels(ai)};
            StepResult r;
            try {
                r = alternating_step(net, opt, train, val, lr, config.alpha_lr);
            } catch (const DivergenceError& e) {
                throw DivergenceError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", step " +
                                      std::to_string(s) + ")");
            }
            train_sum += r.train_loss;
            val_sum += r.val_loss;
            correct += r.val_correct;
            seen += batch;
        }
        if (!net.arch().all_finite()) throw DivergenceError("architecture parameters became non-finite at epoch " + std::to_string(epoch));

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = train_sum / static_cast<double>(steps);
        rec.val_loss = val_sum / static_cast<double>(steps);
        rec.val_acc = static_cast<double>(correct) / static_cast<double>(seen);
        rec.skip_fraction = skip_fraction(derive_genotype(net.arch(), net.space(), net.topology()));
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.trace.records.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    result.genotype = derive_genotype(net.arch(), net.space(), net.topology());
    return result;
}

} // namespace aca
