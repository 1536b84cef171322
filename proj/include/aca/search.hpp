// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "aca/dataset.hpp"
#include "aca/genotype.hpp"
#include "aca/optim.hpp"
#include "aca/supernet.hpp"

namespace aca {

struct SearchConfig {
    int epochs = 50;
    int batch_size = 32;
    double w_lr = 0.05;
    double w_momentum = 0.9;
    double w_weight_decay = 3e-4;
    double alpha_lr = 3e-4;
    double alpha_weight_decay = 1e-3;
    double alpha_beta1 = 0.5;
    double alpha_beta2 = 0.999;
    /// Fraction of the training data used for weights; the rest drives alpha.
    double split = 0.5;
    std::uint64_t seed = 1;

    /// Throws ConfigError on out-of-range values. Rates may be zero.
    void validate() const;
};

struct Batch {
    Tensor images;
    std::vector<int> labels;
};

struct StepResult {
    double train_loss = 0.0;
    double val_loss = 0.0;
    /// Correct predictions on the validation batch, measured before the alpha update.
    std::size_t val_correct = 0;
};

/// Optimizer state of one search run.
struct SearchOptimizers {
    Sgd weights;
    Adam alpha;

    explicit SearchOptimizers(const SearchConfig& c)
        : weights(c.w_momentum, c.w_weight_decay), alpha(c.alpha_beta1, c.alpha_beta2, c.alpha_weight_decay) {}
};

/// First-order bilevel step: alpha descends the validation loss with the
/// weights frozen, then the weights descend the training loss with alpha
/// frozen. Throws DivergenceError on a non-finite loss.
StepResult alternating_step(SuperNet& net, SearchOptimizers& opt, const Batch& train, const Batch& val, double w_lr,
                            double alpha_lr);

/// Number of rows of `logits` (n, k, 1, 1) whose argmax equals the label.
std::size_t count_correct(const Tensor& logits, std::span<const int> labels);

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
    double skip_fraction = 0.0;
    double seconds = 0.0;
};

struct SearchTrace {
    std::vector<EpochRecord> records;

    /// `epoch,train_loss,val_loss,val_acc,skip_fraction,seconds` with six
    /// decimals. Seconds are written as zero unless `wall_time` is set, which
    /// keeps the file byte-deterministic.
    std::string to_csv(bool wall_time = false) const;
};

struct SearchResult {
    std::unique_ptr<SuperNet> net;
    SearchTrace trace;
    Genotype genotype;
};

/// Splits `data` into weight and alpha halves, normalizes with statistics of
/// `data`, and runs `config.epochs` epochs of alternating_step. Losses and
/// accuracy on the alpha half are averaged over the epoch's steps.
SearchResult run_search(const Dataset& data, const SuperNetConfig& net_config, const SearchConfig& config,
                        const std::function<void(const EpochRecord&)>& on_epoch = {});

} // namespace aca
