// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aca/checkpoint.hpp"
#include "aca/dataset.hpp"
#include "aca/genotype.hpp"
#include "aca/macro.hpp"

namespace aca {

/// full: adaptive allocation with skip refill; no_skip: every op at full
/// width, no refill; no_channel: fixed skip width instead of adaptive.
enum class AblationMode : std::uint8_t { Full, NoSkip, NoChannel };

std::string_view ablation_name(AblationMode m) noexcept;
AblationMode parse_ablation(std::string_view name);

struct TargetConfig {
    int repeats = 1;
    int init_channels = 16;
    int in_channels = 3;
    int num_classes = 3;
    int sepconv_repeats = 1;
    /// Skip width of the no_channel ablation.
    int fixed_channels = 8;

    NetworkLayout layout() const { return network_layout(repeats, init_channels, num_classes); }
};

/// Allocation actually used by an ablation mode: `given` for full, the fixed
/// or full-width plan otherwise.
NetworkAllocation effective_allocation(const Genotype& g, const NetworkAllocation& given, const TargetConfig& config,
                                       AblationMode mode);

class TargetNet {
public:
    TargetNet(const Genotype& genotype, const NetworkAllocation& allocation, const TargetConfig& config,
              AblationMode mode, std::uint64_t seed);

    const Genotype& genotype() const noexcept { return genotype_; }
    const NetworkAllocation& allocation() const noexcept { return allocation_; }
    const TargetConfig& config() const noexcept { return config_; }
    AblationMode mode() const noexcept { return mode_; }
    const NetworkLayout& layout() const noexcept { return skeleton_.layout(); }
    const Skeleton& skeleton() const noexcept { return skeleton_; }
    ParamStore& weights() noexcept { return weights_; }
    const ParamStore& weights() const noexcept { return weights_; }

    /// concat(op(x) at c_op channels, refill of the first c_skip channels of x).
    Var entry_forward(int cell, std::size_t entry, Var x, ParamBinding& params, bool training) const;
    /// Nodes are sums of their two entries; returns the concat of all nodes.
    Var cell_body(int cell, Var in0, Var in1, ParamBinding& params, bool training) const;
    Var forward(Var images, ParamBinding& params, bool training) const;
    /// Inference-mode logits (running statistics).
    Tensor logits(const Tensor& images) const;

    std::size_t param_count() const;
    /// Multiply-adds for one sample of size height x width.
    std::size_t mac_count(int height, int width) const;

    std::vector<NamedArray> to_arrays() const;
    void load_arrays(const std::vector<NamedArray>& arrays);

private:
    struct Entry {
        EntryAllocation alloc;
        int stride = 1;
        Operation op;
        std::optional<FactorizedReduce> refill;
    };

    Genotype genotype_;
    NetworkAllocation allocation_;
    TargetConfig config_;
    AblationMode mode_;
    ParamStore weights_;
    Skeleton skeleton_;
    std::vector<std::vector<Entry>> cells_;
};

struct ParamsFlops {
    std::size_t params = 0;
    std::size_t macs = 0;
};
ParamsFlops count_params_flops(const TargetNet& net, int height, int width);

struct TrainConfig {
    int epochs = 30;
    int batch_size = 32;
    double lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 3e-4;
    std::uint64_t seed = 1;

    void validate() const;
};

struct EvalResult {
    double accuracy = 0.0;
    double loss = 0.0;
};

/// Inference-mode top-1 accuracy and mean loss over `data`, in fixed batches.
EvalResult evaluate(const TargetNet& net, const TensorSet& data, int batch_size = 64);

struct TrainRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
    double seconds = 0.0;
};

struct TrainTrace {
    std::vector<TrainRecord> records;

    /// `epoch,train_loss,train_acc,val_loss,val_acc,seconds`, six decimals;
    /// seconds written as zero unless `wall_time` is set.
    std::string to_csv(bool wall_time = false) const;
};

/// SGD with momentum and a cosine schedule. Training statistics are averaged
/// over the epoch's batches; validation uses evaluate().
TrainTrace train_target(TargetNet& net, const TensorSet& train, const TensorSet& val, const TrainConfig& config,
                        const std::function<void(const TrainRecord&)>& on_epoch = {});

} // namespace aca
