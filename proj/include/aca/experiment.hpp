// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>

#include "aca/config.hpp"

namespace aca {

/// Train and validation parts of the configured dataset.
struct DataParts {
    Dataset train;
    Dataset val;
};

Dataset load_dataset(const ExperimentConfig& cfg);
DataParts prepare_data(const ExperimentConfig& cfg);

/// Creates `dir` and writes the resolved configuration as config.ini.
void prepare_run_dir(const ExperimentConfig& cfg, const std::filesystem::path& dir);
/// Records wall time of a stage in timing.txt (the only non-deterministic artifact).
void record_timing(const std::filesystem::path& dir, const std::string& stage, double seconds);

struct SearchStage {
    Genotype genotype;
    SearchTrace trace;
};
/// Writes supernet.acas, search.csv and genotype.txt into `dir`.
SearchStage search_stage(const ExperimentConfig& cfg, const DataParts& data, const std::filesystem::path& dir,
                         std::ostream* log = nullptr);

struct DeriveStage {
    Genotype genotype;
    NetworkAllocation allocation;
};
/// Reads architecture parameters from a super-net checkpoint and writes
/// genotype.txt and allocation.txt for the configured derive mode.
DeriveStage derive_stage(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                         const std::filesystem::path& dir);

struct TrainMetrics {
    AblationMode ablation = AblationMode::Full;
    double train_acc = 0.0;
    EvalResult val;
    ParamsFlops counts;
};
std::string metrics_text(const TrainMetrics& m);

/// Trains the target-net; writes eval.csv, metrics.txt and target.acas.
TrainMetrics train_stage(const ExperimentConfig& cfg, const DataParts& data, const Genotype& genotype,
                         const NetworkAllocation& allocation, const std::filesystem::path& dir,
                         std::ostream* log = nullptr);

/// Evaluates a trained target-net checkpoint on the validation part.
TrainMetrics eval_stage(const ExperimentConfig& cfg, const DataParts& data, const Genotype& genotype,
                        const NetworkAllocation& allocation, const std::filesystem::path& checkpoint);

/// search -> derive -> train in one run directory.
TrainMetrics run_pipeline(const ExperimentConfig& cfg, const std::filesystem::path& dir, std::ostream* log = nullptr);

/// Writes normal.dot and reduce.dot.
void export_dot_files(const Genotype& genotype, const NetworkAllocation& allocation, const std::filesystem::path& dir);

Genotype read_genotype(const std::filesystem::path& path);
NetworkAllocation read_allocation(const std::filesystem::path& path);

} // namespace aca
