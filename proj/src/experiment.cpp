// SPDX-License-Identifier: Apache-2.0
#include "aca/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

#include "aca/little_endian.hpp"

namespace aca {

namespace fs = std::filesystem;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

} // namespace

Dataset load_dataset(const ExperimentConfig& cfg) {
    if (cfg.get("dataset.source") == "raw") {
        const std::string images = cfg.get("dataset.images");
        const std::string labels = cfg.get("dataset.labels");
        if (images.empty() || labels.empty()) throw ConfigError("dataset.source = raw needs dataset.images and dataset.labels");
        return load_raw(images, labels);
    }
    return generate_synthetic(cfg.stage_seed("data"), cfg.synthetic());
}

DataParts prepare_data(const ExperimentConfig& cfg) {
    auto [train, val] = split(load_dataset(cfg), cfg.get_real("dataset.train_fraction"), cfg.stage_seed("data.split"));
    return {std::move(train), std::move(val)};
}

void prepare_run_dir(const ExperimentConfig& cfg, const fs::path& dir) {
    ensure_dir(dir);
    write_text(dir / "config.ini", cfg.to_ini());
}

void record_timing(const fs::path& dir, const std::string& stage, double seconds) {
    std::map<std::string, std::string> lines;
    if (fs::exists(dir / "timing.txt")) {
        std::istringstream in(read_text(dir / "timing.txt"));
        std::string key, value;
        while (in >> key >> value) lines[key] = value;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", seconds);
    lines[stage + "_seconds"] = buf;
    std::string out;
    for (const auto& [k, v] : lines) out += k + " " + v + "\n";
    write_text(dir / "timing.txt", out);
}

SearchStage search_stage(const ExperimentConfig& cfg, const DataParts& data, const fs::path& dir, std::ostream* log) {
    const auto t0 = std::chrono::steady_clock::now();
    SuperNetConfig net = cfg.supernet(data.train.classes);
    net.in_channels = data.train.channels;
    const SearchConfig sc = cfg.search();
    SearchResult r = run_search(data.train, net, sc, [&](const EpochRecord& e) {
        if (log)
            *log << "search epoch " << e.epoch + 1 << "/" << sc.epochs << " train_loss " << e.train_loss << " val_loss "
                 << e.val_loss << " val_acc " << e.val_acc << " skip " << e.skip_fraction << "\n";
    });
    write_checkpoint(dir / "supernet.acas", r.net->to_arrays());
    write_text(dir / "search.csv", r.trace.to_csv(cfg.wall_time()));
    write_text(dir / "genotype.txt", serialize_genotype(r.genotype));
    record_timing(dir, "search", seconds_since(t0));
    return {std::move(r.genotype), std::move(r.trace)};
}

DeriveStage derive_stage(const ExperimentConfig& cfg, const fs::path& checkpoint, const fs::path& dir) {
    const ArchParams arch = ArchParams::from_arrays(read_checkpoint(checkpoint));
    const SearchSpace space = make_space(parse_space(cfg.get("search.space")));
    const CellTopology topology = build_topology(cfg.get_int("search.nodes"));
    if (arch.ops() != space.size() || arch.edges() != static_cast<int>(topology.edges.size()))
        throw ConfigError("checkpoint holds " + std::to_string(arch.edges()) + " edges x " + std::to_string(arch.ops()) +
                          " operations; space " + std::string(space_name(space.id)) + " with " +
                          std::to_string(topology.num_intermediate) + " nodes needs " +
                          std::to_string(topology.edges.size()) + " x " + std::to_string(space.size()));
    DeriveStage d;
    d.genotype = derive_genotype(arch, space, topology);
    // The channel plan depends only on depth and width, not on the class count.
    const TargetConfig tc = cfg.target(2);
    d.allocation = allocate_network(d.genotype, tc.layout(), allocation_mode(cfg.derive_mode()), cfg.fixed_channels());
    ensure_dir(dir);
    write_text(dir / "genotype.txt", serialize_genotype(d.genotype));
    write_text(dir / "allocation.txt", serialize_allocation(d.allocation));
    return d;
}

std::string metrics_text(const TrainMetrics& m) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "ablation %s\nval_accuracy %.6f\nval_loss %.6f\ntrain_accuracy %.6f\nparams %zu\nmultiply_adds %zu\n",
                  std::string(ablation_name(m.ablation)).c_str(), m.val.accuracy, m.val.loss, m.train_acc,
                  m.counts.params, m.counts.macs);
    return buf;
}

namespace {

TargetConfig target_config(const ExperimentConfig& cfg, const DataParts& data) {
    TargetConfig tc = cfg.target(data.train.classes);
    tc.in_channels = data.train.channels;
    return tc;
}

} // namespace

TrainMetrics train_stage(const ExperimentConfig& cfg, const DataParts& data, const Genotype& genotype,
                         const NetworkAllocation& allocation, const fs::path& dir, std::ostream* log) {
    const auto t0 = std::chrono::steady_clock::now();
    const TrainConfig tc = cfg.training();
    TargetNet net(genotype, allocation, target_config(cfg, data), cfg.ablation(), cfg.stage_seed("target"));
    const Normalizer norm = Normalizer::fit(data.train);
    const TensorSet train(data.train, norm), val(data.val, norm);
    const TrainTrace trace = train_target(net, train, val, tc, [&](const TrainRecord& r) {
        if (log)
            *log << "train epoch " << r.epoch + 1 << "/" << tc.epochs << " train_loss " << r.train_loss << " train_acc "
                 << r.train_acc << " val_loss " << r.val_loss << " val_acc " << r.val_acc << "\n";
    });
    TrainMetrics m;
    m.ablation = net.mode();
    m.train_acc = trace.records.back().train_acc;
    m.val = {trace.records.back().val_acc, trace.records.back().val_loss};
    m.counts = count_params_flops(net, data.train.height, data.train.width);
    ensure_dir(dir);
    write_text(dir / "eval.csv", trace.to_csv(cfg.wall_time()));
    write_text(dir / "metrics.txt", metrics_text(m));
    write_checkpoint(dir / "target.acas", net.to_arrays());
    record_timing(dir, "train", seconds_since(t0));
    return m;
}

TrainMetrics eval_stage(const ExperimentConfig& cfg, const DataParts& data, const Genotype& genotype,
                        const NetworkAllocation& allocation, const fs::path& checkpoint) {
    TargetNet net(genotype, allocation, target_config(cfg, data), cfg.ablation(), cfg.stage_seed("target"));
    net.load_arrays(read_checkpoint(checkpoint));
    const Normalizer norm = Normalizer::fit(data.train);
    TrainMetrics m;
    m.ablation = net.mode();
    m.train_acc = evaluate(net, TensorSet(data.train, norm)).accuracy;
    m.val = evaluate(net, TensorSet(data.val, norm));
    m.counts = count_params_flops(net, data.train.height, data.train.width);
    return m;
}

TrainMetrics run_pipeline(const ExperimentConfig& cfg, const fs::path& dir, std::ostream* log) {
    prepare_run_dir(cfg, dir);
    const DataParts data = prepare_data(cfg);
    search_stage(cfg, data, dir, log);
    const DeriveStage d = derive_stage(cfg, dir / "supernet.acas", dir);
    return train_stage(cfg, data, d.genotype, d.allocation, dir, log);
}

void export_dot_files(const Genotype& genotype, const NetworkAllocation& allocation, const fs::path& dir) {
    ensure_dir(dir);
    write_text(dir / "normal.dot", export_dot(genotype, allocation, CellType::Normal));
    write_text(dir / "reduce.dot", export_dot(genotype, allocation, CellType::Reduction));
}

Genotype read_genotype(const fs::path& path) { return deserialize_genotype(read_text(path)); }

NetworkAllocation read_allocation(const fs::path& path) { return deserialize_allocation(read_text(path)); }

} // namespace aca
