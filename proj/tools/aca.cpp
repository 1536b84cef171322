// SPDX-License-Identifier: Apache-2.0
// Command-line driver: search, derive, train, eval, pipeline, export-dot, gen-data.

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>

#include "aca/experiment.hpp"
#include "aca/kernels.hpp"

namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kDivergence = 3, kIo = 4 };

struct Common {
    std::string config_file;
    std::string run_dir;
    int threads = 0;
    bool quiet = false;
    std::map<std::string, std::string> overrides;
};

/// Adds --config, --run-dir and one --<key> flag per configuration key.
void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("-c,--config", c.config_file, "INI configuration file")->check(CLI::ExistingFile);
    cmd->add_option("-o,--run-dir", c.run_dir, "output directory (default $ACA_RUNS_DIR/<command>-seed<seed>)");
    cmd->add_option("--threads", c.threads, "OpenMP threads for the kernels (0 = runtime default)");
    cmd->add_flag("-q,--quiet", c.quiet, "suppress per-epoch progress");
    for (const auto& key : aca::config_schema()) {
        const std::string name = key.name;
        cmd->add_option_function<std::string>(
               "--" + name, [&c, name](const std::string& v) { c.overrides[name] = v; },
               key.help + " [default: " + (key.default_value.empty() ? "\"\"" : key.default_value) + "]")
            ->group("Configuration keys");
    }
}

aca::ExperimentConfig resolve(const Common& c) {
    aca::ExperimentConfig cfg;
    if (!c.config_file.empty()) cfg.merge_file(c.config_file);
    for (const auto& [k, v] : c.overrides) cfg.set(k, v);
    if (c.threads > 0) aca::kernels::set_threads(c.threads);
    return cfg;
}

fs::path run_dir(const Common& c, const aca::ExperimentConfig& cfg, const std::string& command) {
    if (!c.run_dir.empty()) return c.run_dir;
    const char* root = std::getenv("ACA_RUNS_DIR");
    return fs::path(root && *root ? root : "runs") / (command + "-seed" + cfg.get("seed"));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Differentiable architecture search with adaptive channel allocation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "aca 1.0.0");

    Common common;
    std::string genotype_path, allocation_path, checkpoint_path, out_dir, mode;

    auto* search = app.add_subcommand("search", "train the super-net and write the derived genotype");
    add_common(search, common);

    auto* derive = app.add_subcommand("derive", "derive genotype.txt and allocation.txt from a super-net checkpoint");
    add_common(derive, common);
    derive->add_option("--checkpoint", checkpoint_path, "super-net checkpoint (supernet.acas)")->required();
    derive->add_option("--mode", mode, "shorthand for --derive.mode (aca, darts_s, darts_baseline)");

    auto* train = app.add_subcommand("train", "train and evaluate the target-net");
    add_common(train, common);
    train->add_option("--genotype", genotype_path, "genotype.txt")->required()->check(CLI::ExistingFile);
    train->add_option("--allocation", allocation_path, "allocation.txt")->required()->check(CLI::ExistingFile);

    auto* eval = app.add_subcommand("eval", "evaluate a trained target-net checkpoint");
    add_common(eval, common);
    eval->add_option("--genotype", genotype_path, "genotype.txt")->required()->check(CLI::ExistingFile);
    eval->add_option("--allocation", allocation_path, "allocation.txt")->required()->check(CLI::ExistingFile);
    eval->add_option("--checkpoint", checkpoint_path, "target-net checkpoint (target.acas)")->required();

    auto* pipeline = app.add_subcommand("pipeline", "search, derive and train in one run directory");
    add_common(pipeline, common);

    auto* dot = app.add_subcommand("export-dot", "write normal.dot and reduce.dot");
    dot->add_option("--genotype", genotype_path, "genotype.txt")->required()->check(CLI::ExistingFile);
    dot->add_option("--allocation", allocation_path, "allocation.txt")->required()->check(CLI::ExistingFile);
    dot->add_option("--out", out_dir, "output directory")->required();

    auto* gen = app.add_subcommand("gen-data", "write the configured dataset in the raw ACAI/ACAL format");
    add_common(gen, common);
    gen->add_option("--out", out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        std::ostream* log = common.quiet ? nullptr : &std::cerr;
        if (*dot) {
            const aca::Genotype g = aca::read_genotype(genotype_path);
            const aca::NetworkAllocation a = aca::read_allocation(allocation_path);
            aca::export_dot_files(g, a, out_dir);
            std::cout << (fs::path(out_dir) / "normal.dot").string() << "\n"
                      << (fs::path(out_dir) / "reduce.dot").string() << "\n";
            return kOk;
        }

        aca::ExperimentConfig cfg = resolve(common);
        if (*derive && !mode.empty()) cfg.set("derive.mode", mode);

        if (*gen) {
            const aca::Dataset d = aca::load_dataset(cfg);
            fs::create_directories(out_dir);
            aca::write_raw(d, fs::path(out_dir) / "images.acai", fs::path(out_dir) / "labels.acal");
            std::cout << d.size() << " samples, " << d.classes << " classes, " << d.channels << "x" << d.height << "x"
                      << d.width << " -> " << out_dir << "\n";
            return kOk;
        }

        const std::string command = search->parsed()     ? "search"
                                    : derive->parsed()   ? "derive"
                                    : train->parsed()    ? "train"
                                    : eval->parsed()     ? "eval"
                                                         : "pipeline";
        const fs::path dir = run_dir(common, cfg, command);
        if (command != "eval") aca::prepare_run_dir(cfg, dir);

        if (command == "search") {
            const auto s = aca::search_stage(cfg, aca::prepare_data(cfg), dir, log);
            std::cout << "genotype written to " << (dir / "genotype.txt").string() << " (skip fraction "
                      << aca::skip_fraction(s.genotype) << ")\n";
        } else if (command == "derive") {
            aca::derive_stage(cfg, checkpoint_path, dir);
            std::cout << "wrote " << (dir / "genotype.txt").string() << " and " << (dir / "allocation.txt").string()
                      << "\n";
        } else if (command == "train") {
            const auto m = aca::train_stage(cfg, aca::prepare_data(cfg), aca::read_genotype(genotype_path),
                                            aca::read_allocation(allocation_path), dir, log);
            std::cout << aca::metrics_text(m);
        } else if (command == "eval") {
            const auto m = aca::eval_stage(cfg, aca::prepare_data(cfg), aca::read_genotype(genotype_path),
                                           aca::read_allocation(allocation_path), checkpoint_path);
            std::cout << aca::metrics_text(m);
        } else {
            const auto m = aca::run_pipeline(cfg, dir, log);
            std::cout << aca::metrics_text(m) << "run directory " << dir.string() << "\n";
        }
        return kOk;
    } catch (const aca::DivergenceError& e) {
        std::cerr << "error: numerical divergence: " << e.what() << "\n";
        return kDivergence;
    } catch (const aca::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const aca::LoadError& e) {
        std::cerr << "error: malformed file: " << e.what() << "\n";
        return kIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const aca::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfig;
    } catch (const aca::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfig;
    }
}
