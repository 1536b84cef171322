// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aca/dataset.hpp"
#include "aca/search.hpp"
#include "aca/targetnet.hpp"

namespace aca {

enum class DeriveMode : std::uint8_t { Aca, DartsS, DartsBaseline };

std::string_view derive_mode_name(DeriveMode m) noexcept;
DeriveMode parse_derive_mode(std::string_view name);
AllocationMode allocation_mode(DeriveMode m) noexcept;

/// One documented configuration key.
struct ConfigKey {
    std::string name;  // "section.key", or "seed"
    std::string default_value;
    std::string help;
};

/// The full key schema in echo order.
const std::vector<ConfigKey>& config_schema();

/// Resolved experiment configuration: defaults, then an INI file, then
/// command-line overrides. Every value is validated on resolution.
class ExperimentConfig {
public:
    ExperimentConfig();

    /// Reads `[section]` / `key = value` text; unknown keys throw ConfigError.
    void merge_ini(const std::string& text, const std::string& origin = "config");
    void merge_file(const std::filesystem::path& path);
    void set(const std::string& key, const std::string& value);

    const std::string& get(const std::string& key) const;
    int get_int(const std::string& key) const;
    double get_real(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::uint64_t seed() const;

    /// INI text listing every key; reading it back reproduces this config.
    std::string to_ini() const;

    std::uint64_t stage_seed(std::string_view stage) const { return derive_seed(seed(), stage); }

    SyntheticOptions synthetic() const;
    SuperNetConfig supernet(int classes) const;
    SearchConfig search() const;
    DeriveMode derive_mode() const { return parse_derive_mode(get("derive.mode")); }
    int fixed_channels() const { return get_int("derive.fixed_channels"); }
    TargetConfig target(int classes) const;
    TrainConfig training() const;
    AblationMode ablation() const { return parse_ablation(get("eval.ablation")); }
    bool wall_time() const { return get_bool("log.wall_time"); }

private:
    void check(const std::string& key, const std::string& value) const;
    std::map<std::string, std::string> values_;
};

} // namespace aca
