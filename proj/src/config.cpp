// SPDX-License-Identifier: Apache-2.0
#include "aca/config.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <sstream>

#include "aca/little_endian.hpp"

namespace aca {

std::string_view derive_mode_name(DeriveMode m) noexcept {
    switch (m) {
        case DeriveMode::Aca: return "aca";
        case DeriveMode::DartsS: return "darts_s";
        case DeriveMode::DartsBaseline: return "darts_baseline";
    }
    return "?";
}

DeriveMode parse_derive_mode(std::string_view name) {
    for (DeriveMode m : {DeriveMode::Aca, DeriveMode::DartsS, DeriveMode::DartsBaseline})
        if (derive_mode_name(m) == name) return m;
    throw ConfigError("unknown derive mode '" + std::string(name) + "' (expected aca, darts_s or darts_baseline)");
}

AllocationMode allocation_mode(DeriveMode m) noexcept {
    switch (m) {
        case DeriveMode::Aca: return AllocationMode::Adaptive;
        case DeriveMode::DartsS: return AllocationMode::Fixed;
        case DeriveMode::DartsBaseline: return AllocationMode::FullWidth;
    }
    return AllocationMode::Adaptive;
}

const std::vector<ConfigKey>& config_schema() {
    static const std::vector<ConfigKey> schema = {
        {"seed", "1", "top-level seed; every stage derives its own stream from it"},
        {"dataset.source", "synthetic", "synthetic or raw"},
        {"dataset.samples", "600", "synthetic sample count"},
        {"dataset.classes", "3", "synthetic class count"},
        {"dataset.size", "16", "synthetic image side (multiple of 4, >= 8)"},
        {"dataset.channels", "3", "synthetic image channels"},
        {"dataset.noise", "0.5", "synthetic jitter and pixel noise scale"},
        {"dataset.images", "", "raw images file (source = raw)"},
        {"dataset.labels", "", "raw labels file (source = raw)"},
        {"dataset.train_fraction", "0.8", "stratified train share; the rest is validation"},
        {"search.space", "S6", "operation space: S, S5, S6 or S7"},
        {"search.n", "1", "normal cells per segment (depth 3n + 2)"},
        {"search.nodes", "4", "intermediate nodes per cell"},
        {"search.init_channels", "8", "stem width of the super-net"},
        {"search.sepconv_repeats", "1", "relu-conv stages per separable convolution (1 or 2)"},
        {"search.epochs", "50", "search epochs"},
        {"search.batch_size", "32", "search batch size"},
        {"search.w_lr", "0.05", "weight learning rate (cosine to zero)"},
        {"search.w_momentum", "0.9", "weight momentum"},
        {"search.w_weight_decay", "0.0003", "weight decay"},
        {"search.alpha_lr", "0.0003", "architecture learning rate (Adam)"},
        {"search.alpha_weight_decay", "0.001", "architecture weight decay"},
        {"search.split", "0.5", "share of the training part used for weights; the rest drives alpha"},
        {"derive.mode", "aca", "aca, darts_s or darts_baseline"},
        {"derive.fixed_channels", "8", "skip width of darts_s and of the no_channel ablation"},
        {"eval.n", "1", "normal cells per segment of the target-net"},
        {"eval.init_channels", "16", "stem width of the target-net"},
        {"eval.sepconv_repeats", "1", "relu-conv stages per separable convolution (1 or 2)"},
        {"eval.epochs", "30", "training epochs"},
        {"eval.batch_size", "32", "training batch size"},
        {"eval.lr", "0.05", "learning rate (cosine to zero)"},
        {"eval.momentum", "0.9", "momentum"},
        {"eval.weight_decay", "0.0003", "weight decay"},
        {"eval.ablation", "full", "full, no_skip or no_channel"},
        {"log.wall_time", "false", "write measured seconds into the CSV traces"},
    };
    return schema;
}

namespace {

bool parse_long(const std::string& s, long long& out) {
    const char* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && p == end && !s.empty();
}

bool parse_double(const std::string& s, double& out) {
    const char* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && p == end && !s.empty() && std::isfinite(out);
}

bool parse_bool(const std::string& s, bool& out) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return out = true, true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return out = false, true;
    return false;
}

enum class Kind { Int, Uint, Real, Bool, Text, Space, Source, Derive, Ablation };

Kind kind_of(const std::string& key) {
    static const std::map<std::string, Kind> kinds = {
        {"seed", Kind::Uint},
        {"dataset.source", Kind::Source},
        {"dataset.images", Kind::Text},
        {"dataset.labels", Kind::Text},
        {"dataset.noise", Kind::Real},
        {"dataset.train_fraction", Kind::Real},
        {"search.space", Kind::Space},
        {"search.w_lr", Kind::Real},
        {"search.w_momentum", Kind::Real},
        {"search.w_weight_decay", Kind::Real},
        {"search.alpha_lr", Kind::Real},
        {"search.alpha_weight_decay", Kind::Real},
        {"search.split", Kind::Real},
        {"derive.mode", Kind::Derive},
        {"eval.lr", Kind::Real},
        {"eval.momentum", Kind::Real},
        {"eval.weight_decay", Kind::Real},
        {"eval.ablation", Kind::Ablation},
        {"log.wall_time", Kind::Bool},
    };
    auto it = kinds.find(key);
    return it == kinds.end() ? Kind::Int : it->second;
}

bool known(const std::string& key) {
    const auto& s = config_schema();
    return std::any_of(s.begin(), s.end(), [&](const ConfigKey& k) { return k.name == key; });
}

} // namespace

ExperimentConfig::ExperimentConfig() {
    for (const auto& k : config_schema()) values_[k.name] = k.default_value;
}

void ExperimentConfig::check(const std::string& key, const std::string& value) const {
    const std::string bad = "invalid value '" + value + "' for " + key;
    long long i = 0;
    double d = 0;
    bool b = false;
    switch (kind_of(key)) {
        case Kind::Int:
            if (!parse_long(value, i) || i < 0 || i > 1'000'000) throw ConfigError(bad + ": expected a non-negative integer");
            break;
        case Kind::Uint: {
            unsigned long long u = 0;
            const char* end = value.data() + value.size();
            auto [p, ec] = std::from_chars(value.data(), end, u);
            if (ec != std::errc() || p != end || value.empty()) throw ConfigError(bad + ": expected an unsigned integer");
            break;
        }
        case Kind::Real:
            if (!parse_double(value, d) || d < 0) throw ConfigError(bad + ": expected a finite non-negative number");
            break;
        case Kind::Bool:
            if (!parse_bool(value, b)) throw ConfigError(bad + ": expected true or false");
            break;
        case Kind::Text: break;
        case Kind::Space: parse_space(value); break;
        case Kind::Source:
            if (value != "synthetic" && value != "raw") throw ConfigError(bad + ": expected synthetic or raw");
            break;
        case Kind::Derive: parse_derive_mode(value); break;
        case Kind::Ablation: parse_ablation(value); break;
    }
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    if (!known(key)) throw ConfigError("unknown configuration key '" + key + "'");
    check(key, value);
    values_[key] = value;
}

void ExperimentConfig::merge_ini(const std::string& text, const std::string& origin) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(origin + ": " + e.message() + " at line " + std::to_string(e.line()));
    }
    for (const auto& [section, node] : tree) {
        if (node.empty()) {
            set(section, node.data());
            continue;
        }
        for (const auto& [key, leaf] : node) {
            if (!leaf.empty()) throw ConfigError(origin + ": nested key '" + section + "." + key + "'");
            set(section + "." + key, leaf.data());
        }
    }
}

void ExperimentConfig::merge_file(const std::filesystem::path& path) {
    merge_ini(read_text(path), path.string());
}

const std::string& ExperimentConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown configuration key '" + key + "'");
    return it->second;
}

int ExperimentConfig::get_int(const std::string& key) const {
    long long v = 0;
    if (!parse_long(get(key), v)) throw ConfigError(key + " is not an integer");
    return static_cast<int>(v);
}

double ExperimentConfig::get_real(const std::string& key) const {
    double v = 0;
    if (!parse_double(get(key), v)) throw ConfigError(key + " is not a number");
    return v;
}

bool ExperimentConfig::get_bool(const std::string& key) const {
    bool v = false;
    if (!parse_bool(get(key), v)) throw ConfigError(key + " is not a boolean");
    return v;
}

std::uint64_t ExperimentConfig::seed() const { return std::stoull(get("seed")); }

std::string ExperimentConfig::to_ini() const {
    std::ostringstream out;
    std::string section;
    out << "seed = " << get("seed") << "\n";
    for (const auto& k : config_schema()) {
        const auto dot = k.name.find('.');
        if (dot == std::string::npos) continue;
        const std::string s = k.name.substr(0, dot);
        if (s != section) {
            out << "\n[" << s << "]\n";
            section = s;
        }
        out << k.name.substr(dot + 1) << " = " << get(k.name) << "\n";
    }
    return out.str();
}

SyntheticOptions ExperimentConfig::synthetic() const {
    SyntheticOptions o;
    o.samples = get_int("dataset.samples");
    o.classes = get_int("dataset.classes");
    o.size = get_int("dataset.size");
    o.channels = get_int("dataset.channels");
    o.noise = get_real("dataset.noise");
    return o;
}

SuperNetConfig ExperimentConfig::supernet(int classes) const {
    SuperNetConfig c;
    c.space = parse_space(get("search.space"));
    c.repeats = get_int("search.n");
    c.nodes = get_int("search.nodes");
    c.init_channels = get_int("search.init_channels");
    c.sepconv_repeats = get_int("search.sepconv_repeats");
    c.num_classes = classes;
    return c;
}

SearchConfig ExperimentConfig::search() const {
    SearchConfig c;
    c.epochs = get_int("search.epochs");
    c.batch_size = get_int("search.batch_size");
    c.w_lr = get_real("search.w_lr");
    c.w_momentum = get_real("search.w_momentum");
    c.w_weight_decay = get_real("search.w_weight_decay");
    c.alpha_lr = get_real("search.alpha_lr");
    c.alpha_weight_decay = get_real("search.alpha_weight_decay");
    c.split = get_real("search.split");
    c.seed = stage_seed("search");
    c.validate();
    return c;
}

TargetConfig ExperimentConfig::target(int classes) const {
    TargetConfig c;
    c.repeats = get_int("eval.n");
    c.init_channels = get_int("eval.init_channels");
    c.sepconv_repeats = get_int("eval.sepconv_repeats");
    c.fixed_channels = fixed_channels();
    c.num_classes = classes;
    return c;
}

TrainConfig ExperimentConfig::training() const {
    TrainConfig c;
    c.epochs = get_int("eval.epochs");
    c.batch_size = get_int("eval.batch_size");
    c.lr = get_real("eval.lr");
    c.momentum = get_real("eval.momentum");
    c.weight_decay = get_real("eval.weight_decay");
    c.seed = stage_seed("train");
    c.validate();
    return c;
}

} // namespace aca
