#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "vconf/dataset.hpp"
#include "vconf/detail/strings.hpp"
#include "vconf/errors.hpp"
#include "vconf/gateway.hpp"
#include "vconf/mock_model.hpp"
#include "vconf/prompt.hpp"

namespace vconf {

enum class Aggregation { none, consistency, weighted_average };

inline const char* to_string(Aggregation a) {
    switch (a) {
        case Aggregation::none: return "none";
        case Aggregation::consistency: return "consistency";
        case Aggregation::weighted_average: return "weighted_average";
    }
    return "none";
}

inline Aggregation aggregation_from_string(std::string_view s) {
    if (s == "none") return Aggregation::none;
    if (s == "consistency") return Aggregation::consistency;
    if (s == "weighted_average") return Aggregation::weighted_average;
    throw ConfigError("unknown aggregation '" + std::string(s) +
                      "' (expected none|consistency|weighted_average)");
}

/// How agreement-based aggregation picks its reference answer. `majority`
/// is the inference-time choice; `gold` leaks labels into confidence and
/// exists for reproduction experiments only.
enum class ReferencePolicy { majority, gold };

inline const char* to_string(ReferencePolicy p) {
    return p == ReferencePolicy::majority ? "majority" : "gold";
}

inline ReferencePolicy reference_policy_from_string(std::string_view s) {
    if (s == "majority") return ReferencePolicy::majority;
    if (s == "gold") return ReferencePolicy::gold;
    throw ConfigError("unknown reference policy '" + std::string(s) + "' (expected majority|gold)");
}

struct ProviderConfig {
    ProviderKind kind = ProviderKind::mock;
    std::string model = "mock-model";
    std::string base_url;
    std::optional<double> temperature; // default: 0.0 single-sample, 1.0 when k > 1
    int max_tokens = 1024;
    std::string api_key_env = "OPENAI_API_KEY";
    int parallelism = 4;
    int max_retries = 5;
    int backoff_ms = 500;
};

struct ExperimentConfig {
    std::string dataset_path;
    DatasetFormat format = DatasetFormat::custom;
    std::optional<std::size_t> limit;

    Strategy strategy;
    int k = 0; // 0 = auto: 1, or 3 when aggregating
    Aggregation aggregation = Aggregation::none;
    ReferencePolicy reference = ReferencePolicy::majority;
    bool recalibrate = false;

    ProviderConfig provider;
    MockModelSpec mock;

    int num_bins = 10;
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    std::string template_dir;
    double max_unparseable_rate = 0.20;
    std::string dump_parse_failures;
    bool allow_partial = false; // score only
};

namespace detail {

struct IniEntry {
    std::string value;
    std::size_t line = 0;
    bool consumed = false;
};

/// Sectioned key=value file: `[section]` headers, `key = value` lines,
/// full-line comments with '#' or ';', optional double quotes on values.
class IniFile {
public:
    static IniFile parse(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path.string());
        IniFile ini;
        std::string raw;
        std::string section;
        std::size_t line_no = 0;
        while (std::getline(in, raw)) {
            ++line_no;
            auto line = trim(raw);
            if (line.empty() || line.front() == '#' || line.front() == ';') continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError("malformed section header at line " + std::to_string(line_no));
                section = std::string(trim(line.substr(1, line.size() - 2)));
                continue;
            }
            auto eq = line.find('=');
            if (eq == std::string_view::npos)
                throw ConfigError("expected key = value at line " + std::to_string(line_no));
            auto key = std::string(trim(line.substr(0, eq)));
            auto value = std::string(trim(line.substr(eq + 1)));
            if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
                value = value.substr(1, value.size() - 2);
            if (key.empty())
                throw ConfigError("empty key at line " + std::to_string(line_no));
            auto full = section.empty() ? key : section + "." + key;
            if (!entries_emplace(ini, full, value, line_no))
                throw ConfigError("duplicate config key '" + full + "' at line " +
                                  std::to_string(line_no));
        }
        return ini;
    }

    std::optional<std::string> take(const std::string& key) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        it->second.consumed = true;
        return it->second.value;
    }

    void fail_on_leftovers() const {
        for (const auto& [key, entry] : entries_) {
            if (!entry.consumed)
                throw ConfigError("unknown config key '" + key + "' at line " +
                                  std::to_string(entry.line));
        }
    }

private:
    static bool entries_emplace(IniFile& ini, const std::string& key, std::string value,
                                std::size_t line) {
        return ini.entries_.emplace(key, IniEntry{std::move(value), line, false}).second;
    }

    std::map<std::string, IniEntry> entries_;
};

inline bool parse_bool(const std::string& v, const std::string& key) {
    auto lc = to_lower(v);
    if (lc == "true" || lc == "1" || lc == "yes" || lc == "on") return true;
    if (lc == "false" || lc == "0" || lc == "no" || lc == "off") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

inline double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

inline long long parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        long long i = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
    }
}

} // namespace detail

/// Loads an experiment config from the sectioned key=value file. Unknown
/// keys are errors.
inline ExperimentConfig load_config(const std::filesystem::path& path) {
    auto ini = detail::IniFile::parse(path);
    ExperimentConfig cfg;

    auto str = [&](const char* key, std::string& out) {
        if (auto v = ini.take(key)) out = *v;
    };
    auto boolean = [&](const char* key, bool& out) {
        if (auto v = ini.take(key)) out = detail::parse_bool(*v, key);
    };
    auto real = [&](const char* key, double& out) {
        if (auto v = ini.take(key)) out = detail::parse_double(*v, key);
    };
    auto integer = [&](const char* key, auto& out) {
        if (auto v = ini.take(key)) out = static_cast<std::decay_t<decltype(out)>>(detail::parse_int(*v, key));
    };

    str("dataset.path", cfg.dataset_path);
    if (auto v = ini.take("dataset.format")) cfg.format = dataset_format_from_string(*v);
    if (auto v = ini.take("dataset.limit"))
        cfg.limit = static_cast<std::size_t>(detail::parse_int(*v, "dataset.limit"));

    if (auto v = ini.take("strategy.kind")) cfg.strategy.kind = strategy_kind_from_string(*v);
    boolean("strategy.include_difficulty", cfg.strategy.include_difficulty);

    integer("sampling.k", cfg.k);
    if (auto v = ini.take("sampling.aggregation")) cfg.aggregation = aggregation_from_string(*v);
    if (auto v = ini.take("sampling.reference")) cfg.reference = reference_policy_from_string(*v);
    boolean("sampling.recalibrate", cfg.recalibrate);

    if (auto v = ini.take("provider.kind")) cfg.provider.kind = provider_kind_from_string(*v);
    str("provider.model", cfg.provider.model);
    str("provider.base_url", cfg.provider.base_url);
    if (auto v = ini.take("provider.temperature"))
        cfg.provider.temperature = detail::parse_double(*v, "provider.temperature");
    integer("provider.max_tokens", cfg.provider.max_tokens);
    str("provider.api_key_env", cfg.provider.api_key_env);
    integer("provider.parallelism", cfg.provider.parallelism);
    integer("provider.max_retries", cfg.provider.max_retries);
    integer("provider.backoff_ms", cfg.provider.backoff_ms);

    integer("mock.seed", cfg.mock.seed);
    real("mock.accuracy", cfg.mock.accuracy);
    real("mock.confidence_mean", cfg.mock.confidence_mean);
    real("mock.confidence_spread", cfg.mock.confidence_spread);
    if (auto v = ini.take("mock.atypicality_shape"))
        cfg.mock.atypicality_shape = atypicality_shape_from_string(*v);
    real("mock.atypicality_value", cfg.mock.atypicality_value);
    real("mock.format_noise_rate", cfg.mock.format_noise_rate);

    integer("report.num_bins", cfg.num_bins);

    integer("run.seed", cfg.seed);
    str("run.output_dir", cfg.output_dir);
    str("run.template_dir", cfg.template_dir);
    real("run.max_unparseable_rate", cfg.max_unparseable_rate);
    str("run.dump_parse_failures", cfg.dump_parse_failures);

    ini.fail_on_leftovers();
    return cfg;
}

/// Resolves the auto defaults (K, temperature, mock seed) and checks the
/// config invariants. Call once before running.
inline ExperimentConfig finalize_config(ExperimentConfig cfg) {
    if (cfg.k == 0) cfg.k = cfg.aggregation == Aggregation::none ? 1 : 3;
    if (!cfg.provider.temperature)
        cfg.provider.temperature = cfg.k > 1 ? 1.0 : 0.0;
    if (cfg.mock.seed == 0) cfg.mock.seed = cfg.seed;

    if (cfg.dataset_path.empty()) throw ConfigError("dataset.path is required");
    if (cfg.k < 1) throw ConfigError("sampling.k must be >= 1");
    if (cfg.aggregation != Aggregation::none && cfg.k < 2)
        throw ConfigError("aggregation requires sampling.k >= 2");
    if (cfg.recalibrate && !is_atypical(cfg.strategy.kind))
        throw ConfigError("recalibration requires an atypical strategy");
    if (cfg.strategy.include_difficulty && !is_atypical(cfg.strategy.kind))
        throw ConfigError("include_difficulty is only valid for the atypical strategies");
    if (cfg.num_bins < 1) throw ConfigError("report.num_bins must be >= 1");
    if (*cfg.provider.temperature < 0.0) throw ConfigError("provider.temperature must be >= 0");
    if (cfg.provider.max_tokens < 1) throw ConfigError("provider.max_tokens must be >= 1");
    if (cfg.max_unparseable_rate < 0.0 || cfg.max_unparseable_rate > 1.0)
        throw ConfigError("run.max_unparseable_rate must lie in [0,1]");
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(cfg.mock.accuracy) || !unit(cfg.mock.confidence_mean) ||
        !unit(cfg.mock.confidence_spread) || !unit(cfg.mock.atypicality_value) ||
        !unit(cfg.mock.format_noise_rate))
        throw ConfigError("mock probabilities must lie in [0,1]");
    if (cfg.limit && *cfg.limit == 0) throw ConfigError("dataset.limit must be >= 1");
    return cfg;
}

/// Full config snapshot for the run manifest.
inline nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::ordered_json j;
    j["dataset"] = {{"path", cfg.dataset_path}, {"format", to_string(cfg.format)}};
    if (cfg.limit) j["dataset"]["limit"] = *cfg.limit;
    j["strategy"] = {{"kind", to_string(cfg.strategy.kind)},
                     {"include_difficulty", cfg.strategy.include_difficulty}};
    j["sampling"] = {{"k", cfg.k},
                     {"aggregation", to_string(cfg.aggregation)},
                     {"reference", to_string(cfg.reference)},
                     {"recalibrate", cfg.recalibrate}};
    j["provider"] = {{"kind", to_string(cfg.provider.kind)},
                     {"model", cfg.provider.model},
                     {"max_tokens", cfg.provider.max_tokens},
                     {"parallelism", cfg.provider.parallelism}};
    if (cfg.provider.temperature) j["provider"]["temperature"] = *cfg.provider.temperature;
    if (!cfg.provider.base_url.empty()) j["provider"]["base_url"] = cfg.provider.base_url;
    if (cfg.provider.kind == ProviderKind::mock) {
        j["mock"] = {{"seed", cfg.mock.seed},
                     {"accuracy", cfg.mock.accuracy},
                     {"confidence_mean", cfg.mock.confidence_mean},
                     {"confidence_spread", cfg.mock.confidence_spread},
                     {"atypicality_shape", to_string(cfg.mock.atypicality_shape)},
                     {"atypicality_value", cfg.mock.atypicality_value},
                     {"format_noise_rate", cfg.mock.format_noise_rate}};
    }
    j["report"] = {{"num_bins", cfg.num_bins}};
    j["run"] = {{"seed", cfg.seed},
                {"output_dir", cfg.output_dir},
                {"max_unparseable_rate", cfg.max_unparseable_rate}};
    if (!cfg.template_dir.empty()) j["run"]["template_dir"] = cfg.template_dir;
    return j;
}

/// Table-style display name of the configured method.
inline std::string method_label(const ExperimentConfig& cfg) {
    switch (cfg.aggregation) {
        case Aggregation::consistency:
            return "Consistency (k=" + std::to_string(cfg.k) + ")";
        case Aggregation::weighted_average:
            return "Average (k=" + std::to_string(cfg.k) + ")";
        case Aggregation::none:
            break;
    }
    auto label = method_name(cfg.strategy.kind);
    if (is_atypical(cfg.strategy.kind) && !cfg.recalibrate) label += " (raw)";
    return label;
}

} // namespace vconf
