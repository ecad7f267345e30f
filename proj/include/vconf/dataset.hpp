#pragma once

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "vconf/detail/strings.hpp"
#include "vconf/errors.hpp"

namespace vconf {

enum class DatasetFormat { medqa, medmcqa, pubmedqa, custom };

inline const char* to_string(DatasetFormat f) {
    switch (f) {
        case DatasetFormat::medqa: return "medqa";
        case DatasetFormat::medmcqa: return "medmcqa";
        case DatasetFormat::pubmedqa: return "pubmedqa";
        case DatasetFormat::custom: return "custom";
    }
    return "custom";
}

inline DatasetFormat dataset_format_from_string(std::string_view s) {
    if (s == "medqa") return DatasetFormat::medqa;
    if (s == "medmcqa") return DatasetFormat::medmcqa;
    if (s == "pubmedqa") return DatasetFormat::pubmedqa;
    if (s == "custom") return DatasetFormat::custom;
    throw ConfigError("unknown dataset format '" + std::string(s) +
                      "' (expected medqa|medmcqa|pubmedqa|custom)");
}

struct Option {
    char label = 'A';
    std::string text;

    bool operator==(const Option&) const = default;
};

/// One normalized multiple-choice question. `context` is empty when absent
/// (PubMedQA abstracts are the only source that fills it).
struct QARecord {
    std::string id;
    std::string question;
    std::string context;
    std::vector<Option> options;
    char gold = 'A';

    bool operator==(const QARecord&) const = default;

    bool has_label(char label) const {
        for (const auto& o : options)
            if (o.label == label) return true;
        return false;
    }
};

struct Dataset {
    std::string name;
    std::vector<QARecord> records; // file order, the determinism anchor

    bool operator==(const Dataset&) const = default;
};

struct LineRejection {
    std::size_t line = 0; // 1-based
    std::string reason;
};

struct IngestResult {
    Dataset dataset;
    std::vector<LineRejection> rejected;
};

struct Violation {
    std::string record_id;
    std::string message;
};

namespace detail {

inline std::string synthesize_id(std::string_view dataset_name, std::size_t line) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06zu", line);
    return std::string(dataset_name) + "-" + buf;
}

/// Labels must be unique, consecutive from 'A', and count >= 2.
inline std::optional<std::string> check_option_labels(const std::vector<Option>& options) {
    if (options.size() < 2) return "fewer than 2 options";
    for (std::size_t i = 0; i < options.size(); ++i) {
        char expected = static_cast<char>('A' + i);
        if (options[i].label != expected)
            return std::string("option labels not consecutive from A (got '") +
                   options[i].label + "' at position " + std::to_string(i) + ")";
    }
    return std::nullopt;
}

inline QARecord parse_medqa_line(const nlohmann::json& j, const std::string& fallback_id) {
    QARecord rec;
    rec.id = j.contains("id") ? j.at("id").get<std::string>() : fallback_id;
    rec.question = j.at("question").get<std::string>();
    const auto& opts = j.at("options");
    if (!opts.is_object()) throw std::runtime_error("options is not an object");
    // nlohmann objects iterate in key order, which is the label order here
    for (auto it = opts.begin(); it != opts.end(); ++it) {
        if (it.key().size() != 1) throw std::runtime_error("option key '" + it.key() + "' is not a single letter");
        rec.options.push_back({it.key()[0], it.value().get<std::string>()});
    }
    if (auto err = check_option_labels(rec.options)) throw std::runtime_error(*err);
    auto gold = j.at("answer_idx").get<std::string>();
    if (gold.size() != 1 || !rec.has_label(gold[0]))
        throw std::runtime_error("answer_idx '" + gold + "' is not an option label");
    rec.gold = gold[0];
    return rec;
}

inline QARecord parse_medmcqa_line(const nlohmann::json& j, const std::string& fallback_id) {
    QARecord rec;
    if (j.contains("id")) {
        const auto& idv = j.at("id");
        rec.id = idv.is_string() ? idv.get<std::string>() : idv.dump();
    } else {
        rec.id = fallback_id;
    }
    rec.question = j.at("question").get<std::string>();
    const char* keys[4] = {"opa", "opb", "opc", "opd"};
    for (int i = 0; i < 4; ++i)
        rec.options.push_back({static_cast<char>('A' + i), j.at(keys[i]).get<std::string>()});
    // cop is the 0-based index of the correct option (HF dump convention)
    auto cop = j.at("cop").get<int>();
    if (cop < 0 || cop > 3) throw std::runtime_error("cop " + std::to_string(cop) + " out of range 0..3");
    rec.gold = static_cast<char>('A' + cop);
    return rec;
}

inline QARecord parse_pubmedqa_line(const nlohmann::json& j, const std::string& fallback_id) {
    QARecord rec;
    if (j.contains("id")) {
        const auto& idv = j.at("id");
        rec.id = idv.is_string() ? idv.get<std::string>() : idv.dump();
    } else {
        rec.id = fallback_id;
    }
    rec.question = j.contains("QUESTION") ? j.at("QUESTION").get<std::string>()
                                          : j.at("question").get<std::string>();
    const char* ctx_key = j.contains("CONTEXTS") ? "CONTEXTS" : (j.contains("context") ? "context" : nullptr);
    if (ctx_key) {
        const auto& ctx = j.at(ctx_key);
        if (ctx.is_array()) {
            std::string joined;
            for (const auto& part : ctx) {
                if (!joined.empty()) joined += "\n";
                joined += part.get<std::string>();
            }
            rec.context = joined;
        } else {
            rec.context = ctx.get<std::string>();
        }
    }
    // fixed label map: A=yes, B=no, C=maybe
    rec.options = {{'A', "yes"}, {'B', "no"}, {'C', "maybe"}};
    auto decision = detail::to_lower(j.at("final_decision").get<std::string>());
    if (decision == "yes") rec.gold = 'A';
    else if (decision == "no") rec.gold = 'B';
    else if (decision == "maybe") rec.gold = 'C';
    else throw std::runtime_error("final_decision '" + decision + "' is not yes/no/maybe");
    return rec;
}

inline QARecord parse_custom_line(const nlohmann::json& j, const std::string& fallback_id) {
    QARecord rec;
    rec.id = j.contains("id") ? j.at("id").get<std::string>() : fallback_id;
    rec.question = j.at("question").get<std::string>();
    if (j.contains("context")) rec.context = j.at("context").get<std::string>();
    for (const auto& o : j.at("options")) {
        auto label = o.at("label").get<std::string>();
        if (label.size() != 1) throw std::runtime_error("option label '" + label + "' is not a single letter");
        rec.options.push_back({label[0], o.at("text").get<std::string>()});
    }
    if (auto err = check_option_labels(rec.options)) throw std::runtime_error(*err);
    auto gold = j.at("gold").get<std::string>();
    if (gold.size() != 1 || !rec.has_label(gold[0]))
        throw std::runtime_error("gold '" + gold + "' is not an option label");
    rec.gold = gold[0];
    return rec;
}

} // namespace detail

/// Reads one JSONL file in the declared format. Every non-blank input line
/// yields exactly one QARecord or a line-numbered rejection; rejections are
/// skipped unless nothing at all parses.
inline IngestResult ingest(const std::filesystem::path& path, DatasetFormat format) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open dataset file: " + path.string());

    IngestResult result;
    result.dataset.name = to_string(format);

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto fallback_id = detail::synthesize_id(result.dataset.name, line_no);
        try {
            auto j = nlohmann::json::parse(line);
            QARecord rec;
            switch (format) {
                case DatasetFormat::medqa: rec = detail::parse_medqa_line(j, fallback_id); break;
                case DatasetFormat::medmcqa: rec = detail::parse_medmcqa_line(j, fallback_id); break;
                case DatasetFormat::pubmedqa: rec = detail::parse_pubmedqa_line(j, fallback_id); break;
                case DatasetFormat::custom: rec = detail::parse_custom_line(j, fallback_id); break;
            }
            result.dataset.records.push_back(std::move(rec));
        } catch (const std::exception& e) {
            result.rejected.push_back({line_no, e.what()});
        }
    }

    if (result.dataset.records.empty())
        throw IngestError("no valid records in " + path.string() + " (" +
                          std::to_string(result.rejected.size()) + " lines rejected)");
    return result;
}

/// Report-only invariant check; empty result means the dataset is clean.
inline std::vector<Violation> validate(const Dataset& dataset) {
    std::vector<Violation> out;
    std::set<std::string> seen;
    for (const auto& rec : dataset.records) {
        if (!seen.insert(rec.id).second)
            out.push_back({rec.id, "duplicate record id"});
        if (auto err = detail::check_option_labels(rec.options))
            out.push_back({rec.id, *err});
        if (!rec.has_label(rec.gold))
            out.push_back({rec.id, std::string("gold label '") + rec.gold + "' is not among the options"});
    }
    return out;
}

inline nlohmann::ordered_json record_to_json(const QARecord& rec) {
    nlohmann::ordered_json j;
    j["id"] = rec.id;
    j["question"] = rec.question;
    if (!rec.context.empty()) j["context"] = rec.context;
    auto opts = nlohmann::ordered_json::array();
    for (const auto& o : rec.options)
        opts.push_back({{"label", std::string(1, o.label)}, {"text", o.text}});
    j["options"] = std::move(opts);
    j["gold"] = std::string(1, rec.gold);
    return j;
}

/// Normalized interchange JSONL; `ingest(path, custom)` reads it back.
inline void write_normalized(const Dataset& dataset, std::ostream& out) {
    for (const auto& rec : dataset.records)
        out << record_to_json(rec).dump() << "\n";
}

inline void write_normalized(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IngestError("cannot write normalized dataset: " + path.string());
    write_normalized(dataset, out);
}

} // namespace vconf
