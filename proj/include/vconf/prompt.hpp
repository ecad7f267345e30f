#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "vconf/dataset.hpp"
#include "vconf/detail/strings.hpp"
#include "vconf/errors.hpp"

namespace vconf {

enum class StrategyKind { vanilla, cot, atypical_scenario, atypical_presentations };

inline const char* to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::vanilla: return "vanilla";
        case StrategyKind::cot: return "cot";
        case StrategyKind::atypical_scenario: return "atypical_scenario";
        case StrategyKind::atypical_presentations: return "atypical_presentations";
    }
    return "vanilla";
}

inline StrategyKind strategy_kind_from_string(std::string_view s) {
    if (s == "vanilla") return StrategyKind::vanilla;
    if (s == "cot") return StrategyKind::cot;
    if (s == "atypical_scenario") return StrategyKind::atypical_scenario;
    if (s == "atypical_presentations") return StrategyKind::atypical_presentations;
    throw ConfigError("unknown strategy '" + std::string(s) +
                      "' (expected vanilla|cot|atypical_scenario|atypical_presentations)");
}

inline bool is_atypical(StrategyKind k) {
    return k == StrategyKind::atypical_scenario || k == StrategyKind::atypical_presentations;
}

struct Strategy {
    StrategyKind kind = StrategyKind::vanilla;
    // Difficulty elicitation is an optional add-on of the atypical prompts.
    bool include_difficulty = false;

    bool operator==(const Strategy&) const = default;
};

struct PromptText {
    std::string text;
    Strategy strategy;
    std::string record_id;
};

/// Display name used in report tables.
inline std::string method_name(StrategyKind k) {
    switch (k) {
        case StrategyKind::vanilla: return "Vanilla";
        case StrategyKind::cot: return "CoT";
        case StrategyKind::atypical_scenario: return "Atypical scenario";
        case StrategyKind::atypical_presentations: return "Atypical presentations";
    }
    return "Vanilla";
}

namespace templates {

// Embedded prompt assets. The {question} slot receives the question block.

inline constexpr std::string_view kVanilla =
    R"(Read the following question. Provide your answer and your confidence level (0% to 100%).

Question and Options:
{question}

Provide your response in the following format:
Response:
- Answer (letter): [Letter of the choice]
- Confidence: [Percentage score between 0 and 100%]

Answer and Confidence:)";

inline constexpr std::string_view kCot =
    R"(Read the following question. Provide your answer and your confidence level (0% to 100%).

Question and Options:
{question}

Let's think step by step.

Then, provide your response in the following format:
Response:
- Answer (letter): [Letter of the choice]
- Confidence: [Percentage score between 0 and 100%]

Answer and Confidence:)";

inline constexpr std::string_view kAtypicalScenario =
    R"(Question and Options:
{question}

First, assess the situation described in the question and assign an atypicality score between 0 and 1, where:
- 0 indicates a highly atypical situation, uncommon or rare in such scenarios.
- 1 indicates a very typical situation, commonly expected in such scenarios.
- Scores between 0 and 1 (such as 0.25, 0.5, 0.75) indicate varying degrees of typicality.

Situation Atypicality: [Atypicality score]

Then, provide your response in the following format:
Response:
- Answer (letter): [Letter of the choice]
- Confidence: [Percentage score between 0 and 100%]

Answer and Confidence:)";

inline constexpr std::string_view kAtypicalScenarioDifficulty =
    R"(Question and Options:
{question}

First, assess the situation described in the question and assign an atypicality score between 0 and 1, where:
- 0 indicates a highly atypical situation, uncommon or rare in such scenarios.
- 1 indicates a very typical situation, commonly expected in such scenarios.
- Scores between 0 and 1 (such as 0.25, 0.5, 0.75) indicate varying degrees of typicality.

Situation Atypicality: [Atypicality score]

Then, provide your response in the following format:
Response:
- Answer (letter): [Letter of the choice]
- Difficulty: [Score on a scale from 1 to 10 with 10 being the hardest]
- Confidence: [Percentage score between 0 and 100%]

Answer, Difficulty, and Confidence:)";

inline constexpr std::string_view kAtypicalPresentations =
    R"(Question and Options:
{question}

First, assess each symptom and signs with respect to its typicality in the described scenario. Assign an atypicality score between 0 and 1, where:
- 0 indicates a highly atypical situation, uncommon or rare in such scenarios.
- 1 indicates a very typical situation, commonly expected in such scenarios.
- Scores between 0 and 1 (such as 0.25, 0.5, 0.75) indicate varying degrees of typicality.

Symptoms and signs:
- Symptom 1: [Atypical score]
- Symptom 2: [Atypical score]
- Symptom 3: [Atypical score]
- ...

Then, provide your response in the following format:
Response:
- Answer (letter): [Letter of the choice]
- Confidence: [Percentage score between 0 and 100%]

Answer and Confidence:)";

inline constexpr std::string_view kAtypicalPresentationsDifficulty =
    R"(Question and Options:
{question}

First, assess each symptom and signs with respect to its typicality in the described scenario. Assign an atypicality score between 0 and 1, where:
- 0 indicates a highly atypical situation, uncommon or rare in such scenarios.
- 1 indicates a very typical situation, commonly expected in such scenarios.
- Scores between 0 and 1 (such as 0.25, 0.5, 0.75) indicate varying degrees of typicality.

Symptoms and signs:
- Symptom 1: [Atypical score]
- Symptom 2: [Atypical score]
- Symptom 3: [Atypical score]
- ...

Then, provide your response in the following format:
Response:
- Answer (letter): [Letter of the choice]
- Difficulty: [Score on a scale from 1 to 10 with 10 being the hardest]
- Confidence: [Percentage score between 0 and 100%]

Answer, Difficulty, and Confidence:)";

inline std::string_view embedded(const Strategy& s) {
    switch (s.kind) {
        case StrategyKind::vanilla: return kVanilla;
        case StrategyKind::cot: return kCot;
        case StrategyKind::atypical_scenario:
            return s.include_difficulty ? kAtypicalScenarioDifficulty : kAtypicalScenario;
        case StrategyKind::atypical_presentations:
            return s.include_difficulty ? kAtypicalPresentationsDifficulty : kAtypicalPresentations;
    }
    return kVanilla;
}

} // namespace templates

/// The {question} slot content: context (when present), question text, blank
/// line, then one "A. <text>" line per option in record order. Shared across
/// strategies so the question/options block is byte-identical between them.
inline std::string question_block(const QARecord& record) {
    std::ostringstream out;
    if (!record.context.empty()) out << record.context << "\n\n";
    out << record.question << "\n\n";
    for (std::size_t i = 0; i < record.options.size(); ++i) {
        if (i) out << "\n";
        out << record.options[i].label << ". " << record.options[i].text;
    }
    return out.str();
}

/// Template source: embedded assets, optionally shadowed by per-strategy
/// plain-text files (`<kind>.txt`, with a {question} placeholder) in a
/// template directory. Override files are used verbatim, so the difficulty
/// toggle applies only to embedded templates.
class PromptLibrary {
public:
    PromptLibrary() = default;

    static PromptLibrary with_overrides(const std::filesystem::path& dir) {
        PromptLibrary lib;
        if (!std::filesystem::is_directory(dir))
            throw ConfigError("template directory does not exist: " + dir.string());
        for (auto kind : {StrategyKind::vanilla, StrategyKind::cot,
                          StrategyKind::atypical_scenario, StrategyKind::atypical_presentations}) {
            auto file = dir / (std::string(to_string(kind)) + ".txt");
            if (!std::filesystem::exists(file)) continue;
            std::ifstream in(file);
            std::ostringstream buf;
            buf << in.rdbuf();
            auto text = buf.str();
            if (text.find("{question}") == std::string::npos)
                throw ConfigError("template override " + file.string() + " lacks a {question} placeholder");
            lib.overrides_[kind] = std::move(text);
        }
        return lib;
    }

    std::string template_for(const Strategy& strategy) const {
        if (auto it = overrides_.find(strategy.kind); it != overrides_.end()) return it->second;
        return std::string(templates::embedded(strategy));
    }

    PromptText render(const QARecord& record, const Strategy& strategy) const {
        if (strategy.include_difficulty && !is_atypical(strategy.kind))
            throw ConfigError("include_difficulty is only valid for the atypical strategies");
        auto text = template_for(strategy);
        if (!detail::replace_first(text, "{question}", question_block(record)))
            throw ConfigError("prompt template lacks a {question} placeholder");
        return PromptText{std::move(text), strategy, record.id};
    }

private:
    std::map<StrategyKind, std::string> overrides_;
};

/// Renders with the embedded templates.
inline PromptText render(const QARecord& record, const Strategy& strategy) {
    return PromptLibrary{}.render(record, strategy);
}

} // namespace vconf
