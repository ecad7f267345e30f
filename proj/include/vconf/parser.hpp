#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vconf/dataset.hpp"
#include "vconf/detail/strings.hpp"
#include "vconf/errors.hpp"
#include "vconf/prompt.hpp"

namespace vconf {

enum ParseFlag : unsigned {
    kClamped = 1u << 0,
    kImputedAtypicality = 1u << 1,
    kFallbackGrammar = 1u << 2,
    kImputedConfidence = 1u << 3,
};

struct SymptomScore {
    std::string symptom;
    double score = 1.0;

    bool operator==(const SymptomScore&) const = default;
};

/// One parsed LLM reply. `answer == nullopt` means ABSTAIN. Confidence and
/// atypicality scores live in [0,1]; the 0-100% scale exists only at the
/// text boundary.
struct ElicitationResult {
    std::string record_id;
    std::optional<char> answer;
    double confidence = 0.0;
    std::optional<double> scenario_atypicality;
    std::optional<std::vector<SymptomScore>> symptom_atypicalities;
    std::optional<int> difficulty;
    unsigned flags = 0;

    bool has_flag(ParseFlag f) const { return (flags & f) != 0; }
    bool abstained() const { return !answer.has_value(); }

    /// Single typicality axis per question: the scenario score, or the mean
    /// of the symptom scores.
    std::optional<double> atypicality_summary() const {
        if (scenario_atypicality) return scenario_atypicality;
        if (symptom_atypicalities && !symptom_atypicalities->empty()) {
            double sum = 0.0;
            for (const auto& s : *symptom_atypicalities) sum += s.score;
            return sum / static_cast<double>(symptom_atypicalities->size());
        }
        return std::nullopt;
    }
};

namespace detail {

struct NumberToken {
    double value = 0.0;
    bool percent = false;
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// First non-negative decimal number at or after `from`. A '%' directly
/// after the digits (spaces allowed) marks a percentage.
inline std::optional<NumberToken> first_number(std::string_view s, std::size_t from = 0) {
    for (std::size_t i = from; i < s.size(); ++i) {
        bool starts = std::isdigit(static_cast<unsigned char>(s[i])) ||
                      (s[i] == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])));
        if (!starts) continue;
        std::size_t j = i;
        bool dot = false;
        while (j < s.size() &&
               (std::isdigit(static_cast<unsigned char>(s[j])) || (s[j] == '.' && !dot))) {
            if (s[j] == '.') dot = true;
            ++j;
        }
        // "1." ends the numeric part before the dot
        std::size_t num_end = (s[j - 1] == '.') ? j - 1 : j;
        if (num_end == i) continue;
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(s.data() + i, s.data() + num_end, value);
        if (ec != std::errc()) continue;
        NumberToken tok{value, false, i, num_end};
        std::size_t k = num_end;
        while (k < s.size() && (s[k] == ' ' || s[k] == '\t')) ++k;
        if (k < s.size() && s[k] == '%') {
            tok.percent = true;
            tok.end = k + 1;
        }
        return tok;
    }
    return std::nullopt;
}

inline double clamp_unit(double v, bool* clamped) {
    if (v < 0.0) { v = 0.0; if (clamped) *clamped = true; }
    if (v > 1.0) { v = 1.0; if (clamped) *clamped = true; }
    return v;
}

/// Confidence lives on a percent culture: "85%" and "0.85" both normalize
/// to 0.85, and bare values above 1 are read as percentages before
/// clamping ("120" and "120%" both clamp to 1.0).
inline double normalize_confidence(const NumberToken& tok, bool* clamped) {
    double v = tok.value;
    if (tok.percent || v > 1.0) v /= 100.0;
    return clamp_unit(v, clamped);
}

/// Atypicality was requested on a 0-1 scale, so bare overshoots ("1.7")
/// clamp to 1.0 instead of being divided; only an explicit '%' divides.
inline double normalize_unit_scale(const NumberToken& tok, bool* clamped) {
    double v = tok.value;
    if (tok.percent) v /= 100.0;
    return clamp_unit(v, clamped);
}

/// Position just past the first ':' after `from`, or npos. Lines whose
/// content after the colon opens with '[' are template echoes
/// ("Confidence: [Percentage score between 0 and 100%]") and yield npos.
inline std::size_t value_start_after_colon(std::string_view line, std::size_t from) {
    auto colon = line.find(':', from);
    if (colon == std::string_view::npos) return std::string_view::npos;
    std::size_t k = colon + 1;
    while (k < line.size() && (line[k] == ' ' || line[k] == '\t')) ++k;
    if (k < line.size() && line[k] == '[') return std::string_view::npos;
    return colon + 1;
}

/// True for option-enumeration echoes like "B. Measles" or "C) 40 mg".
inline bool is_option_echo_line(std::string_view line) {
    auto t = trim(line);
    return t.size() >= 3 && std::isupper(static_cast<unsigned char>(t[0])) &&
           (t[1] == '.' || t[1] == ')') && t[2] == ' ';
}

inline bool is_valid_label(char c, std::size_t option_count) {
    char up = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return up >= 'A' && up < static_cast<char>('A' + option_count);
}

/// Scans `line` from `from` for an option-letter token. Accepts an isolated
/// letter with non-alphanumeric boundaries when it is uppercase, wrapped in
/// parentheses, or the last alphanumeric content of the line (covers
/// lowercased scaffolds like "answer: c" without biting on articles).
inline std::optional<char> find_letter_token(std::string_view line, std::size_t from,
                                             std::size_t option_count) {
    std::size_t last_alnum = std::string_view::npos;
    for (std::size_t i = line.size(); i-- > 0;) {
        if (is_alnum(line[i])) { last_alnum = i; break; }
    }
    for (std::size_t i = from; i < line.size(); ++i) {
        char c = line[i];
        if (!std::isalpha(static_cast<unsigned char>(c))) continue;
        bool left_ok = (i == 0) || !is_alnum(line[i - 1]);
        bool right_ok = (i + 1 == line.size()) || !is_alnum(line[i + 1]);
        if (!left_ok || !right_ok) {
            // skip to the end of this word
            while (i + 1 < line.size() && is_alnum(line[i + 1])) ++i;
            continue;
        }
        if (!is_valid_label(c, option_count)) continue;
        bool parenthesized = i > 0 && line[i - 1] == '(' && i + 1 < line.size() && line[i + 1] == ')';
        bool accept = std::isupper(static_cast<unsigned char>(c)) || parenthesized || i == last_alnum;
        if (accept) return static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return std::nullopt;
}

struct AnswerExtraction {
    std::optional<char> answer;
    bool fallback = false;
};

/// A line is label-led when its content (after bullets) starts with the
/// word "answer", as in the reply scaffold "- Answer (letter): C".
inline bool is_answer_led(std::string_view line, std::size_t label_pos) {
    auto t = trim(line.substr(0, label_pos));
    for (char c : t)
        if (c != '-' && c != '*' && c != ' ' && c != '\t') return false;
    return true;
}

inline AnswerExtraction extract_answer_ex(std::string_view text, const std::vector<Option>& options) {
    auto lines = split_lines(text);
    const std::size_t n_opts = options.size();

    // 1. first answer-labeled line carrying a valid letter; scaffold-style
    //    lines beat lines that merely mention "answer" mid-reasoning
    for (bool led_only : {true, false}) {
        for (auto line : lines) {
            auto pos = ifind(line, "answer");
            if (pos == std::string_view::npos) continue;
            if (is_answer_led(line, pos) != led_only) continue;
            std::size_t from = pos + 6;
            auto colon = line.find(':', from);
            if (colon != std::string_view::npos) {
                auto start = value_start_after_colon(line, from);
                if (start == std::string_view::npos) continue; // template echo
                from = start;
            }
            if (auto letter = find_letter_token(line, from, n_opts)) return {letter, false};
        }
    }

    // 2. option-text match over non-echo lines; the last occurrence wins,
    //    longer texts beat shorter ones at the same position
    {
        std::size_t best_pos = 0, best_len = 0;
        std::optional<char> best;
        std::size_t line_offset = 0;
        for (auto line : lines) {
            if (!is_option_echo_line(line)) {
                for (const auto& opt : options) {
                    if (opt.text.empty()) continue;
                    std::size_t search = 0;
                    while (true) {
                        auto rel = ifind(line.substr(search), opt.text);
                        if (rel == std::string_view::npos) break;
                        auto at = search + rel;
                        bool left_ok = at == 0 || !is_alnum(line[at - 1]);
                        auto end = at + opt.text.size();
                        bool right_ok = end >= line.size() || !is_alnum(line[end]);
                        if (left_ok && right_ok) {
                            auto abs_pos = line_offset + at;
                            if (!best || abs_pos > best_pos ||
                                (abs_pos == best_pos && opt.text.size() > best_len)) {
                                best = opt.label;
                                best_pos = abs_pos;
                                best_len = opt.text.size();
                            }
                        }
                        search = at + 1;
                    }
                }
            }
            line_offset += line.size() + 1;
        }
        if (best) return {best, false};
    }

    // 3. last-resort standalone-letter scan, flagged
    {
        std::optional<char> last;
        for (auto line : lines) {
            if (is_option_echo_line(line)) continue;
            auto t = trim(line);
            if (t.size() == 1 && is_valid_label(t[0], n_opts)) {
                last = static_cast<char>(std::toupper(static_cast<unsigned char>(t[0])));
                continue;
            }
            for (std::size_t i = 0; i < line.size(); ++i) {
                char c = line[i];
                if (!std::isalpha(static_cast<unsigned char>(c))) continue;
                bool left_ok = (i == 0) || !is_alnum(line[i - 1]);
                bool right_ok = (i + 1 == line.size()) || !is_alnum(line[i + 1]);
                if (!left_ok || !right_ok) {
                    while (i + 1 < line.size() && is_alnum(line[i + 1])) ++i;
                    continue;
                }
                if (!is_valid_label(c, n_opts)) continue;
                bool parenthesized = i > 0 && line[i - 1] == '(' && i + 1 < line.size() && line[i + 1] == ')';
                if (std::isupper(static_cast<unsigned char>(c)) || parenthesized)
                    last = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            }
        }
        if (last) return {last, true};
    }

    return {std::nullopt, false};
}

struct ConfidenceExtraction {
    std::optional<double> confidence;
    bool clamped = false;
    bool fallback = false;
};

inline ConfidenceExtraction extract_confidence_ex(std::string_view text) {
    auto lines = split_lines(text);

    // labeled line: "... confidence ... : <number>"
    for (auto line : lines) {
        auto pos = ifind(line, "confidence");
        if (pos == std::string_view::npos) continue;
        auto start = value_start_after_colon(line, pos);
        if (start == std::string_view::npos) continue;
        if (auto tok = first_number(line, start)) {
            ConfidenceExtraction out;
            out.confidence = normalize_confidence(*tok, &out.clamped);
            return out;
        }
    }

    // fallback: the last standalone percentage anywhere in the reply
    std::optional<NumberToken> last;
    std::size_t from = 0;
    while (auto tok = first_number(text, from)) {
        if (tok->percent) last = tok;
        from = tok->end;
    }
    if (last) {
        ConfidenceExtraction out;
        out.confidence = normalize_confidence(*last, &out.clamped);
        out.fallback = true;
        return out;
    }
    return {};
}

struct AtypicalityExtraction {
    std::optional<double> scenario;
    std::optional<std::vector<SymptomScore>> symptoms;
    bool clamped = false;
};

inline bool is_scaffold_label(std::string_view name) {
    auto lc = to_lower(name);
    return lc.find("answer") != std::string::npos || lc.find("confidence") != std::string::npos ||
           lc.find("difficulty") != std::string::npos || lc.find("atypicality") != std::string::npos ||
           lc.find("response") != std::string::npos;
}

inline AtypicalityExtraction extract_atypicality_ex(std::string_view text, StrategyKind kind) {
    AtypicalityExtraction out;
    auto lines = split_lines(text);

    if (kind == StrategyKind::atypical_scenario) {
        for (auto line : lines) {
            auto pos = ifind(line, "atypicality");
            if (pos == std::string_view::npos) continue;
            auto start = value_start_after_colon(line, pos);
            if (start == std::string_view::npos) {
                // tolerate "Situation Atypicality 0.4" without a colon,
                // but not instruction echoes ("between 0 and 1")
                if (ifind(line, "between") != std::string_view::npos) continue;
                start = pos;
            }
            if (auto tok = first_number(line, start)) {
                out.scenario = normalize_unit_scale(*tok, &out.clamped);
                return out;
            }
        }
        return out;
    }

    if (kind == StrategyKind::atypical_presentations) {
        std::size_t i = 0;
        for (; i < lines.size(); ++i) {
            auto lc = to_lower(lines[i]);
            if (lc.find("symptoms and signs") != std::string::npos ||
                (lc.find("symptom") != std::string::npos && !trim(lines[i]).empty() &&
                 trim(lines[i]).back() == ':'))
                break;
        }
        if (i == lines.size()) return out;
        std::vector<SymptomScore> scores;
        for (std::size_t j = i + 1; j < lines.size(); ++j) {
            auto t = trim(lines[j]);
            if (t.empty()) {
                if (!scores.empty()) break; // blank line ends a started block
                continue;
            }
            std::string_view body = t;
            if (body.front() == '-' || body.front() == '*') body = trim(body.substr(1));
            auto colon = body.find(':');
            if (colon == std::string_view::npos) break;
            auto name = trim(body.substr(0, colon));
            if (name.empty() || is_scaffold_label(name)) break;
            if (auto tok = first_number(body, colon + 1)) {
                bool clamped = false;
                scores.push_back({std::string(name), normalize_unit_scale(*tok, &clamped)});
                out.clamped = out.clamped || clamped;
            }
            // bullets with non-numeric values ("Fever: high") are skipped
        }
        if (!scores.empty()) out.symptoms = std::move(scores);
        return out;
    }

    return out;
}

struct DifficultyExtraction {
    std::optional<int> difficulty;
    bool clamped = false;
};

inline DifficultyExtraction extract_difficulty_ex(std::string_view text) {
    for (auto line : split_lines(text)) {
        auto pos = ifind(line, "difficult");
        if (pos == std::string_view::npos) continue;
        auto start = value_start_after_colon(line, pos);
        if (start == std::string_view::npos) continue;
        if (auto tok = first_number(line, start)) {
            DifficultyExtraction out;
            int v = static_cast<int>(std::llround(tok->value));
            if (v < 1) { v = 1; out.clamped = true; }
            if (v > 10) { v = 10; out.clamped = true; }
            out.difficulty = v;
            return out;
        }
    }
    return {};
}

} // namespace detail

/// Confidence in [0,1] from labeled lines or, as a fallback, the last
/// standalone percentage; absent when the reply carries none.
inline std::optional<double> extract_confidence(std::string_view text) {
    return detail::extract_confidence_ex(text).confidence;
}

/// Option label from an answer-labeled line, option-text match, or the last
/// standalone letter; absent when nothing matches.
inline std::optional<char> extract_answer(std::string_view text, const std::vector<Option>& options) {
    return detail::extract_answer_ex(text, options).answer;
}

/// Scenario score for atypical_scenario, symptom block for
/// atypical_presentations; absent (never imputed) when not found.
inline detail::AtypicalityExtraction extract_atypicality(std::string_view text, StrategyKind kind) {
    return detail::extract_atypicality_ex(text, kind);
}

/// Full structured extraction for one reply. Atypical strategies always end
/// up with atypicality present: missing scores are imputed to 1.0 and
/// flagged. Throws UnparseableResponse when neither an answer nor a
/// confidence can be found.
inline ElicitationResult parse_response(std::string_view text, const Strategy& strategy,
                                        const QARecord& record) {
    ElicitationResult res;
    res.record_id = record.id;

    auto ans = detail::extract_answer_ex(text, record.options);
    auto conf = detail::extract_confidence_ex(text);

    if (!ans.answer && !conf.confidence)
        throw UnparseableResponse("no answer letter and no confidence found in reply for record " +
                                      record.id,
                                  std::string(text));

    res.answer = ans.answer;
    if (ans.fallback) res.flags |= kFallbackGrammar;

    if (conf.confidence) {
        res.confidence = *conf.confidence;
        if (conf.clamped) res.flags |= kClamped;
        if (conf.fallback) res.flags |= kFallbackGrammar;
    } else {
        // an answer with no stated confidence reads as fully asserted
        res.confidence = 1.0;
        res.flags |= kImputedConfidence;
    }

    auto atyp = detail::extract_atypicality_ex(text, strategy.kind);
    if (atyp.clamped) res.flags |= kClamped;
    if (strategy.kind == StrategyKind::atypical_scenario) {
        if (atyp.scenario) {
            res.scenario_atypicality = atyp.scenario;
        } else {
            res.scenario_atypicality = 1.0;
            res.flags |= kImputedAtypicality;
        }
    } else if (strategy.kind == StrategyKind::atypical_presentations) {
        if (atyp.symptoms) {
            res.symptom_atypicalities = std::move(atyp.symptoms);
        } else {
            res.symptom_atypicalities = std::vector<SymptomScore>{{"", 1.0}};
            res.flags |= kImputedAtypicality;
        }
    }

    auto diff = detail::extract_difficulty_ex(text);
    if (diff.difficulty) {
        res.difficulty = diff.difficulty;
        if (diff.clamped) res.flags |= kClamped;
    }

    return res;
}

} // namespace vconf
