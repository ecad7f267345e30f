#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vconf/dataset.hpp"
#include "vconf/detail/hash.hpp"
#include "vconf/detail/rng.hpp"
#include "vconf/gateway.hpp"
#include "vconf/parser.hpp"
#include "vconf/prompt.hpp"

namespace vconf {

enum class AtypicalityShape { right_skewed, uniform, fixed };

inline const char* to_string(AtypicalityShape s) {
    switch (s) {
        case AtypicalityShape::right_skewed: return "right_skewed";
        case AtypicalityShape::uniform: return "uniform";
        case AtypicalityShape::fixed: return "fixed";
    }
    return "right_skewed";
}

inline AtypicalityShape atypicality_shape_from_string(std::string_view s) {
    if (s == "right_skewed") return AtypicalityShape::right_skewed;
    if (s == "uniform") return AtypicalityShape::uniform;
    if (s == "fixed") return AtypicalityShape::fixed;
    throw ConfigError("unknown atypicality shape '" + std::string(s) +
                      "' (expected right_skewed|uniform|fixed)");
}

/// Deterministic test model. Draws are a pure function of (seed, prompt,
/// params), so responses are byte-identical across runs, platforms, and
/// call orders.
struct MockModelSpec {
    std::uint64_t seed = 0;
    double accuracy = 0.7;            // P(answer == gold)
    double confidence_mean = 0.8;
    double confidence_spread = 0.1;   // uniform half-width around the mean
    AtypicalityShape atypicality_shape = AtypicalityShape::right_skewed;
    double atypicality_value = 1.0;   // emitted score for the fixed shape
    double format_noise_rate = 0.0;   // P(scaffold perturbed)
};

/// Ground truth behind one mock reply. Values live on the printable grid
/// (integer percent, two-decimal scores) so a noise-free render parses back
/// to exactly these numbers.
struct MockDraw {
    char answer = 'A';
    double confidence = 1.0;
    std::optional<double> scenario_atypicality;
    std::vector<SymptomScore> symptoms;
    std::optional<int> difficulty;
    bool perturbed = false;
    int perturb_variant = 0;
};

namespace detail {

inline double grid_score(double v) {
    if (v < 0.0) v = 0.0;
    if (v > 1.0) v = 1.0;
    return static_cast<double>(std::llround(v * 100.0)) / 100.0;
}

inline double draw_atypicality(const MockModelSpec& spec, SplitMix64& rng) {
    double u = rng.uniform01();
    switch (spec.atypicality_shape) {
        case AtypicalityShape::right_skewed: return grid_score(std::cbrt(u)); // mean 3/4
        case AtypicalityShape::uniform: return grid_score(u);
        case AtypicalityShape::fixed: return grid_score(spec.atypicality_value);
    }
    return 1.0;
}

inline std::string format_score(double v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

} // namespace detail

/// One structured draw for (record, strategy, params), seeded from the
/// request key so every sample index gets its own stream.
inline MockDraw mock_draw(const MockModelSpec& spec, const QARecord& record,
                          const Strategy& strategy, const GenParams& params,
                          const std::string& prompt_text) {
    auto key = request_key(prompt_text, params);
    detail::SplitMix64 rng(detail::sha256_seed(key + "#" + std::to_string(spec.seed)));

    MockDraw draw;
    double u_correct = rng.uniform01();
    double u_wrong = rng.uniform01();
    if (u_correct < spec.accuracy || record.options.size() < 2) {
        draw.answer = record.gold;
    } else {
        std::vector<char> wrong;
        for (const auto& o : record.options)
            if (o.label != record.gold) wrong.push_back(o.label);
        auto idx = static_cast<std::size_t>(u_wrong * static_cast<double>(wrong.size()));
        if (idx >= wrong.size()) idx = wrong.size() - 1;
        draw.answer = wrong[idx];
    }

    double u_conf = rng.uniform01();
    double conf = spec.confidence_mean + (2.0 * u_conf - 1.0) * spec.confidence_spread;
    draw.confidence = detail::grid_score(conf);

    if (strategy.kind == StrategyKind::atypical_scenario) {
        draw.scenario_atypicality = detail::draw_atypicality(spec, rng);
    } else if (strategy.kind == StrategyKind::atypical_presentations) {
        auto n_symptoms = 1 + static_cast<int>(rng.below(4));
        for (int s = 0; s < n_symptoms; ++s)
            draw.symptoms.push_back({"Symptom " + std::to_string(s + 1),
                                     detail::draw_atypicality(spec, rng)});
    }

    if (strategy.include_difficulty)
        draw.difficulty = 1 + static_cast<int>(rng.below(10));

    double u_noise = rng.uniform01();
    if (u_noise < spec.format_noise_rate) {
        draw.perturbed = true;
        draw.perturb_variant = static_cast<int>(rng.below(8));
    }
    return draw;
}

/// Renders a draw in the strategy's expected reply scaffold.
inline std::string render_mock_response(const MockDraw& draw, const Strategy& strategy) {
    std::ostringstream out;
    if (strategy.kind == StrategyKind::cot)
        out << "Let me consider each option step by step before committing.\n\n";
    if (strategy.kind == StrategyKind::atypical_scenario)
        out << "Situation Atypicality: " << detail::format_score(*draw.scenario_atypicality)
            << "\n\n";
    if (strategy.kind == StrategyKind::atypical_presentations) {
        out << "Symptoms and signs:\n";
        for (const auto& s : draw.symptoms)
            out << "- " << s.symptom << ": " << detail::format_score(s.score) << "\n";
        out << "\n";
    }
    out << "Response:\n";
    out << "- Answer (letter): " << draw.answer << "\n";
    if (draw.difficulty) out << "- Difficulty: " << *draw.difficulty << "\n";
    out << "- Confidence: " << static_cast<int>(std::llround(draw.confidence * 100.0)) << "%\n";
    return out.str();
}

namespace detail {

/// Scaffold perturbations that exercise the parser's tolerant tiers: case,
/// spacing, line reordering, prose phrasing, dropped blocks, and one
/// outright refusal.
inline std::string perturb_mock_response(std::string text, const MockDraw& draw, int variant) {
    auto pct = static_cast<int>(std::llround(draw.confidence * 100.0));
    switch (variant) {
        case 0: // lowercase everything
            return to_lower(text);
        case 1: { // inflate spacing around colons
            std::string out;
            for (char c : text) {
                if (c == ':') out += " :  ";
                else out += c;
            }
            return out;
        }
        case 2: { // drop the "(letter)" qualifier
            replace_first(text, "- Answer (letter):", "- Answer:");
            return text;
        }
        case 3: { // prose answer and confidence
            std::string prose = "After weighing the options, the answer is (" +
                                std::string(1, draw.answer) + ").\nI am " + std::to_string(pct) +
                                "% confident in this answer.\n";
            replace_first(text, "- Answer (letter): " + std::string(1, draw.answer) + "\n", "");
            replace_first(text, "- Confidence: " + std::to_string(pct) + "%\n", "");
            return text + prose;
        }
        case 4: { // confidence line before the answer line
            auto answer_line = "- Answer (letter): " + std::string(1, draw.answer) + "\n";
            auto conf_line = "- Confidence: " + std::to_string(pct) + "%\n";
            replace_first(text, answer_line, "");
            replace_first(text, conf_line, conf_line + answer_line);
            return text;
        }
        case 5: { // decimal confidence instead of a percentage
            replace_first(text, "- Confidence: " + std::to_string(pct) + "%",
                          "- Confidence: " + format_score(draw.confidence));
            return text;
        }
        case 6: { // drop the atypicality block (exercises imputation)
            auto resp = text.find("Response:");
            if (resp != std::string::npos && resp > 0) return text.substr(resp);
            return to_lower(text);
        }
        default: // refusal; unparseable by design
            return "I cannot commit to any of the listed choices for this question.\n";
    }
}

} // namespace detail

/// Full mock completion: draw, render, optionally perturb.
inline std::string mock_complete_text(const MockModelSpec& spec, const QARecord& record,
                                      const PromptText& prompt, const GenParams& params) {
    auto draw = mock_draw(spec, record, prompt.strategy, params, prompt.text);
    auto text = render_mock_response(draw, prompt.strategy);
    if (draw.perturbed)
        text = detail::perturb_mock_response(std::move(text), draw, draw.perturb_variant);
    return text;
}

inline RawResponse mock_complete(const PromptText& prompt, const GenParams& params,
                                 const MockModelSpec& spec, const QARecord& record) {
    RawResponse res;
    res.text = mock_complete_text(spec, record, prompt, params);
    res.request_key = request_key(prompt.text, params);
    res.timestamp = 0;
    res.provider = ProviderKind::mock;
    res.from_cache = false;
    return res;
}

/// Provider adapter over the mock model; resolves records by id.
class MockProvider : public Provider {
public:
    MockProvider(MockModelSpec spec, const Dataset& dataset) : spec_(spec) {
        for (const auto& rec : dataset.records) records_.emplace(rec.id, &rec);
    }

    std::string generate(const PromptText& prompt, const GenParams& params) override {
        auto it = records_.find(prompt.record_id);
        if (it == records_.end())
            throw DeliveryError("mock provider knows no record '" + prompt.record_id + "'");
        return mock_complete_text(spec_, *it->second, prompt, params);
    }

    ProviderKind kind() const override { return ProviderKind::mock; }

    std::int64_t now() const override { return 0; } // deterministic cache bytes

private:
    MockModelSpec spec_;
    std::map<std::string, const QARecord*> records_;
};

} // namespace vconf
