#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vconf/errors.hpp"
#include "vconf/parser.hpp"

namespace vconf {

/// K elicitation results for the same question under self-random sampling,
/// plus the reference answer the agreement terms compare against.
struct SampleSet {
    std::string record_id;
    std::vector<ElicitationResult> samples; // K >= 1
    char reference = 'A';
};

/// Modal answer over the non-abstaining samples. Ties break by highest
/// summed confidence, then lexicographically smallest label. Gold labels
/// never enter here; this is the inference-time reference.
inline char majority_reference(std::span<const ElicitationResult> samples) {
    std::map<char, std::pair<int, double>> tally; // label -> (count, summed confidence)
    for (const auto& s : samples) {
        if (!s.answer) continue;
        auto& [count, conf] = tally[*s.answer];
        ++count;
        conf += s.confidence;
    }
    if (tally.empty())
        throw NoReferenceError("all samples abstained; no reference answer");
    char best = 0;
    int best_count = -1;
    double best_conf = -1.0;
    for (const auto& [label, entry] : tally) {
        auto [count, conf] = entry;
        if (count > best_count || (count == best_count && conf > best_conf)) {
            best = label;
            best_count = count;
            best_conf = conf;
        }
        // equal count and confidence keeps the earlier (smaller) label
    }
    return best;
}

/// Checked construction: samples must share the record id and the reference
/// must occur among the sample answers.
inline SampleSet make_sample_set(std::vector<ElicitationResult> samples, char reference) {
    if (samples.empty()) throw std::invalid_argument("sample set needs K >= 1");
    const auto& id = samples.front().record_id;
    bool seen = false;
    for (const auto& s : samples) {
        if (s.record_id != id)
            throw std::invalid_argument("sample set mixes record ids: " + id + " vs " + s.record_id);
        if (s.answer && *s.answer == reference) seen = true;
    }
    if (!seen)
        throw std::invalid_argument(std::string("reference '") + reference +
                                    "' does not occur among sample answers");
    return SampleSet{id, std::move(samples), reference};
}

/// Fraction of the K answers agreeing with the reference.
inline double consistency(std::span<const ElicitationResult> samples, char reference) {
    if (samples.empty()) throw std::invalid_argument("consistency needs K >= 1");
    std::size_t matches = 0;
    for (const auto& s : samples)
        if (s.answer && *s.answer == reference) ++matches;
    return static_cast<double>(matches) / static_cast<double>(samples.size());
}

inline double consistency(const SampleSet& set) { return consistency(set.samples, set.reference); }

/// Confidence-weighted agreement with the reference.
inline double weighted_average(std::span<const ElicitationResult> samples, char reference) {
    if (samples.empty()) throw std::invalid_argument("weighted average needs K >= 1");
    double num = 0.0, den = 0.0;
    for (const auto& s : samples) {
        den += s.confidence;
        if (s.answer && *s.answer == reference) num += s.confidence;
    }
    if (den <= 0.0)
        throw DegenerateWeightsError("all sample confidences are zero");
    return num / den;
}

inline double weighted_average(const SampleSet& set) {
    return weighted_average(set.samples, set.reference);
}

/// Scales a confidence by the mean of e^(A_k - 1) over the atypicality
/// scores; the result equals the input only when every score is 1.
inline double recalibrate(double confidence, std::span<const double> atypicalities) {
    if (atypicalities.empty())
        throw std::invalid_argument("recalibrate needs at least one atypicality score; "
                                    "impute 1.0 for replies without scores");
    double sum = 0.0;
    for (double a : atypicalities) sum += std::exp(a - 1.0);
    return confidence * (sum / static_cast<double>(atypicalities.size()));
}

inline double recalibrate(double confidence, const std::vector<double>& atypicalities) {
    return recalibrate(confidence, std::span<const double>(atypicalities));
}

/// Atypicality scores of one result, as consumed by recalibrate(): the
/// scenario score, or every symptom score.
inline std::vector<double> atypicality_scores(const ElicitationResult& res) {
    std::vector<double> out;
    if (res.scenario_atypicality) {
        out.push_back(*res.scenario_atypicality);
    } else if (res.symptom_atypicalities) {
        for (const auto& s : *res.symptom_atypicalities) out.push_back(s.score);
    }
    return out;
}

/// One question's final confidence/answer after aggregation and (optional)
/// recalibration.
struct FinalEstimate {
    std::string record_id;
    std::optional<char> answer;
    double confidence = 0.0;
    std::optional<double> calibrated_confidence;
    std::string method;

    double effective_confidence() const {
        return calibrated_confidence ? *calibrated_confidence : confidence;
    }
};

} // namespace vconf
