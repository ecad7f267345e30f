#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vconf/errors.hpp"

namespace vconf {

/// One question's final confidence and correctness outcome, plus the
/// optional per-question analysis axes.
struct ScoredRecord {
    std::string record_id;
    double confidence = 0.0; // conf_n
    bool correct = false;    // o_n
    std::optional<double> atypicality; // scenario score or mean symptom score
    std::optional<int> difficulty;     // 1..10
};

/// Equal-width bin over [0,1]: [lower, upper), last bin closed.
struct Bin {
    double lower = 0.0;
    double upper = 1.0;
    std::vector<std::string> member_ids;
    double mean_confidence = 0.0;
    double accuracy = 0.0;
    std::size_t count = 0;
};

struct AtypicalityBin {
    double lower = 0.0;
    double upper = 1.0;
    double accuracy = 0.0;
    double ece = 0.0;
    std::size_t count = 0;
};

// 10 difficulty rows (1..10) of atypicality-bin counts.
using DifficultyCross = std::array<std::vector<std::size_t>, 10>;

namespace detail {

inline int bin_index(double v, int num_bins) {
    if (v >= 1.0) return num_bins - 1;
    int idx = static_cast<int>(v * num_bins);
    return idx < 0 ? 0 : (idx >= num_bins ? num_bins - 1 : idx);
}

} // namespace detail

/// Expected calibration error: bin-count-weighted mean |accuracy - mean
/// confidence| over equal-width confidence bins; empty bins contribute 0.
inline double ece(std::span<const ScoredRecord> records, int num_bins) {
    if (records.empty()) throw MetricError("ece is undefined on an empty record set");
    if (num_bins < 1) throw MetricError("ece needs num_bins >= 1");
    std::vector<double> conf_sum(num_bins, 0.0);
    std::vector<std::size_t> correct_sum(num_bins, 0), count(num_bins, 0);
    for (const auto& r : records) {
        int k = detail::bin_index(r.confidence, num_bins);
        conf_sum[k] += r.confidence;
        correct_sum[k] += r.correct ? 1 : 0;
        ++count[k];
    }
    const double n = static_cast<double>(records.size());
    double total = 0.0;
    for (int k = 0; k < num_bins; ++k) {
        if (count[k] == 0) continue;
        double c = static_cast<double>(count[k]);
        double acc = static_cast<double>(correct_sum[k]) / c;
        double conf = conf_sum[k] / c;
        total += (c / n) * std::abs(acc - conf);
    }
    return total;
}

/// Mean squared error between confidence and the 0/1 outcome.
inline double brier(std::span<const ScoredRecord> records) {
    if (records.empty()) throw MetricError("brier is undefined on an empty record set");
    double sum = 0.0;
    for (const auto& r : records) {
        double o = r.correct ? 1.0 : 0.0;
        sum += (r.confidence - o) * (r.confidence - o);
    }
    return sum / static_cast<double>(records.size());
}

/// Probability that a correct answer outranks an incorrect one by
/// confidence, ties counted one half. Computed via the rank-sum identity,
/// which equals exact pair counting.
inline double auroc(std::span<const ScoredRecord> records) {
    std::size_t n = records.size();
    if (n == 0) throw MetricError("auroc is undefined on an empty record set");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return records[a].confidence < records[b].confidence;
    });
    double rank_sum_pos = 0.0;
    std::size_t n_pos = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && records[order[j]].confidence == records[order[i]].confidence) ++j;
        double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            if (records[order[k]].correct) {
                rank_sum_pos += avg_rank;
                ++n_pos;
            }
        i = j;
    }
    std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw MetricError("auroc is undefined on a single-class record set");
    double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

/// Occupied confidence bins with their mean confidence and accuracy; the
/// points behind a calibration curve.
inline std::vector<Bin> reliability_curve(std::span<const ScoredRecord> records, int num_bins) {
    if (records.empty()) throw MetricError("reliability curve is undefined on an empty record set");
    if (num_bins < 1) throw MetricError("reliability curve needs num_bins >= 1");
    std::vector<Bin> bins(num_bins);
    std::vector<double> conf_sum(num_bins, 0.0);
    std::vector<std::size_t> correct_sum(num_bins, 0);
    for (int k = 0; k < num_bins; ++k) {
        bins[k].lower = static_cast<double>(k) / num_bins;
        bins[k].upper = static_cast<double>(k + 1) / num_bins;
    }
    for (const auto& r : records) {
        int k = detail::bin_index(r.confidence, num_bins);
        bins[k].member_ids.push_back(r.record_id);
        conf_sum[k] += r.confidence;
        correct_sum[k] += r.correct ? 1 : 0;
    }
    std::vector<Bin> occupied;
    for (int k = 0; k < num_bins; ++k) {
        bins[k].count = bins[k].member_ids.size();
        if (bins[k].count == 0) continue;
        double c = static_cast<double>(bins[k].count);
        bins[k].mean_confidence = conf_sum[k] / c;
        bins[k].accuracy = static_cast<double>(correct_sum[k]) / c;
        occupied.push_back(std::move(bins[k]));
    }
    return occupied;
}

/// Accuracy and ECE (10 confidence sub-bins) per atypicality bin, over the
/// records that carry an atypicality score. Only occupied bins are returned.
inline std::vector<AtypicalityBin> bin_by_atypicality(std::span<const ScoredRecord> records,
                                                      int num_bins) {
    if (num_bins < 1) throw MetricError("bin_by_atypicality needs num_bins >= 1");
    std::vector<std::vector<ScoredRecord>> members(num_bins);
    std::size_t total = 0;
    for (const auto& r : records) {
        if (!r.atypicality) continue;
        members[detail::bin_index(*r.atypicality, num_bins)].push_back(r);
        ++total;
    }
    if (total == 0) throw MetricError("no records carry an atypicality score");
    std::vector<AtypicalityBin> out;
    for (int k = 0; k < num_bins; ++k) {
        if (members[k].empty()) continue;
        AtypicalityBin bin;
        bin.lower = static_cast<double>(k) / num_bins;
        bin.upper = static_cast<double>(k + 1) / num_bins;
        bin.count = members[k].size();
        std::size_t correct = 0;
        for (const auto& r : members[k]) correct += r.correct ? 1 : 0;
        bin.accuracy = static_cast<double>(correct) / static_cast<double>(bin.count);
        bin.ece = ece(members[k], 10);
        out.push_back(std::move(bin));
    }
    return out;
}

/// Atypicality score counts over equal-width bins (zeros included).
inline std::vector<std::size_t> histogram(std::span<const ScoredRecord> records, int num_bins) {
    if (num_bins < 1) throw MetricError("histogram needs num_bins >= 1");
    std::vector<std::size_t> counts(num_bins, 0);
    for (const auto& r : records)
        if (r.atypicality) ++counts[detail::bin_index(*r.atypicality, num_bins)];
    return counts;
}

/// Counts by (difficulty 1..10) x (atypicality bin) for records carrying
/// both fields.
inline DifficultyCross difficulty_cross(std::span<const ScoredRecord> records, int num_bins) {
    if (num_bins < 1) throw MetricError("difficulty_cross needs num_bins >= 1");
    DifficultyCross cross;
    for (auto& row : cross) row.assign(num_bins, 0);
    for (const auto& r : records) {
        if (!r.difficulty || !r.atypicality) continue;
        int d = std::clamp(*r.difficulty, 1, 10);
        ++cross[d - 1][detail::bin_index(*r.atypicality, num_bins)];
    }
    return cross;
}

/// Metrics, reliability-curve points, and the binned analyses for one run.
struct CalibrationReport {
    double accuracy = 0.0;
    double ece = 0.0;
    double brier = 0.0;
    std::optional<double> auroc; // absent on single-class record sets
    std::size_t n = 0;
    std::size_t abstain_count = 0;
    int num_bins = 10;
    std::vector<Bin> reliability;
    std::optional<std::vector<AtypicalityBin>> atypicality_bins;
    std::optional<std::vector<std::size_t>> atypicality_histogram;
    std::optional<DifficultyCross> diff_cross;
};

inline CalibrationReport compute_report(std::span<const ScoredRecord> records,
                                        std::size_t abstain_count, int num_bins) {
    if (records.empty()) throw MetricError("cannot compute a report over zero scored records");
    CalibrationReport rep;
    rep.n = records.size();
    rep.abstain_count = abstain_count;
    rep.num_bins = num_bins;
    std::size_t correct = 0;
    for (const auto& r : records) correct += r.correct ? 1 : 0;
    rep.accuracy = static_cast<double>(correct) / static_cast<double>(rep.n);
    rep.ece = ece(records, num_bins);
    rep.brier = brier(records);
    try {
        rep.auroc = auroc(records);
    } catch (const MetricError&) {
        rep.auroc = std::nullopt;
    }
    rep.reliability = reliability_curve(records, num_bins);

    bool any_atyp = false, any_cross = false;
    for (const auto& r : records) {
        any_atyp = any_atyp || r.atypicality.has_value();
        any_cross = any_cross || (r.atypicality && r.difficulty);
    }
    if (any_atyp) {
        rep.atypicality_bins = bin_by_atypicality(records, num_bins);
        rep.atypicality_histogram = histogram(records, num_bins);
    }
    if (any_cross) rep.diff_cross = difficulty_cross(records, num_bins);
    return rep;
}

} // namespace vconf
