#pragma once

// Brute-force reference implementations, deliberately written along
// different routes than the library: explicit bin-edge comparisons instead
// of index arithmetic, O(n^2) pair counting instead of rank sums. They
// exist only to cross-check the production metrics.

#include <cmath>
#include <cstdlib>
#include <vector>

#include "vconf/metrics.hpp"

namespace oracles {

inline int oracle_bin(double v, int num_bins) {
    for (int k = 0; k < num_bins; ++k) {
        double lower = static_cast<double>(k) / num_bins;
        double upper = static_cast<double>(k + 1) / num_bins;
        bool last = k == num_bins - 1;
        if (v >= lower && (v < upper || (last && v <= upper))) return k;
    }
    return num_bins - 1;
}

inline double ece_oracle(const std::vector<vconf::ScoredRecord>& records, int num_bins) {
    std::vector<std::vector<const vconf::ScoredRecord*>> bins(num_bins);
    for (const auto& r : records) bins[oracle_bin(r.confidence, num_bins)].push_back(&r);
    double total = 0.0;
    for (const auto& bin : bins) {
        if (bin.empty()) continue;
        double conf = 0.0, acc = 0.0;
        for (const auto* r : bin) {
            conf += r->confidence;
            acc += r->correct ? 1.0 : 0.0;
        }
        conf /= static_cast<double>(bin.size());
        acc /= static_cast<double>(bin.size());
        total += (static_cast<double>(bin.size()) / static_cast<double>(records.size())) *
                 std::fabs(acc - conf);
    }
    return total;
}

inline double brier_oracle(const std::vector<vconf::ScoredRecord>& records) {
    double total = 0.0;
    for (const auto& r : records) {
        double err = r.confidence - (r.correct ? 1.0 : 0.0);
        total += err * err;
    }
    return total / static_cast<double>(records.size());
}

/// Fraction of (correct, incorrect) pairs where the correct record has the
/// higher confidence; ties count one half.
inline double auroc_oracle(const std::vector<vconf::ScoredRecord>& records) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (const auto& pos : records) {
        if (!pos.correct) continue;
        for (const auto& neg : records) {
            if (neg.correct) continue;
            ++pairs;
            if (pos.confidence > neg.confidence) wins += 1.0;
            else if (pos.confidence == neg.confidence) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

} // namespace oracles
