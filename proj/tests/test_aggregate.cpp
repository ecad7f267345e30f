#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "support.hpp"
#include "vconf/aggregate.hpp"

using namespace vconf;
using vconf::detail::SplitMix64;

namespace {

ElicitationResult sample(char answer, double confidence) {
    ElicitationResult r;
    r.record_id = "q";
    r.answer = answer;
    r.confidence = confidence;
    return r;
}

ElicitationResult abstain(double confidence) {
    ElicitationResult r;
    r.record_id = "q";
    r.confidence = confidence;
    return r;
}

constexpr double kTol = 1e-9;

} // namespace

TEST_CASE("majority reference picks the modal answer") {
    std::vector<ElicitationResult> s{sample('B', 0.5), sample('B', 0.5), sample('C', 0.9)};
    CHECK(majority_reference(s) == 'B');
}

TEST_CASE("majority ties break by summed confidence, then label") {
    std::vector<ElicitationResult> by_conf{sample('A', 0.9), sample('B', 0.6)};
    CHECK(majority_reference(by_conf) == 'A');

    std::vector<ElicitationResult> by_label{sample('B', 0.7), sample('A', 0.7)};
    CHECK(majority_reference(by_label) == 'A');
}

TEST_CASE("all-abstain sample sets have no reference") {
    std::vector<ElicitationResult> s{abstain(0.5), abstain(0.9)};
    CHECK_THROWS_AS(majority_reference(s), NoReferenceError);
}

TEST_CASE("consistency counts agreement with the reference") {
    std::vector<ElicitationResult> s{sample('B', 0.5), sample('B', 0.4), sample('C', 0.9)};
    CHECK_THAT(consistency(s, 'B'), Catch::Matchers::WithinAbs(2.0 / 3.0, kTol));

    std::vector<ElicitationResult> unanimous{sample('A', 0.1), sample('A', 0.2), sample('A', 0.3)};
    CHECK(consistency(unanimous, 'A') == 1.0);
}

TEST_CASE("weighted average matches the hand-evaluated fixture") {
    std::vector<ElicitationResult> s{sample('A', 0.9), sample('A', 0.8), sample('B', 0.7)};
    // (0.9 + 0.8) / (0.9 + 0.8 + 0.7)
    CHECK_THAT(weighted_average(s, 'A'), Catch::Matchers::WithinAbs(0.7083333333333333, kTol));
}

TEST_CASE("weighted average is 1 when all answers match, any confidences") {
    std::vector<ElicitationResult> s{sample('C', 0.31), sample('C', 0.99), sample('C', 0.05)};
    CHECK(weighted_average(s, 'C') == 1.0);
    std::vector<ElicitationResult> single{sample('D', 0.4)};
    CHECK(weighted_average(single, 'D') == 1.0);
}

TEST_CASE("all-zero confidences are degenerate weights") {
    std::vector<ElicitationResult> s{sample('A', 0.0), sample('B', 0.0)};
    CHECK_THROWS_AS(weighted_average(s, 'A'), DegenerateWeightsError);
}

TEST_CASE("sample set construction checks ids and reference membership") {
    std::vector<ElicitationResult> s{sample('A', 0.5), sample('B', 0.5)};
    CHECK_THROWS_AS(make_sample_set(s, 'C'), std::invalid_argument);
    auto mixed = s;
    mixed[1].record_id = "other";
    CHECK_THROWS_AS(make_sample_set(mixed, 'A'), std::invalid_argument);
    auto ok = make_sample_set(s, 'B');
    CHECK(ok.record_id == "q");
    CHECK(consistency(ok) == 0.5);
}

TEST_CASE("recalibrate keeps the confidence only for all-typical scores") {
    CHECK_THAT(recalibrate(0.8, std::vector<double>{1.0, 1.0, 1.0}),
               Catch::Matchers::WithinAbs(0.8, kTol));
    CHECK_THAT(recalibrate(1.0, std::vector<double>{0.0}),
               Catch::Matchers::WithinAbs(0.36787944117144233, kTol));
    CHECK_THAT(recalibrate(0.9, std::vector<double>{0.5, 1.0}),
               Catch::Matchers::WithinAbs(0.7229387968706851, kTol));
}

TEST_CASE("recalibrate rejects an empty score list") {
    CHECK_THROWS_AS(recalibrate(0.5, std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("recalibrate stays within [C/e, C] and is monotone") {
    SplitMix64 rng(11);
    for (int iter = 0; iter < 2000; ++iter) {
        double c = rng.uniform01();
        std::vector<double> a(1 + rng.below(5));
        for (auto& v : a) v = rng.uniform01();
        double cc = recalibrate(c, a);
        CHECK(cc >= c * std::exp(-1.0) - 1e-12);
        CHECK(cc <= c + 1e-12);

        double c_up = recalibrate(std::min(1.0, c + 0.05), a);
        CHECK(c_up >= cc - 1e-12);

        auto bumped = a;
        std::size_t j = rng.below(a.size());
        bumped[j] = std::min(1.0, bumped[j] + 0.1);
        CHECK(recalibrate(c, bumped) >= cc - 1e-12);
    }
}

TEST_CASE("scenario recalibration equals the general formula at K=1") {
    SplitMix64 rng(12);
    for (int iter = 0; iter < 200; ++iter) {
        double c = rng.uniform01();
        double a = rng.uniform01();
        CHECK(recalibrate(c, std::vector<double>{a}) ==
              c * std::exp(a - 1.0));
    }
}

TEST_CASE("aggregations are invariant under sample permutation") {
    SplitMix64 rng(13);
    std::vector<ElicitationResult> s;
    for (int i = 0; i < 6; ++i)
        s.push_back(sample(static_cast<char>('A' + rng.below(3)), 0.1 + 0.8 * rng.uniform01()));
    char ref = majority_reference(s);
    double base_cons = consistency(s, ref);
    double base_wavg = weighted_average(s, ref);
    for (int iter = 0; iter < 200; ++iter) {
        for (std::size_t i = s.size(); i > 1; --i) std::swap(s[i - 1], s[rng.below(i)]);
        CHECK(majority_reference(s) == ref);
        CHECK_THAT(consistency(s, ref), Catch::Matchers::WithinAbs(base_cons, kTol));
        CHECK_THAT(weighted_average(s, ref), Catch::Matchers::WithinAbs(base_wavg, kTol));
    }
}

TEST_CASE("equal confidences make both aggregations agree") {
    SplitMix64 rng(14);
    for (int iter = 0; iter < 300; ++iter) {
        std::vector<ElicitationResult> s;
        auto k = 1 + rng.below(5);
        for (std::size_t i = 0; i < k; ++i)
            s.push_back(sample(static_cast<char>('A' + rng.below(4)), 0.6));
        char ref = majority_reference(s);
        CHECK_THAT(consistency(s, ref), Catch::Matchers::WithinAbs(weighted_average(s, ref), kTol));
    }
}

TEST_CASE("mean consistency over uniform answers matches the enumeration") {
    // brute force over all 5^3 equally likely answer triples
    double expected = 0.0;
    for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b)
            for (int c = 0; c < 5; ++c) {
                int counts[5] = {0, 0, 0, 0, 0};
                ++counts[a], ++counts[b], ++counts[c];
                expected += *std::max_element(counts, counts + 5) / 3.0;
            }
    expected /= 125.0;
    CHECK_THAT(expected, Catch::Matchers::WithinAbs(0.52, 1e-12));

    SplitMix64 rng(15);
    double total = 0.0;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
        std::vector<ElicitationResult> s;
        for (int i = 0; i < 3; ++i)
            s.push_back(sample(static_cast<char>('A' + rng.below(5)), 0.5));
        total += consistency(s, majority_reference(s));
    }
    CHECK_THAT(total / trials, Catch::Matchers::WithinAbs(expected, 0.01));
}

TEST_CASE("abstained samples count against consistency but keep their weight out of matches") {
    std::vector<ElicitationResult> s{sample('A', 0.8), abstain(0.4), sample('A', 0.6)};
    CHECK_THAT(consistency(s, 'A'), Catch::Matchers::WithinAbs(2.0 / 3.0, kTol));
    CHECK_THAT(weighted_average(s, 'A'), Catch::Matchers::WithinAbs(1.4 / 1.8, kTol));
}
