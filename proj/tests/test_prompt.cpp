#include <catch_amalgamated.hpp>

#include <fstream>

#include "support.hpp"
#include "vconf/detail/strings.hpp"
#include "vconf/prompt.hpp"

using namespace vconf;
using vconf::detail::count_occurrences;

namespace {

QARecord sample_record() {
    QARecord rec;
    rec.id = "q1";
    rec.question = "A patient presents with fever, headache, and an unusual rash. "
                   "What is the most likely diagnosis?";
    rec.options = {{'A', "Allergy"}, {'B', "Measles"}, {'C', "Rocky Mountain spotted fever"},
                   {'D', "Influenza"}};
    rec.gold = 'C';
    return rec;
}

} // namespace

TEST_CASE("atypical scenario prompt carries the scoring rubric verbatim") {
    auto prompt = render(sample_record(), {StrategyKind::atypical_scenario, false});
    CHECK(prompt.text.find("0 indicates a highly atypical situation") != std::string::npos);
    CHECK(prompt.text.find("Situation Atypicality: [Atypicality score]") != std::string::npos);
    CHECK(prompt.text.find("Answer (letter): [Letter of the choice]") != std::string::npos);
    CHECK(prompt.text.find("Difficulty") == std::string::npos);
}

TEST_CASE("vanilla prompt asks for a 0-100% confidence level") {
    auto prompt = render(sample_record(), {StrategyKind::vanilla, false});
    CHECK(prompt.text.find("confidence level (0% to 100%)") != std::string::npos);
    CHECK(prompt.text.find("Answer (letter): [Letter of the choice]") != std::string::npos);
    CHECK(prompt.text.find("atypicality") == std::string::npos);
}

TEST_CASE("difficulty add-on uses the 1-10 scale wording") {
    auto prompt = render(sample_record(), {StrategyKind::atypical_presentations, true});
    CHECK(prompt.text.find("Score on a scale from 1 to 10 with 10 being the hardest") !=
          std::string::npos);
    CHECK(prompt.text.find("Symptoms and signs:") != std::string::npos);
    CHECK(prompt.text.find("Answer, Difficulty, and Confidence:") != std::string::npos);
}

TEST_CASE("cot prompt keeps the vanilla wording and adds the step-by-step line") {
    auto prompt = render(sample_record(), {StrategyKind::cot, false});
    CHECK(prompt.text.find("confidence level (0% to 100%)") != std::string::npos);
    CHECK(prompt.text.find("Let's think step by step.") != std::string::npos);
}

TEST_CASE("difficulty flag outside the atypical strategies is a config error") {
    CHECK_THROWS_AS(render(sample_record(), {StrategyKind::vanilla, true}), ConfigError);
    CHECK_THROWS_AS(render(sample_record(), {StrategyKind::cot, true}), ConfigError);
}

TEST_CASE("prompt contains the question and every option exactly once") {
    auto rec = sample_record();
    for (auto kind : {StrategyKind::vanilla, StrategyKind::cot, StrategyKind::atypical_scenario,
                      StrategyKind::atypical_presentations}) {
        auto prompt = render(rec, {kind, false});
        CHECK(count_occurrences(prompt.text, rec.question) == 1);
        for (const auto& opt : rec.options) {
            auto line = std::string(1, opt.label) + ". " + opt.text;
            CHECK(count_occurrences(prompt.text, line) == 1);
        }
    }
}

TEST_CASE("option enumeration preserves record order") {
    auto rec = sample_record();
    auto prompt = render(rec, {StrategyKind::vanilla, false});
    std::size_t last = 0;
    for (const auto& opt : rec.options) {
        auto pos = prompt.text.find(std::string(1, opt.label) + ". " + opt.text);
        REQUIRE(pos != std::string::npos);
        CHECK(pos > last);
        last = pos;
    }
}

TEST_CASE("question/options block is byte-identical across strategies") {
    auto rec = sample_record();
    auto block = question_block(rec);
    for (auto kind : {StrategyKind::vanilla, StrategyKind::cot, StrategyKind::atypical_scenario,
                      StrategyKind::atypical_presentations}) {
        auto prompt = render(rec, {kind, false});
        CHECK(prompt.text.find(block) != std::string::npos);
    }
}

TEST_CASE("render is a pure function of record and strategy") {
    auto rec = sample_record();
    Strategy s{StrategyKind::atypical_scenario, true};
    CHECK(render(rec, s).text == render(rec, s).text);
}

TEST_CASE("context is prepended to the question block when present") {
    auto rec = sample_record();
    rec.context = "BACKGROUND: the patient returned from a camping trip.";
    auto block = question_block(rec);
    CHECK(block.rfind(rec.context, 0) == 0);
    CHECK(block.find(rec.question) != std::string::npos);
}

TEST_CASE("template overrides shadow the embedded assets per strategy") {
    testsupport::TempDir tmp("templates");
    std::ofstream(tmp.path() / "vanilla.txt")
        << "CUSTOM OVERRIDE\n{question}\nAnswer with one letter.\n";
    auto lib = PromptLibrary::with_overrides(tmp.path());
    auto rec = sample_record();

    auto vanilla = lib.render(rec, {StrategyKind::vanilla, false});
    CHECK(vanilla.text.find("CUSTOM OVERRIDE") != std::string::npos);
    CHECK(vanilla.text.find(rec.question) != std::string::npos);

    // strategies without an override file keep the embedded template
    auto cot = lib.render(rec, {StrategyKind::cot, false});
    CHECK(cot.text.find("Let's think step by step.") != std::string::npos);
}

TEST_CASE("override without the question placeholder is rejected") {
    testsupport::TempDir tmp("badtemplate");
    std::ofstream(tmp.path() / "cot.txt") << "no placeholder here\n";
    CHECK_THROWS_AS(PromptLibrary::with_overrides(tmp.path()), ConfigError);
}
