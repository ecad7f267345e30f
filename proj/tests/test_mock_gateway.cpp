#include <catch_amalgamated.hpp>

#include <httplib.h>

#include <atomic>
#include <fstream>
#include <thread>

#include "support.hpp"
#include "vconf/detail/hash.hpp"
#include "vconf/gateway.hpp"
#include "vconf/mock_model.hpp"
#include "vconf/parser.hpp"

using namespace vconf;
using testsupport::TempDir;

namespace {

QARecord record_with(std::size_t n_options) {
    QARecord rec;
    rec.id = "g1";
    rec.question = "Pick the right choice.";
    for (std::size_t o = 0; o < n_options; ++o)
        rec.options.push_back({static_cast<char>('A' + o), "choice " + std::to_string(o)});
    rec.gold = 'B';
    return rec;
}

GenParams params_for(const char* model, int sample_index = 0) {
    GenParams p;
    p.model = model;
    p.temperature = 0.0;
    p.max_tokens = 256;
    p.sample_index = sample_index;
    return p;
}

} // namespace

TEST_CASE("sha256 matches the published test vector") {
    CHECK(vconf::detail::sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(vconf::detail::sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("request keys separate sample indices and react to every input") {
    auto p0 = params_for("model-x", 0);
    auto p1 = params_for("model-x", 1);
    CHECK(request_key("prompt", p0) != request_key("prompt", p1));
    CHECK(request_key("prompt", p0) != request_key("other prompt", p0));
    auto warm = p0;
    warm.temperature = 1.0;
    CHECK(request_key("prompt", p0) != request_key("prompt", warm));
    auto other_model = p0;
    other_model.model = "model-y";
    CHECK(request_key("prompt", p0) != request_key("prompt", other_model));
    // max_tokens is deliberately not part of the key
    auto more_tokens = p0;
    more_tokens.max_tokens = 4096;
    CHECK(request_key("prompt", p0) == request_key("prompt", more_tokens));
}

TEST_CASE("mock accuracy 1 with clean formatting always answers gold") {
    auto rec = record_with(5);
    MockModelSpec spec;
    spec.seed = 3;
    spec.accuracy = 1.0;
    spec.format_noise_rate = 0.0;
    for (int s = 0; s < 20; ++s) {
        auto prompt = render(rec, {StrategyKind::vanilla, false});
        auto res = mock_complete(prompt, params_for("m", s), spec, rec);
        auto parsed = parse_response(res.text, prompt.strategy, rec);
        CHECK(parsed.answer == rec.gold);
    }
}

TEST_CASE("the same seed reproduces byte-identical mock text") {
    auto rec = record_with(4);
    MockModelSpec spec;
    spec.seed = 7;
    spec.format_noise_rate = 0.35;
    auto prompt = render(rec, {StrategyKind::atypical_scenario, false});
    auto a = mock_complete(prompt, params_for("m", 2), spec, rec);
    auto b = mock_complete(prompt, params_for("m", 2), spec, rec);
    CHECK(a.text == b.text);
    CHECK(a.request_key == b.request_key);

    MockModelSpec other = spec;
    other.seed = 8;
    auto c = mock_complete(prompt, params_for("m", 2), other, rec);
    CHECK(a.text != c.text);
}

TEST_CASE("right-skewed atypicality draws center on the pinned mean 0.75") {
    // E[U^(1/3)] = 3/4 for the cube-root draw
    auto rec = record_with(4);
    MockModelSpec spec;
    spec.seed = 9;
    spec.atypicality_shape = AtypicalityShape::right_skewed;
    auto prompt = render(rec, {StrategyKind::atypical_scenario, false});
    double sum = 0.0;
    const int n = 1000;
    for (int s = 0; s < n; ++s) {
        auto draw = mock_draw(spec, rec, prompt.strategy, params_for("m", s), prompt.text);
        REQUIRE(draw.scenario_atypicality.has_value());
        sum += *draw.scenario_atypicality;
    }
    CHECK_THAT(sum / n, Catch::Matchers::WithinAbs(0.75, 0.05));
}

TEST_CASE("noise-free mock responses parse back to the generating values") {
    MockModelSpec spec;
    spec.seed = 10;
    spec.confidence_spread = 0.3;
    const Strategy strategies[] = {{StrategyKind::vanilla, false},
                                   {StrategyKind::cot, false},
                                   {StrategyKind::atypical_scenario, true},
                                   {StrategyKind::atypical_presentations, false}};
    vconf::detail::SplitMix64 rng(1);
    for (int iter = 0; iter < 2000; ++iter) {
        auto rec = record_with(2 + rng.below(4));
        const auto& strategy = strategies[iter % 4];
        auto prompt = render(rec, strategy);
        auto params = params_for("m", iter);
        auto draw = mock_draw(spec, rec, strategy, params, prompt.text);
        auto text = render_mock_response(draw, strategy);
        auto parsed = parse_response(text, strategy, rec);
        CHECK(parsed.answer == draw.answer);
        CHECK(parsed.confidence == draw.confidence);
        CHECK(parsed.flags == 0);
        if (strategy.kind == StrategyKind::atypical_scenario)
            CHECK(parsed.scenario_atypicality == draw.scenario_atypicality);
        if (strategy.kind == StrategyKind::atypical_presentations) {
            REQUIRE(parsed.symptom_atypicalities.has_value());
            CHECK(*parsed.symptom_atypicalities == draw.symptoms);
        }
        CHECK(parsed.difficulty == draw.difficulty);
    }
}

TEST_CASE("gateway caches by request key and returns identical bytes") {
    TempDir tmp("cache");
    auto rec = record_with(4);
    Dataset ds{"custom", {rec}};
    MockModelSpec spec;
    spec.seed = 4;
    Gateway gw(std::make_unique<MockProvider>(spec, ds), tmp.path() / "cache.jsonl");
    auto prompt = render(rec, {StrategyKind::vanilla, false});

    auto first = gw.complete(prompt, params_for("m"));
    CHECK_FALSE(first.from_cache);
    auto second = gw.complete(prompt, params_for("m"));
    CHECK(second.from_cache);
    CHECK(second.text == first.text);
    CHECK(gw.provider_calls() == 1);
    CHECK(gw.cache_hits() == 1);

    auto different = gw.complete(prompt, params_for("m", 1));
    CHECK_FALSE(different.from_cache);
    CHECK(different.request_key != first.request_key);
}

TEST_CASE("cache survives process boundaries via the jsonl file") {
    TempDir tmp("cachereload");
    auto rec = record_with(3);
    Dataset ds{"custom", {rec}};
    MockModelSpec spec;
    spec.seed = 5;
    auto prompt = render(rec, {StrategyKind::vanilla, false});
    std::string first_text;
    {
        Gateway gw(std::make_unique<MockProvider>(spec, ds), tmp.path() / "c.jsonl");
        first_text = gw.complete(prompt, params_for("m")).text;
    }
    {
        Gateway gw(std::make_unique<MockProvider>(spec, ds), tmp.path() / "c.jsonl");
        auto res = gw.complete(prompt, params_for("m"));
        CHECK(res.from_cache);
        CHECK(res.text == first_text);
        CHECK(gw.provider_calls() == 0);
    }
}

TEST_CASE("cache-only gateway lists missing keys") {
    TempDir tmp("cachemiss");
    auto rec = record_with(3);
    auto prompt = render(rec, {StrategyKind::vanilla, false});
    Gateway gw(nullptr, tmp.path() / "c.jsonl");
    std::vector<Gateway::Item> items{{prompt, params_for("m", 0)}, {prompt, params_for("m", 1)}};
    try {
        gw.complete_all(items);
        FAIL("expected CacheMissError");
    } catch (const CacheMissError& e) {
        REQUIRE(e.missing_keys().size() == 2);
        CHECK(e.missing_keys()[0] == request_key(prompt.text, items[0].params));
    }
    auto partial = gw.complete_all(items, true);
    CHECK_FALSE(partial[0].has_value());
    CHECK_FALSE(partial[1].has_value());
}

TEST_CASE("batch completion bytes are independent of parallelism") {
    auto rec_set = testsupport::make_synthetic_dataset(30, 4, 42);
    MockModelSpec spec;
    spec.seed = 6;
    auto run_with = [&](int parallelism, const std::filesystem::path& dir) {
        Gateway gw(std::make_unique<MockProvider>(spec, rec_set), dir / "c.jsonl", parallelism);
        std::vector<Gateway::Item> items;
        for (const auto& rec : rec_set.records) {
            auto prompt = render(rec, {StrategyKind::vanilla, false});
            for (int s = 0; s < 2; ++s) items.push_back({prompt, params_for("m", s)});
        }
        auto responses = gw.complete_all(items);
        REQUIRE(responses.size() == items.size());
        std::ifstream in(dir / "c.jsonl");
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return bytes;
    };
    TempDir serial_dir("serial"), parallel_dir("parallel");
    auto serial = run_with(1, serial_dir.path());
    auto parallel = run_with(8, parallel_dir.path());
    CHECK_FALSE(serial.empty());
    CHECK(serial == parallel);
}

TEST_CASE("http provider retries rate limits and fails fast on 4xx") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        int n = ++hits;
        REQUIRE(req.get_header_value("Authorization") == "Bearer test-key");
        if (n <= 2) {
            res.status = 429;
            res.set_content("slow down", "text/plain");
            return;
        }
        auto body = nlohmann::json::parse(req.body);
        REQUIRE(body.at("model") == "remote-model");
        nlohmann::json reply{
            {"choices",
             {{{"message", {{"role", "assistant"}, {"content", "- Answer (letter): A\n- Confidence: 80%"}}}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    server.Post("/v1/bad/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        res.status = 400;
        res.set_content("bad request", "text/plain");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    auto base = "http://127.0.0.1:" + std::to_string(port);
    auto rec = record_with(3);
    auto prompt = render(rec, {StrategyKind::vanilla, false});

    {
        HttpOptions opts;
        opts.base_url = base + "/v1";
        opts.api_key = "test-key";
        opts.max_retries = 5;
        opts.backoff_ms = 1;
        HttpProvider provider(opts);
        auto text = provider.generate(prompt, params_for("remote-model"));
        CHECK(text == "- Answer (letter): A\n- Confidence: 80%");
        CHECK(hits == 3);
    }
    {
        HttpOptions opts;
        opts.base_url = base + "/v1/bad";
        opts.api_key = "test-key";
        opts.backoff_ms = 1;
        HttpProvider provider(opts);
        CHECK_THROWS_AS(provider.generate(prompt, params_for("remote-model")), ConfigError);
    }
    {
        HttpOptions opts;
        opts.base_url = "http://127.0.0.1:1"; // nothing listens here
        opts.api_key = "test-key";
        opts.max_retries = 1;
        opts.backoff_ms = 1;
        HttpProvider provider(opts);
        CHECK_THROWS_AS(provider.generate(prompt, params_for("remote-model")), DeliveryError);
    }

    server.stop();
    server_thread.join();
}

TEST_CASE("missing api key is rejected before any request") {
    HttpOptions opts;
    opts.base_url = "https://api.example.com/v1";
    CHECK_THROWS_AS(HttpProvider(opts), ConfigError);
}
