#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vconf/aggregate.hpp"
#include "vconf/config.hpp"
#include "vconf/dataset.hpp"
#include "vconf/gateway.hpp"
#include "vconf/metrics.hpp"
#include "vconf/mock_model.hpp"
#include "vconf/parser.hpp"
#include "vconf/prompt.hpp"
#include "vconf/report_io.hpp"

#ifndef VCONF_VERSION
#define VCONF_VERSION "0.1.0"
#endif
#ifndef VCONF_GIT_REV
#define VCONF_GIT_REV "unknown"
#endif

namespace vconf {

enum class QuestionStatus { ok, abstained, error };

inline const char* to_string(QuestionStatus s) {
    switch (s) {
        case QuestionStatus::ok: return "ok";
        case QuestionStatus::abstained: return "abstained";
        case QuestionStatus::error: return "error";
    }
    return "error";
}

struct QuestionOutcome {
    std::string id;
    QuestionStatus status = QuestionStatus::ok;
    std::string detail; // non-empty for abstained/error
};

struct RunManifest {
    nlohmann::ordered_json config;
    std::string version = VCONF_VERSION;
    std::string build = VCONF_GIT_REV;
    std::vector<QuestionOutcome> statuses;
    std::size_t provider_calls = 0;
    std::size_t cache_hits = 0;
    std::size_t total_samples = 0;
    std::size_t unparseable_samples = 0;
    bool degraded = false;
    double wall_seconds = 0.0; // stays 0 for deterministic (mock) runs
    std::vector<std::string> notes;
};

struct RunResult {
    RunManifest manifest;
    std::optional<CalibrationReport> report;
    std::vector<ScoredRecord> scored;
    ReportMeta meta;
};

namespace detail {

/// One experiment per output_dir at a time.
class LockFile {
public:
    explicit LockFile(const std::filesystem::path& dir) : path_(dir / ".lock") {
        std::filesystem::create_directories(dir);
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0)
            throw ConfigError("output directory is locked by another run: " + path_.string() +
                              " (remove the stale .lock if no run is active)");
        auto pid = std::to_string(::getpid());
        [[maybe_unused]] auto n = ::write(fd_, pid.data(), pid.size());
    }

    ~LockFile() {
        if (fd_ >= 0) {
            ::close(fd_);
            std::error_code ec;
            std::filesystem::remove(path_, ec);
        }
    }

    LockFile(const LockFile&) = delete;
    LockFile& operator=(const LockFile&) = delete;

private:
    std::filesystem::path path_;
    int fd_ = -1;
};

inline std::filesystem::path cache_file_for(const ExperimentConfig& cfg) {
    return std::filesystem::path(cfg.output_dir) / "cache" / slugify(cfg.provider.model) /
           (std::string(to_string(cfg.strategy.kind)) + ".jsonl");
}

inline std::unique_ptr<Provider> make_provider(const ExperimentConfig& cfg, const Dataset& dataset) {
    if (cfg.provider.kind == ProviderKind::mock)
        return std::make_unique<MockProvider>(cfg.mock, dataset);
    HttpOptions opts;
    opts.base_url = cfg.provider.base_url;
    if (opts.base_url.empty())
        throw ConfigError("provider.base_url is required for the http provider");
    const char* key = std::getenv(cfg.provider.api_key_env.c_str());
    if (!key || !*key)
        throw ConfigError("environment variable " + cfg.provider.api_key_env +
                          " is empty; cannot authenticate");
    opts.api_key = key;
    opts.max_retries = cfg.provider.max_retries;
    opts.backoff_ms = cfg.provider.backoff_ms;
    return std::make_unique<HttpProvider>(std::move(opts));
}

inline Dataset load_dataset(const ExperimentConfig& cfg, RunManifest& manifest) {
    auto ingested = ingest(cfg.dataset_path, cfg.format);
    for (const auto& rej : ingested.rejected)
        manifest.notes.push_back("rejected line " + std::to_string(rej.line) + ": " + rej.reason);
    for (const auto& v : validate(ingested.dataset))
        manifest.notes.push_back("dataset violation [" + v.record_id + "]: " + v.message);
    auto dataset = std::move(ingested.dataset);
    if (cfg.limit && dataset.records.size() > *cfg.limit)
        dataset.records.resize(*cfg.limit);
    return dataset;
}

struct PipelineState {
    std::vector<ScoredRecord> scored;
    std::size_t abstain_count = 0;
};

/// Parses, aggregates, and recalibrates the K raw replies of every
/// question. Missing (cache-miss) responses drop the whole question.
inline PipelineState score_responses(const ExperimentConfig& cfg, const Dataset& dataset,
                                     const std::vector<std::optional<RawResponse>>& responses,
                                     RunManifest& manifest) {
    PipelineState state;
    std::ofstream dump;
    if (!cfg.dump_parse_failures.empty()) {
        std::filesystem::create_directories(
            std::filesystem::path(cfg.dump_parse_failures).parent_path());
        dump.open(cfg.dump_parse_failures);
    }

    const auto k = static_cast<std::size_t>(cfg.k);
    for (std::size_t qi = 0; qi < dataset.records.size(); ++qi) {
        const auto& record = dataset.records[qi];
        QuestionOutcome outcome{record.id, QuestionStatus::ok, ""};

        std::vector<ElicitationResult> samples;
        bool cache_gap = false;
        for (std::size_t s = 0; s < k; ++s) {
            const auto& raw = responses[qi * k + s];
            if (!raw) {
                cache_gap = true;
                continue;
            }
            ++manifest.total_samples;
            try {
                samples.push_back(parse_response(raw->text, cfg.strategy, record));
            } catch (const UnparseableResponse& e) {
                ++manifest.unparseable_samples;
                if (dump.is_open()) {
                    nlohmann::ordered_json j{{"record_id", record.id},
                                             {"sample_index", s},
                                             {"text", e.raw_text()}};
                    dump << j.dump() << "\n";
                }
            }
        }

        if (cache_gap) {
            outcome.status = QuestionStatus::error;
            outcome.detail = "cache miss (partial scoring)";
            manifest.statuses.push_back(std::move(outcome));
            continue;
        }
        if (samples.empty()) {
            outcome.status = QuestionStatus::error;
            outcome.detail = "all samples unparseable";
            manifest.statuses.push_back(std::move(outcome));
            continue;
        }

        FinalEstimate estimate;
        estimate.record_id = record.id;
        try {
            if (cfg.aggregation == Aggregation::none) {
                const auto& s0 = samples.front();
                estimate.answer = s0.answer;
                estimate.confidence = s0.confidence;
            } else {
                char majority = majority_reference(samples);
                char reference =
                    cfg.reference == ReferencePolicy::gold ? record.gold : majority;
                estimate.answer = majority;
                estimate.confidence = cfg.aggregation == Aggregation::consistency
                                          ? consistency(samples, reference)
                                          : weighted_average(samples, reference);
            }
        } catch (const NoReferenceError&) {
            outcome.status = QuestionStatus::abstained;
            outcome.detail = "all samples abstained";
            ++state.abstain_count;
            manifest.statuses.push_back(std::move(outcome));
            continue;
        } catch (const DegenerateWeightsError& e) {
            outcome.status = QuestionStatus::error;
            outcome.detail = e.what();
            manifest.statuses.push_back(std::move(outcome));
            continue;
        }

        if (!estimate.answer) {
            outcome.status = QuestionStatus::abstained;
            outcome.detail = "no answer letter extracted";
            ++state.abstain_count;
            manifest.statuses.push_back(std::move(outcome));
            continue;
        }

        if (cfg.recalibrate) {
            auto scores = atypicality_scores(samples.front());
            estimate.calibrated_confidence = recalibrate(estimate.confidence, scores);
        }
        estimate.method = method_label(cfg);

        ScoredRecord scored;
        scored.record_id = record.id;
        scored.confidence = estimate.effective_confidence();
        scored.correct = *estimate.answer == record.gold;
        scored.atypicality = samples.front().atypicality_summary();
        scored.difficulty = samples.front().difficulty;
        state.scored.push_back(std::move(scored));
        manifest.statuses.push_back(std::move(outcome));
    }
    return state;
}

inline nlohmann::ordered_json manifest_to_json(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["version"] = m.version;
    j["build"] = m.build;
    j["config"] = m.config;
    std::size_t ok = 0, abstained = 0, error = 0;
    auto statuses = nlohmann::ordered_json::array();
    for (const auto& s : m.statuses) {
        if (s.status == QuestionStatus::ok) ++ok;
        else if (s.status == QuestionStatus::abstained) ++abstained;
        else ++error;
        nlohmann::ordered_json entry{{"id", s.id}, {"status", to_string(s.status)}};
        if (!s.detail.empty()) entry["detail"] = s.detail;
        statuses.push_back(std::move(entry));
    }
    j["status_counts"] = {{"ok", ok}, {"abstained", abstained}, {"error", error}};
    j["statuses"] = std::move(statuses);
    j["provider_calls"] = m.provider_calls;
    j["cache_hits"] = m.cache_hits;
    j["total_samples"] = m.total_samples;
    j["unparseable_samples"] = m.unparseable_samples;
    j["degraded"] = m.degraded;
    j["wall_seconds"] = m.wall_seconds;
    j["notes"] = m.notes;
    return j;
}

} // namespace detail

/// Writes manifest.json, report.json, and the per-run tables and figures
/// under the config's output_dir.
inline void write_outputs(const RunResult& result, const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    fs::path out(cfg.output_dir);
    auto report_json = report_to_json(result.report, result.meta);

    detail::write_text_file(out / "manifest.json",
                            detail::manifest_to_json(result.manifest).dump(2) + "\n");
    detail::write_text_file(out / "report.json", report_json.dump(2) + "\n");
    detail::write_text_file(out / "tables" / "metrics.csv", metrics_csv({report_json}));
    detail::write_text_file(out / "tables" / "reliability.csv", reliability_csv(report_json));
    detail::write_text_file(out / "figures" / "reliability.svg", reliability_svg(report_json));
    if (!report_json.at("atypicality").is_null()) {
        detail::write_text_file(out / "tables" / "atypicality_histogram.csv",
                                atypicality_histogram_csv(report_json));
        detail::write_text_file(out / "tables" / "accuracy_by_atypicality.csv",
                                atypicality_bins_csv(report_json, "accuracy"));
        detail::write_text_file(out / "tables" / "ece_by_atypicality.csv",
                                atypicality_bins_csv(report_json, "ece"));
        detail::write_text_file(out / "figures" / "atypicality_histogram.svg",
                                histogram_svg(report_json));
        if (report_json.at("atypicality").contains("difficulty_cross"))
            detail::write_text_file(out / "tables" / "difficulty_vs_atypicality.csv",
                                    difficulty_cross_csv(report_json));
    }
}

namespace detail {

inline RunResult execute(const ExperimentConfig& raw_cfg, bool cache_only) {
    auto cfg = finalize_config(raw_cfg);
    RunResult result;
    result.manifest.config = config_to_json(cfg);
    result.meta = report_meta(cfg);

    auto dataset = load_dataset(cfg, result.manifest);
    LockFile lock(cfg.output_dir);

    PromptLibrary prompts = cfg.template_dir.empty()
                                ? PromptLibrary{}
                                : PromptLibrary::with_overrides(cfg.template_dir);

    // provider auth is checked before any question is processed
    auto provider = cache_only ? nullptr : make_provider(cfg, dataset);
    bool deterministic = cache_only || cfg.provider.kind == ProviderKind::mock;
    Gateway gateway(std::move(provider), cache_file_for(cfg), cfg.provider.parallelism);

    if (cfg.strategy.kind == StrategyKind::cot)
        result.manifest.notes.push_back(
            "cot: the step-by-step instruction precedes the same response scaffold as vanilla");

    auto started = std::chrono::steady_clock::now();

    std::vector<Gateway::Item> items;
    items.reserve(dataset.records.size() * static_cast<std::size_t>(cfg.k));
    for (const auto& record : dataset.records) {
        auto prompt = prompts.render(record, cfg.strategy);
        for (int s = 0; s < cfg.k; ++s) {
            GenParams params{cfg.provider.model, *cfg.provider.temperature,
                             cfg.provider.max_tokens, s};
            items.push_back({prompt, params});
        }
    }
    auto responses = gateway.complete_all(items, cache_only && cfg.allow_partial);

    auto state = score_responses(cfg, dataset, responses, result.manifest);

    result.manifest.provider_calls = gateway.provider_calls();
    result.manifest.cache_hits = gateway.cache_hits();
    if (result.manifest.total_samples > 0) {
        double rate = static_cast<double>(result.manifest.unparseable_samples) /
                      static_cast<double>(result.manifest.total_samples);
        result.manifest.degraded = rate > cfg.max_unparseable_rate;
    }
    if (!deterministic) {
        result.manifest.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }

    if (!state.scored.empty())
        result.report = compute_report(state.scored, state.abstain_count, cfg.num_bins);
    result.scored = std::move(state.scored);

    write_outputs(result, cfg);
    return result;
}

} // namespace detail

/// Full pipeline: render -> complete -> parse -> aggregate -> recalibrate ->
/// metrics, with every raw response cached under output_dir/cache.
inline RunResult run(const ExperimentConfig& cfg) { return detail::execute(cfg, false); }

/// Re-analysis from the cache alone; never contacts a provider. Missing
/// request keys abort with their list unless cfg.allow_partial is set.
inline RunResult score(const ExperimentConfig& cfg) { return detail::execute(cfg, true); }

/// Cross-run comparison artifacts: the methods x metrics table, ECE bar
/// data, and per-method reliability curves (CSV + SVG). Reports from mixed
/// datasets are refused unless forced.
inline void compare_reports(const std::vector<std::filesystem::path>& report_paths,
                            const std::filesystem::path& out_dir, bool force = false) {
    if (report_paths.empty()) throw ConfigError("report comparison needs at least one report");
    std::vector<nlohmann::ordered_json> reports;
    for (const auto& path : report_paths) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open report: " + path.string());
        reports.push_back(nlohmann::ordered_json::parse(in));
    }
    for (const auto& r : reports) {
        if (r.at("dataset") != reports.front().at("dataset") && !force)
            throw ConfigError("reports mix datasets (" +
                              reports.front().at("dataset").get<std::string>() + " vs " +
                              r.at("dataset").get<std::string>() + "); pass --force to override");
    }
    detail::write_text_file(out_dir / "tables" / "metrics.csv", metrics_csv(reports));
    detail::write_text_file(out_dir / "tables" / "ece_by_method.csv", ece_by_method_csv(reports));
    std::vector<std::string> omitted;
    for (const auto& r : reports) {
        auto method = r.at("method").get<std::string>();
        auto slug = detail::slugify(method);
        detail::write_text_file(out_dir / "tables" / ("reliability_" + slug + ".csv"),
                                reliability_csv(r));
        detail::write_text_file(out_dir / "figures" / ("reliability_" + slug + ".svg"),
                                reliability_svg(r));
        if (!r.at("atypicality").is_null()) {
            detail::write_text_file(out_dir / "tables" / ("atypicality_histogram_" + slug + ".csv"),
                                    atypicality_histogram_csv(r));
            detail::write_text_file(out_dir / "tables" / ("accuracy_by_atypicality_" + slug + ".csv"),
                                    atypicality_bins_csv(r, "accuracy"));
            detail::write_text_file(out_dir / "tables" / ("ece_by_atypicality_" + slug + ".csv"),
                                    atypicality_bins_csv(r, "ece"));
            detail::write_text_file(out_dir / "figures" / ("atypicality_histogram_" + slug + ".svg"),
                                    histogram_svg(r));
        } else {
            omitted.push_back(method + ": no atypicality data, histogram and bin tables omitted");
        }
    }
    nlohmann::ordered_json manifest;
    manifest["schema_version"] = 1;
    auto inputs = nlohmann::ordered_json::array();
    for (const auto& path : report_paths) inputs.push_back(path.string());
    manifest["reports"] = std::move(inputs);
    manifest["omitted"] = omitted;
    detail::write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

/// The six-method grid of the standard comparison table, derived from a
/// base config. Each entry runs into its own subdirectory of the base
/// output_dir.
inline std::vector<ExperimentConfig> table2_suite(const ExperimentConfig& base) {
    std::vector<ExperimentConfig> out;
    auto derive = [&](StrategyKind kind, Aggregation agg, bool recal, int k,
                      const char* slug) {
        ExperimentConfig cfg = base;
        cfg.strategy = Strategy{kind, false};
        cfg.aggregation = agg;
        cfg.recalibrate = recal;
        cfg.k = k;
        cfg.provider.temperature = base.provider.temperature; // per-method auto default
        cfg.output_dir = (std::filesystem::path(base.output_dir) / slug).string();
        out.push_back(std::move(cfg));
    };
    derive(StrategyKind::vanilla, Aggregation::none, false, 1, "vanilla");
    derive(StrategyKind::cot, Aggregation::none, false, 1, "cot");
    derive(StrategyKind::atypical_scenario, Aggregation::none, true, 1, "atypical_scenario");
    derive(StrategyKind::atypical_presentations, Aggregation::none, true, 1,
           "atypical_presentations");
    derive(StrategyKind::vanilla, Aggregation::consistency, false, 3, "consistency_k3");
    derive(StrategyKind::vanilla, Aggregation::weighted_average, false, 3, "average_k3");
    return out;
}

/// Runs the whole suite and emits the comparison table into the base
/// output_dir. Returns the per-method results in suite order.
inline std::vector<RunResult> run_table2_suite(const ExperimentConfig& base) {
    auto configs = table2_suite(base);
    std::vector<RunResult> results;
    std::vector<std::filesystem::path> report_paths;
    for (const auto& cfg : configs) {
        results.push_back(run(cfg));
        report_paths.push_back(std::filesystem::path(cfg.output_dir) / "report.json");
    }
    compare_reports(report_paths, base.output_dir);
    return results;
}

} // namespace vconf
