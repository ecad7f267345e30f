// vconf command-line front end: validate-dataset, run, score, report.
// Exit codes: 0 ok, 1 fatal config/IO error, 2 degraded run.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "vconf/vconf.hpp"

namespace {

struct ConfigOverrides {
    std::optional<std::string> dataset_path, dataset_format;
    std::optional<std::size_t> dataset_limit;
    std::optional<std::string> strategy_kind;
    std::optional<bool> strategy_include_difficulty;
    std::optional<int> sampling_k;
    std::optional<std::string> sampling_aggregation, sampling_reference;
    std::optional<bool> sampling_recalibrate;
    std::optional<std::string> provider_kind, provider_model, provider_base_url;
    std::optional<std::string> provider_api_key_env;
    std::optional<double> provider_temperature;
    std::optional<int> provider_max_tokens, provider_parallelism, provider_max_retries,
        provider_backoff_ms;
    std::optional<std::uint64_t> mock_seed;
    std::optional<double> mock_accuracy, mock_confidence_mean, mock_confidence_spread;
    std::optional<std::string> mock_atypicality_shape;
    std::optional<double> mock_atypicality_value, mock_format_noise_rate;
    std::optional<int> report_num_bins;
    std::optional<std::uint64_t> run_seed;
    std::optional<std::string> run_output_dir, run_template_dir, run_dump_parse_failures;
    std::optional<double> run_max_unparseable_rate;
};

// Every CLI flag mirrors a config-file key ([section] key <-> --section.key);
// flags win over the file.
void add_config_options(CLI::App* cmd, std::string& config_path, ConfigOverrides& ov) {
    cmd->add_option("--config", config_path, "experiment config file (sectioned key=value)");
    cmd->add_option("--dataset.path", ov.dataset_path, "dataset file (JSONL)");
    cmd->add_option("--dataset.format", ov.dataset_format, "medqa|medmcqa|pubmedqa|custom");
    cmd->add_option("--dataset.limit", ov.dataset_limit, "max questions to process");
    cmd->add_option("--strategy.kind", ov.strategy_kind,
                    "vanilla|cot|atypical_scenario|atypical_presentations");
    cmd->add_option("--strategy.include_difficulty", ov.strategy_include_difficulty,
                    "also elicit a 1-10 difficulty score (atypical strategies only)");
    cmd->add_option("--sampling.k", ov.sampling_k, "samples per question (0 = auto)");
    cmd->add_option("--sampling.aggregation", ov.sampling_aggregation,
                    "none|consistency|weighted_average");
    cmd->add_option("--sampling.reference", ov.sampling_reference,
                    "majority|gold (gold leaks labels; reproduction only)");
    cmd->add_option("--sampling.recalibrate", ov.sampling_recalibrate,
                    "apply atypicality recalibration");
    cmd->add_option("--provider.kind", ov.provider_kind, "mock|http");
    cmd->add_option("--provider.model", ov.provider_model, "model name");
    cmd->add_option("--provider.base_url", ov.provider_base_url,
                    "chat-completions base URL, e.g. https://api.openai.com/v1");
    cmd->add_option("--provider.api_key_env", ov.provider_api_key_env,
                    "env var holding the API key");
    cmd->add_option("--provider.temperature", ov.provider_temperature, "sampling temperature");
    cmd->add_option("--provider.max_tokens", ov.provider_max_tokens, "completion token budget");
    cmd->add_option("--provider.parallelism", ov.provider_parallelism, "max in-flight requests");
    cmd->add_option("--provider.max_retries", ov.provider_max_retries, "transport retries");
    cmd->add_option("--provider.backoff_ms", ov.provider_backoff_ms, "initial retry backoff");
    cmd->add_option("--mock.seed", ov.mock_seed, "mock model seed (defaults to run.seed)");
    cmd->add_option("--mock.accuracy", ov.mock_accuracy, "mock P(correct answer)");
    cmd->add_option("--mock.confidence_mean", ov.mock_confidence_mean, "mock confidence center");
    cmd->add_option("--mock.confidence_spread", ov.mock_confidence_spread,
                    "mock confidence half-width");
    cmd->add_option("--mock.atypicality_shape", ov.mock_atypicality_shape,
                    "right_skewed|uniform|fixed");
    cmd->add_option("--mock.atypicality_value", ov.mock_atypicality_value,
                    "score emitted by the fixed shape");
    cmd->add_option("--mock.format_noise_rate", ov.mock_format_noise_rate,
                    "P(perturbed reply scaffold)");
    cmd->add_option("--report.num_bins", ov.report_num_bins, "bins for ECE and the analyses");
    cmd->add_option("--run.seed", ov.run_seed, "experiment seed");
    cmd->add_option("--run.output_dir", ov.run_output_dir, "artifact directory");
    cmd->add_option("--run.template_dir", ov.run_template_dir, "prompt template override dir");
    cmd->add_option("--run.max_unparseable_rate", ov.run_max_unparseable_rate,
                    "degraded-run threshold");
    cmd->add_option("--run.dump_parse_failures", ov.run_dump_parse_failures,
                    "write unparseable raw replies to this JSONL file");
}

vconf::ExperimentConfig build_config(const std::string& config_path, const ConfigOverrides& ov) {
    vconf::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = vconf::load_config(config_path);

    if (ov.dataset_path) cfg.dataset_path = *ov.dataset_path;
    if (ov.dataset_format) cfg.format = vconf::dataset_format_from_string(*ov.dataset_format);
    if (ov.dataset_limit) cfg.limit = *ov.dataset_limit;
    if (ov.strategy_kind) cfg.strategy.kind = vconf::strategy_kind_from_string(*ov.strategy_kind);
    if (ov.strategy_include_difficulty)
        cfg.strategy.include_difficulty = *ov.strategy_include_difficulty;
    if (ov.sampling_k) cfg.k = *ov.sampling_k;
    if (ov.sampling_aggregation)
        cfg.aggregation = vconf::aggregation_from_string(*ov.sampling_aggregation);
    if (ov.sampling_reference)
        cfg.reference = vconf::reference_policy_from_string(*ov.sampling_reference);
    if (ov.sampling_recalibrate) cfg.recalibrate = *ov.sampling_recalibrate;
    if (ov.provider_kind) cfg.provider.kind = vconf::provider_kind_from_string(*ov.provider_kind);
    if (ov.provider_model) cfg.provider.model = *ov.provider_model;
    if (ov.provider_base_url) cfg.provider.base_url = *ov.provider_base_url;
    if (ov.provider_api_key_env) cfg.provider.api_key_env = *ov.provider_api_key_env;
    if (ov.provider_temperature) cfg.provider.temperature = *ov.provider_temperature;
    if (ov.provider_max_tokens) cfg.provider.max_tokens = *ov.provider_max_tokens;
    if (ov.provider_parallelism) cfg.provider.parallelism = *ov.provider_parallelism;
    if (ov.provider_max_retries) cfg.provider.max_retries = *ov.provider_max_retries;
    if (ov.provider_backoff_ms) cfg.provider.backoff_ms = *ov.provider_backoff_ms;
    if (ov.mock_seed) cfg.mock.seed = *ov.mock_seed;
    if (ov.mock_accuracy) cfg.mock.accuracy = *ov.mock_accuracy;
    if (ov.mock_confidence_mean) cfg.mock.confidence_mean = *ov.mock_confidence_mean;
    if (ov.mock_confidence_spread) cfg.mock.confidence_spread = *ov.mock_confidence_spread;
    if (ov.mock_atypicality_shape)
        cfg.mock.atypicality_shape = vconf::atypicality_shape_from_string(*ov.mock_atypicality_shape);
    if (ov.mock_atypicality_value) cfg.mock.atypicality_value = *ov.mock_atypicality_value;
    if (ov.mock_format_noise_rate) cfg.mock.format_noise_rate = *ov.mock_format_noise_rate;
    if (ov.report_num_bins) cfg.num_bins = *ov.report_num_bins;
    if (ov.run_seed) cfg.seed = *ov.run_seed;
    if (ov.run_output_dir) cfg.output_dir = *ov.run_output_dir;
    if (ov.run_template_dir) cfg.template_dir = *ov.run_template_dir;
    if (ov.run_max_unparseable_rate) cfg.max_unparseable_rate = *ov.run_max_unparseable_rate;
    if (ov.run_dump_parse_failures) cfg.dump_parse_failures = *ov.run_dump_parse_failures;
    return cfg;
}

void print_summary(const vconf::RunResult& result) {
    const auto& m = result.manifest;
    std::printf("method: %s\n", result.meta.method.c_str());
    if (result.report) {
        const auto& r = *result.report;
        std::printf("n=%zu abstained=%zu acc=%.4f ece=%.4f brier=%.4f", r.n, r.abstain_count,
                    r.accuracy, r.ece, r.brier);
        if (r.auroc) std::printf(" auroc=%.4f", *r.auroc);
        std::printf("\n");
    } else {
        std::printf("no scored records\n");
    }
    std::printf("provider_calls=%zu cache_hits=%zu unparseable=%zu/%zu%s\n", m.provider_calls,
                m.cache_hits, m.unparseable_samples, m.total_samples,
                m.degraded ? " [DEGRADED]" : "");
}

int run_command(const std::string& config_path, const ConfigOverrides& ov, bool suite_table2) {
    auto cfg = build_config(config_path, ov);
    if (suite_table2) {
        auto results = vconf::run_table2_suite(cfg);
        bool degraded = false;
        for (const auto& r : results) {
            print_summary(r);
            degraded = degraded || r.manifest.degraded;
        }
        std::printf("comparison table: %s\n",
                    (std::filesystem::path(cfg.output_dir) / "tables" / "metrics.csv").c_str());
        return degraded ? 2 : 0;
    }
    auto result = vconf::run(cfg);
    print_summary(result);
    std::printf("outputs: %s\n", cfg.output_dir.c_str());
    return result.manifest.degraded ? 2 : 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"black-box LLM confidence elicitation and recalibration toolkit"};
    app.require_subcommand(1);

    // validate-dataset
    std::string vd_path, vd_format = "custom", vd_normalize;
    auto* vd = app.add_subcommand("validate-dataset", "ingest a dataset and report violations");
    vd->add_option("--path", vd_path, "dataset file (JSONL)")->required();
    vd->add_option("--format", vd_format, "medqa|medmcqa|pubmedqa|custom");
    vd->add_option("--normalize", vd_normalize, "write the normalized JSONL here");

    // run
    std::string run_config;
    ConfigOverrides run_ov;
    std::string run_suite;
    auto* run_cmd = app.add_subcommand("run", "run an experiment end to end");
    add_config_options(run_cmd, run_config, run_ov);
    run_cmd->add_option("--suite", run_suite, "run a method grid: table2");

    // score
    std::string score_config;
    ConfigOverrides score_ov;
    bool allow_partial = false;
    auto* score_cmd = app.add_subcommand("score", "re-analyze from the response cache");
    add_config_options(score_cmd, score_config, score_ov);
    score_cmd->add_flag("--allow-partial", allow_partial,
                        "skip questions whose responses are missing from the cache");

    // report
    std::vector<std::string> report_paths;
    std::string report_out = "report_out";
    bool report_force = false;
    auto* report_cmd = app.add_subcommand("report", "comparison table and figures from report.json files");
    report_cmd->add_option("reports", report_paths, "report.json paths")->required();
    report_cmd->add_option("--out", report_out, "output directory");
    report_cmd->add_flag("--force", report_force, "allow mixing datasets in one table");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*vd) {
            auto result = vconf::ingest(vd_path, vconf::dataset_format_from_string(vd_format));
            auto violations = vconf::validate(result.dataset);
            for (const auto& rej : result.rejected)
                std::fprintf(stderr, "rejected line %zu: %s\n", rej.line, rej.reason.c_str());
            for (const auto& v : violations)
                std::fprintf(stderr, "violation [%s]: %s\n", v.record_id.c_str(),
                             v.message.c_str());
            if (!vd_normalize.empty()) vconf::write_normalized(result.dataset, vd_normalize);
            std::printf("%zu records, %zu rejected lines, %zu violations\n",
                        result.dataset.records.size(), result.rejected.size(), violations.size());
            return (result.rejected.empty() && violations.empty()) ? 0 : 1;
        }
        if (*run_cmd) {
            if (!run_suite.empty() && run_suite != "table2")
                throw vconf::ConfigError("unknown suite '" + run_suite + "' (expected table2)");
            return run_command(run_config, run_ov, run_suite == "table2");
        }
        if (*score_cmd) {
            auto cfg = build_config(score_config, score_ov);
            cfg.allow_partial = allow_partial;
            auto result = vconf::score(cfg);
            print_summary(result);
            return result.manifest.degraded ? 2 : 0;
        }
        if (*report_cmd) {
            std::vector<std::filesystem::path> paths(report_paths.begin(), report_paths.end());
            vconf::compare_reports(paths, report_out, report_force);
            std::printf("comparison written to %s\n", report_out.c_str());
            return 0;
        }
    } catch (const vconf::CacheMissError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        for (const auto& key : e.missing_keys()) std::fprintf(stderr, "  missing: %s\n", key.c_str());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
