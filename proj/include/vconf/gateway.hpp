#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "vconf/detail/hash.hpp"
#include "vconf/detail/rng.hpp"
#include "vconf/errors.hpp"
#include "vconf/prompt.hpp"

namespace vconf {

enum class ProviderKind { http, mock };

inline const char* to_string(ProviderKind k) {
    return k == ProviderKind::http ? "http" : "mock";
}

inline ProviderKind provider_kind_from_string(std::string_view s) {
    if (s == "http") return ProviderKind::http;
    if (s == "mock") return ProviderKind::mock;
    throw ConfigError("unknown provider kind '" + std::string(s) + "' (expected http|mock)");
}

struct GenParams {
    std::string model;
    double temperature = 0.0;
    int max_tokens = 1024;
    int sample_index = 0; // k-th self-random draw
};

struct RawResponse {
    std::string text;
    std::string request_key;
    std::int64_t timestamp = 0;
    ProviderKind provider = ProviderKind::mock;
    bool from_cache = false;
};

/// Content key of one request; a pure function of the prompt text, model,
/// temperature, and sample index.
inline std::string request_key(std::string_view prompt_text, const GenParams& params) {
    char temp[40];
    std::snprintf(temp, sizeof(temp), "%.17g", params.temperature);
    std::string canonical;
    canonical.reserve(prompt_text.size() + 64);
    canonical.append(prompt_text);
    canonical.push_back('\x1f');
    canonical.append(params.model);
    canonical.push_back('\x1f');
    canonical.append(temp);
    canonical.push_back('\x1f');
    canonical.append(std::to_string(params.sample_index));
    return detail::sha256_hex(canonical);
}

struct CacheEntry {
    std::string request_key;
    std::string prompt_sha;
    std::string model;
    double temperature = 0.0;
    int max_tokens = 0;
    int sample_index = 0;
    std::string text;
    std::int64_t timestamp = 0;
};

/// Append-only JSONL response cache with an in-memory index built at load.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path file) : file_(std::move(file)) {
        std::filesystem::create_directories(file_.parent_path());
        std::ifstream in(file_);
        if (!in) return;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            try {
                auto j = nlohmann::json::parse(line);
                index_[j.at("request_key").get<std::string>()] = {
                    j.at("text").get<std::string>(), j.at("timestamp").get<std::int64_t>()};
            } catch (const std::exception&) {
                // a torn trailing line from an interrupted run is re-fetched
            }
        }
    }

    std::optional<std::pair<std::string, std::int64_t>> lookup(const std::string& key) const {
        std::lock_guard lock(mutex_);
        auto it = index_.find(key);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    void append(const CacheEntry& entry) {
        std::lock_guard lock(mutex_);
        nlohmann::ordered_json j;
        j["request_key"] = entry.request_key;
        j["prompt_sha"] = entry.prompt_sha;
        j["model"] = entry.model;
        j["params"] = {{"temperature", entry.temperature},
                       {"max_tokens", entry.max_tokens},
                       {"sample_index", entry.sample_index}};
        j["text"] = entry.text;
        j["timestamp"] = entry.timestamp;
        std::ofstream out(file_, std::ios::app);
        if (!out) throw DeliveryError("cannot append to cache file: " + file_.string());
        out << j.dump() << "\n";
        index_[entry.request_key] = {entry.text, entry.timestamp};
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return index_.size();
    }

    const std::filesystem::path& path() const { return file_; }

private:
    std::filesystem::path file_;
    mutable std::mutex mutex_;
    std::map<std::string, std::pair<std::string, std::int64_t>> index_;
};

class Provider {
public:
    virtual ~Provider() = default;
    virtual std::string generate(const PromptText& prompt, const GenParams& params) = 0;
    virtual ProviderKind kind() const = 0;
    /// Wall clock for cache entries; the mock pins this to 0 so cache bytes
    /// are run-independent.
    virtual std::int64_t now() const {
        return std::chrono::duration_cast<std::chrono::seconds>(
                   std::chrono::system_clock::now().time_since_epoch())
            .count();
    }
};

struct HttpOptions {
    std::string base_url;    // e.g. https://api.example.com/v1
    std::string api_key;
    int max_retries = 5;
    int backoff_ms = 500;    // doubled per retry, with jitter
    int timeout_seconds = 120;
};

namespace detail {

struct SplitUrl {
    std::string host; // scheme://host[:port]
    std::string path_prefix;
};

inline SplitUrl split_base_url(const std::string& base_url) {
    auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("base_url must include a scheme: " + base_url);
    auto path_start = base_url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {base_url, ""};
    auto prefix = base_url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base_url.substr(0, path_start), prefix};
}

} // namespace detail

/// Chat-completions-style JSON over HTTP(S) against a configurable base
/// URL. Retries transport failures, 429 and 5xx with jittered exponential
/// backoff; other 4xx are configuration errors and never retried.
class HttpProvider : public Provider {
public:
    explicit HttpProvider(HttpOptions options) : options_(std::move(options)) {
        if (options_.api_key.empty())
            throw ConfigError("http provider needs an API key (set the configured env var)");
        auto split = detail::split_base_url(options_.base_url);
        host_ = split.host;
        endpoint_ = split.path_prefix + "/chat/completions";
    }

    std::string generate(const PromptText& prompt, const GenParams& params) override;

    ProviderKind kind() const override { return ProviderKind::http; }

private:
    HttpOptions options_;
    std::string host_;
    std::string endpoint_;
};

/// Delivers prompts through a provider with a resumable on-disk cache.
/// Batch completion issues provider calls concurrently up to a bound, but
/// cache appends and returned responses always follow input order, so cache
/// bytes are independent of arrival order.
class Gateway {
public:
    Gateway(std::unique_ptr<Provider> provider, std::filesystem::path cache_file, int parallelism = 1)
        : provider_(std::move(provider)),
          cache_(std::move(cache_file)),
          parallelism_(parallelism < 1 ? 1 : parallelism) {}

    RawResponse complete(const PromptText& prompt, const GenParams& params) {
        auto key = request_key(prompt.text, params);
        if (auto hit = cache_.lookup(key)) {
            ++cache_hits_;
            return RawResponse{hit->first, key, hit->second, provider_kind(), true};
        }
        if (!provider_)
            throw CacheMissError("request key missing from cache and no provider configured", {key});
        auto text = provider_->generate(prompt, params);
        ++provider_calls_;
        CacheEntry entry{key, detail::sha256_hex(prompt.text), params.model, params.temperature,
                         params.max_tokens, params.sample_index, text, provider_->now()};
        cache_.append(entry);
        return RawResponse{std::move(text), key, entry.timestamp, provider_kind(), false};
    }

    struct Item {
        PromptText prompt;
        GenParams params;
    };

    /// Completes a batch in input order. With allow_missing (cache-only
    /// scoring), absent keys yield nullopt instead of throwing.
    std::vector<std::optional<RawResponse>> complete_all(const std::vector<Item>& items,
                                                         bool allow_missing = false) {
        std::vector<std::optional<RawResponse>> out(items.size());
        std::vector<std::string> keys(items.size());
        for (std::size_t i = 0; i < items.size(); ++i)
            keys[i] = request_key(items[i].prompt.text, items[i].params);

        if (!provider_) {
            std::vector<std::string> missing;
            for (std::size_t i = 0; i < items.size(); ++i)
                if (!cache_.lookup(keys[i]) &&
                    std::find(missing.begin(), missing.end(), keys[i]) == missing.end())
                    missing.push_back(keys[i]);
            if (!missing.empty() && !allow_missing)
                throw CacheMissError(std::to_string(missing.size()) +
                                         " request keys missing from cache " + cache_.path().string(),
                                     missing);
            for (std::size_t i = 0; i < items.size(); ++i) {
                if (auto hit = cache_.lookup(keys[i])) {
                    ++cache_hits_;
                    out[i] = RawResponse{hit->first, keys[i], hit->second, ProviderKind::mock, true};
                }
            }
            return out;
        }

        // chunked: dispatch up to `parallelism_` calls, then append results
        // in input order before moving on (keeps interrupted runs resumable)
        const std::size_t chunk = static_cast<std::size_t>(parallelism_) * 4;
        std::size_t begin = 0;
        while (begin < items.size()) {
            std::size_t end = std::min(items.size(), begin + chunk);

            // first occurrence of each un-cached key in this chunk
            std::vector<std::size_t> to_fetch;
            for (std::size_t i = begin; i < end; ++i) {
                if (cache_.lookup(keys[i])) continue;
                bool dup = false;
                for (auto f : to_fetch)
                    if (keys[f] == keys[i]) { dup = true; break; }
                if (!dup) to_fetch.push_back(i);
            }

            std::map<std::string, std::string> fetched;
            if (!to_fetch.empty()) {
                std::mutex m;
                std::exception_ptr first_error;
                std::atomic<std::size_t> cursor{0};
                auto worker = [&] {
                    while (true) {
                        std::size_t slot = cursor.fetch_add(1);
                        if (slot >= to_fetch.size()) return;
                        std::size_t i = to_fetch[slot];
                        try {
                            auto text = provider_->generate(items[i].prompt, items[i].params);
                            std::lock_guard lock(m);
                            fetched[keys[i]] = std::move(text);
                        } catch (...) {
                            std::lock_guard lock(m);
                            if (!first_error) first_error = std::current_exception();
                        }
                    }
                };
                std::size_t n_threads = std::min<std::size_t>(parallelism_, to_fetch.size());
                std::vector<std::thread> threads;
                for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
                for (auto& t : threads) t.join();
                if (first_error) std::rethrow_exception(first_error);
                provider_calls_ += to_fetch.size();
            }

            for (std::size_t i = begin; i < end; ++i) {
                if (auto hit = cache_.lookup(keys[i])) {
                    ++cache_hits_;
                    out[i] = RawResponse{hit->first, keys[i], hit->second, provider_kind(), true};
                    continue;
                }
                auto& text = fetched.at(keys[i]);
                CacheEntry entry{keys[i],
                                 detail::sha256_hex(items[i].prompt.text),
                                 items[i].params.model,
                                 items[i].params.temperature,
                                 items[i].params.max_tokens,
                                 items[i].params.sample_index,
                                 text,
                                 provider_->now()};
                cache_.append(entry);
                out[i] = RawResponse{text, keys[i], entry.timestamp, provider_kind(), false};
            }
            begin = end;
        }
        return out;
    }

    std::size_t provider_calls() const { return provider_calls_; }
    std::size_t cache_hits() const { return cache_hits_; }
    const ResponseCache& cache() const { return cache_; }

private:
    ProviderKind provider_kind() const {
        return provider_ ? provider_->kind() : ProviderKind::mock;
    }

    std::unique_ptr<Provider> provider_;
    ResponseCache cache_;
    int parallelism_;
    std::atomic<std::size_t> provider_calls_{0};
    std::atomic<std::size_t> cache_hits_{0};
};

} // namespace vconf

// HttpProvider::generate lives here so translation units that never touch
// HTTP still compile without pulling in httplib.
#ifndef VCONF_NO_HTTP
#include <httplib.h>

namespace vconf {

inline std::string HttpProvider::generate(const PromptText& prompt, const GenParams& params) {
    nlohmann::json body;
    body["model"] = params.model;
    body["temperature"] = params.temperature;
    body["max_tokens"] = params.max_tokens;
    body["messages"] = nlohmann::json::array({
        nlohmann::json{{"role", "user"}, {"content", prompt.text}},
    });
    auto payload = body.dump();

    httplib::Headers headers{{"Authorization", "Bearer " + options_.api_key}};
    std::string last_error;
    detail::SplitMix64 jitter(detail::sha256_seed(request_key(prompt.text, params)));

    for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
        if (attempt > 0) {
            auto backoff = static_cast<std::uint64_t>(options_.backoff_ms) << (attempt - 1);
            backoff += jitter.below(static_cast<std::uint64_t>(options_.backoff_ms) + 1);
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
        }
        httplib::Client client(host_);
        client.set_connection_timeout(options_.timeout_seconds, 0);
        client.set_read_timeout(options_.timeout_seconds, 0);
        auto res = client.Post(endpoint_, headers, payload, "application/json");
        if (!res) {
            last_error = "transport failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "status " + std::to_string(res->status);
            continue;
        }
        if (res->status >= 400)
            throw ConfigError("provider rejected request with status " +
                              std::to_string(res->status) + ": " + res->body);
        try {
            auto j = nlohmann::json::parse(res->body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const std::exception& e) {
            last_error = std::string("malformed completion body: ") + e.what();
            continue;
        }
    }
    throw DeliveryError("request failed after " + std::to_string(options_.max_retries) +
                        " retries (" + last_error + ")");
}

} // namespace vconf
#endif // VCONF_NO_HTTP
