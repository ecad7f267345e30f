#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vconf {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration: unknown keys, invalid combinations, missing credentials.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Dataset ingestion failed entirely (missing file, zero valid records).
class IngestError : public Error {
public:
    using Error::Error;
};

/// Provider transport failed after all retries.
class DeliveryError : public Error {
public:
    using Error::Error;
};

/// A reply carried neither an answer nor a confidence; the raw text is kept
/// so the caller can decide between retry and exclusion.
class UnparseableResponse : public Error {
public:
    UnparseableResponse(std::string message, std::string raw_text)
        : Error(std::move(message)), raw_text_(std::move(raw_text)) {}

    const std::string& raw_text() const noexcept { return raw_text_; }

private:
    std::string raw_text_;
};

/// Aggregation over a sample set with no usable answers.
class NoReferenceError : public Error {
public:
    using Error::Error;
};

/// Weighted average with an all-zero weight vector.
class DegenerateWeightsError : public Error {
public:
    using Error::Error;
};

/// Metric requested on an input where it is undefined (empty set,
/// single-class AUROC, no atypicality scores).
class MetricError : public Error {
public:
    using Error::Error;
};

/// Re-scoring found request keys absent from the cache.
class CacheMissError : public Error {
public:
    CacheMissError(std::string message, std::vector<std::string> missing)
        : Error(std::move(message)), missing_keys_(std::move(missing)) {}

    const std::vector<std::string>& missing_keys() const noexcept { return missing_keys_; }

private:
    std::vector<std::string> missing_keys_;
};

} // namespace vconf
