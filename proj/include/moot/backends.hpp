#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "moot/rng.hpp"
#include "moot/table.hpp"

namespace moot {

/// What a backend needs to know about one x column to turn reply text into
/// a usable row.
struct ColumnSchema {
    std::string name;
    Kind kind = Kind::numeric;
    double lo = 0.0;
    double hi = 0.0;
    std::vector<std::string> levels;  // sorted
    std::string modal;                // most frequent level, for unseen symbols
};

/// Schema of the table's x columns, in column order.
std::vector<ColumnSchema> schema_of(const Table& table);

struct SynthesisRequest {
    std::string system;
    std::string human;
    std::string task;
    std::vector<ColumnSchema> schema;
    std::uint64_t seed = 0;  // per-call stream for stochastic backends
};

/// A candidate x vector proposed by a backend. Goal values are never part
/// of it.
struct SyntheticRow {
    std::vector<Cell> x;

    friend bool operator==(const SyntheticRow&, const SyntheticRow&) = default;
};

enum class BackendErrorKind {
    transport,     // connection or timeout failure
    http_status,   // non-2xx response
    bad_response,  // body is not a chat-completion reply
    no_table_row,  // reply contains no markdown table data row
    cell_count,    // row width differs from the schema
    bad_cell,      // numeric cell did not parse
    bad_prompt,    // a surrogate could not read back its own prompt
    cache_io,      // cache directory unusable
};

std::string_view to_string(BackendErrorKind kind);

class BackendError : public std::runtime_error {
public:
    BackendError(BackendErrorKind kind, const std::string& message, std::string raw = {})
        : std::runtime_error(message), kind_(kind), raw_(std::move(raw)) {}

    BackendErrorKind kind() const { return kind_; }
    /// The raw reply (or response body) that caused the failure.
    const std::string& raw() const { return raw_; }

private:
    BackendErrorKind kind_;
    std::string raw_;
};

/// Proposes one synthetic x row for a rendered prompt. Implementations must
/// be callable concurrently and must not carry context between calls.
class SynthesisBackend {
public:
    virtual ~SynthesisBackend() = default;
    virtual SyntheticRow synthesize(const SynthesisRequest& request) = 0;
};

/// Clamps numeric cells into [lo, hi] and replaces unseen symbols with the
/// modal level.
SyntheticRow conform(SyntheticRow row, const std::vector<ColumnSchema>& schema);

/// Parses one cell against its column schema. Throws BackendError(bad_cell).
Cell parse_cell(std::string_view text, const ColumnSchema& col);

/// Extracts the first markdown table data row of a reply (skipping an echoed
/// header) and parses it against the schema. A leading Best/Rest/Better tag
/// cell is tolerated. The result is conformed.
SyntheticRow parse_reply(std::string_view reply, const std::vector<ColumnSchema>& schema);

/// Offline stand-in for the LLM: reads the Best rows back out of the human
/// message and proposes their mean (numeric, plus Gaussian jitter of
/// `jitter_fraction` of the column range) or mode (symbolic).
class SurrogateBackend final : public SynthesisBackend {
public:
    explicit SurrogateBackend(double jitter_fraction = 0.05) : jitter_fraction_(jitter_fraction) {}
    SyntheticRow synthesize(const SynthesisRequest& request) override;

private:
    double jitter_fraction_;
};

SyntheticRow surrogate_synthesize(const SynthesisRequest& request, Rng& rng, double jitter_fraction = 0.05);

/// Digest-named files, one raw reply per file.
class ResponseCache {
public:
    /// Creates the directory if needed. Throws BackendError(cache_io) when it
    /// cannot be created or written.
    explicit ResponseCache(std::filesystem::path dir);

    /// Hex SHA-256 over the model name and the full prompt text.
    static std::string key(std::string_view model, std::string_view prompt);

    std::optional<std::string> get(const std::string& digest) const;

    /// Writes through a temporary file and an atomic rename, so concurrent
    /// writers of the same key are idempotent.
    void put(const std::string& digest, std::string_view reply) const;

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
};

struct BackendConfig {
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string model = "gemini-1.5-pro";
    std::string api_key_env = "MOOT_API_KEY";
    double timeout_seconds = 120.0;
    int max_retries = 2;            // transport failures, 429 and 5xx
    double retry_backoff_seconds = 1.0;  // doubled after each retry
    std::filesystem::path cache_dir = ".moot-cache";
    double temperature = 1.0;
    std::optional<int> max_tokens;
};

struct HttpReply {
    int status = 0;
    std::string body;
    std::string error;  // transport failure; empty on success
};

struct HttpPost {
    std::string url;
    std::string body;
    std::vector<std::pair<std::string, std::string>> headers;
    double timeout_seconds = 60.0;
};

using Transport = std::function<HttpReply(const HttpPost&)>;

/// POST over HTTP or HTTPS.
Transport http_transport();

/// The full prompt text a chat request carries: the system message and the
/// user message (human message followed by the task).
std::string prompt_text(const SynthesisRequest& request);

/// Chat-completion request body for a synthesis request.
std::string chat_request_body(const SynthesisRequest& request, const BackendConfig& cfg);

/// Message content of the first choice of a chat-completion response.
/// Throws BackendError(bad_response).
std::string chat_reply_content(std::string_view body);

/// Chat-completion client with a mandatory response cache. A cache hit
/// never touches the network. Concurrent identical requests are coalesced:
/// one network call, everyone else reads the cache.
class LlmBackend final : public SynthesisBackend {
public:
    explicit LlmBackend(BackendConfig cfg, Transport transport = http_transport());

    SyntheticRow synthesize(const SynthesisRequest& request) override;

    std::size_t cache_hits() const { return cache_hits_.load(); }
    std::size_t network_calls() const { return network_calls_.load(); }
    const BackendConfig& config() const { return cfg_; }

private:
    std::string fetch(const SynthesisRequest& request);

    BackendConfig cfg_;
    Transport transport_;
    ResponseCache cache_;
    std::array<std::mutex, 64> key_locks_;
    std::atomic<std::size_t> cache_hits_{0};
    std::atomic<std::size_t> network_calls_{0};
};

}  // namespace moot
