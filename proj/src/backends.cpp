#include "moot/backends.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>
#include <openssl/evp.h>

#include "moot/markdown.hpp"

namespace moot {

using nlohmann::json;

std::string_view to_string(BackendErrorKind kind) {
    switch (kind) {
        case BackendErrorKind::transport: return "transport";
        case BackendErrorKind::http_status: return "http_status";
        case BackendErrorKind::bad_response: return "bad_response";
        case BackendErrorKind::no_table_row: return "no_table_row";
        case BackendErrorKind::cell_count: return "cell_count";
        case BackendErrorKind::bad_cell: return "bad_cell";
        case BackendErrorKind::bad_prompt: return "bad_prompt";
        case BackendErrorKind::cache_io: return "cache_io";
    }
    return "unknown";
}

std::vector<ColumnSchema> schema_of(const Table& table) {
    std::vector<ColumnSchema> schema;
    const auto cols = table.x_columns();
    for (std::size_t c = 0; c < cols.size(); ++c) {
        ColumnSchema s{cols[c].name, cols[c].kind, cols[c].lo, cols[c].hi, cols[c].levels, {}};
        if (!cols[c].is_numeric()) {
            std::vector<std::size_t> counts(s.levels.size(), 0);
            for (const auto& row : table.rows())
                ++counts[static_cast<std::size_t>(cols[c].level_index(std::get<std::string>(row.x[c])))];
            auto top = std::max_element(counts.begin(), counts.end());  // first maximum: lowest level wins ties
            s.modal = s.levels[static_cast<std::size_t>(top - counts.begin())];
        }
        schema.push_back(std::move(s));
    }
    return schema;
}

SyntheticRow conform(SyntheticRow row, const std::vector<ColumnSchema>& schema) {
    if (row.x.size() != schema.size())
        throw BackendError(BackendErrorKind::cell_count, "synthetic row width differs from the schema");
    for (std::size_t c = 0; c < schema.size(); ++c) {
        const auto& col = schema[c];
        if (col.kind == Kind::numeric) {
            double v = std::get<double>(row.x[c]);
            row.x[c] = std::isnan(v) ? col.lo : std::clamp(v, col.lo, col.hi);
        } else {
            const auto& sym = std::get<std::string>(row.x[c]);
            if (!std::binary_search(col.levels.begin(), col.levels.end(), sym)) row.x[c] = col.modal;
        }
    }
    return row;
}

Cell parse_cell(std::string_view text, const ColumnSchema& col) {
    while (!text.empty() && (text.front() == '*' || text.front() == '`')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == '*' || text.back() == '`')) text.remove_suffix(1);
    if (col.kind == Kind::symbolic) return std::string(text);
    std::string_view digits = text;
    if (!digits.empty() && digits.front() == '+') digits.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || digits.empty())
        throw BackendError(BackendErrorKind::bad_cell,
                           "cell '" + std::string(text) + "' of column '" + col.name + "' is not a number");
    return v;
}

namespace {

bool is_tag(const std::string& cell) { return cell == "Best" || cell == "Rest" || cell == "Better"; }

bool echoes_header(const std::vector<std::string>& cells, const std::vector<ColumnSchema>& schema) {
    std::size_t matches = 0;
    for (const auto& col : schema)
        if (std::find(cells.begin(), cells.end(), col.name) != cells.end()) ++matches;
    return matches == schema.size();
}

}  // namespace

SyntheticRow parse_reply(std::string_view reply, const std::vector<ColumnSchema>& schema) {
    std::optional<std::vector<std::string>> cells;
    for (auto& block : markdown::tables(reply)) {
        for (auto& r : block.rows) {
            if (echoes_header(r, schema)) continue;
            cells = std::move(r);
            break;
        }
        if (cells) break;
    }
    if (!cells) throw BackendError(BackendErrorKind::no_table_row, "reply has no markdown table row", std::string(reply));
    if (cells->size() == schema.size() + 1 && is_tag(cells->front())) cells->erase(cells->begin());
    if (cells->size() != schema.size())
        throw BackendError(BackendErrorKind::cell_count,
                           "reply row has " + std::to_string(cells->size()) + " cells, expected " +
                               std::to_string(schema.size()),
                           std::string(reply));
    SyntheticRow row;
    try {
        for (std::size_t c = 0; c < schema.size(); ++c) row.x.push_back(parse_cell((*cells)[c], schema[c]));
    } catch (const BackendError& e) {
        throw BackendError(e.kind(), e.what(), std::string(reply));
    }
    return conform(std::move(row), schema);
}

SyntheticRow surrogate_synthesize(const SynthesisRequest& request, Rng& rng, double jitter_fraction) {
    const auto& schema = request.schema;
    for (const auto& block : markdown::tables(request.human)) {
        auto& header = block.header;
        auto tag_col = std::find(header.begin(), header.end(), "class");
        if (tag_col == header.end()) continue;
        std::vector<std::size_t> where;
        for (const auto& col : schema) {
            auto it = std::find(header.begin(), header.end(), col.name);
            if (it == header.end()) break;
            where.push_back(static_cast<std::size_t>(it - header.begin()));
        }
        if (where.size() != schema.size()) continue;

        std::vector<std::vector<Cell>> best;
        for (const auto& r : block.rows) {
            if (r.size() != header.size())
                throw BackendError(BackendErrorKind::bad_prompt, "ragged example row in prompt", request.human);
            if (r[static_cast<std::size_t>(tag_col - header.begin())] != "Best") continue;
            std::vector<Cell> x;
            try {
                for (std::size_t c = 0; c < schema.size(); ++c) x.push_back(parse_cell(r[where[c]], schema[c]));
            } catch (const BackendError& e) {
                throw BackendError(BackendErrorKind::bad_prompt, e.what(), request.human);
            }
            best.push_back(std::move(x));
        }
        if (best.empty()) throw BackendError(BackendErrorKind::bad_prompt, "prompt has no Best rows", request.human);

        SyntheticRow out;
        std::normal_distribution<double> unit(0.0, 1.0);
        for (std::size_t c = 0; c < schema.size(); ++c) {
            const auto& col = schema[c];
            if (col.kind == Kind::numeric) {
                double sum = 0.0;
                for (const auto& x : best) sum += std::get<double>(x[c]);
                double value = sum / static_cast<double>(best.size());
                double sd = jitter_fraction * (col.hi - col.lo);
                if (sd > 0.0) value += sd * unit(rng);
                out.x.emplace_back(value);
            } else {
                std::map<std::string, std::size_t> counts;
                for (const auto& x : best) ++counts[std::get<std::string>(x[c])];
                auto top = counts.begin();
                for (auto it = counts.begin(); it != counts.end(); ++it)
                    if (it->second > top->second) top = it;
                out.x.emplace_back(top->first);
            }
        }
        return conform(std::move(out), schema);
    }
    throw BackendError(BackendErrorKind::bad_prompt, "no example table with a class column in prompt", request.human);
}

SyntheticRow SurrogateBackend::synthesize(const SynthesisRequest& request) {
    Rng rng(request.seed);
    return surrogate_synthesize(request, rng, jitter_fraction_);
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec || !std::filesystem::is_directory(dir_))
        throw BackendError(BackendErrorKind::cache_io, "cannot create cache directory " + dir_.string());
    auto probe = dir_ / (".probe-" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())));
    {
        std::ofstream out(probe);
        if (!out) throw BackendError(BackendErrorKind::cache_io, "cache directory " + dir_.string() + " is not writable");
    }
    std::filesystem::remove(probe, ec);
}

std::string ResponseCache::key(std::string_view model, std::string_view prompt) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    const char sep = '\0';
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    EVP_DigestUpdate(ctx, model.data(), model.size());
    EVP_DigestUpdate(ctx, &sep, 1);
    EVP_DigestUpdate(ctx, prompt.data(), prompt.size());
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

std::optional<std::string> ResponseCache::get(const std::string& digest) const {
    std::ifstream in(dir_ / digest, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void ResponseCache::put(const std::string& digest, std::string_view reply) const {
    static std::atomic<std::uint64_t> counter{0};
    auto tmp = dir_ / (digest + ".tmp" + std::to_string(counter.fetch_add(1)) + "-" +
                       std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())));
    {
        std::ofstream out(tmp, std::ios::binary);
        out.write(reply.data(), static_cast<std::streamsize>(reply.size()));
        if (!out) throw BackendError(BackendErrorKind::cache_io, "cannot write cache file " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, dir_ / digest, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw BackendError(BackendErrorKind::cache_io, "cannot publish cache file for " + digest);
    }
}

std::string prompt_text(const SynthesisRequest& request) {
    return request.system + std::string(1, '\0') + request.human + "\n\n" + request.task;
}

std::string chat_request_body(const SynthesisRequest& request, const BackendConfig& cfg) {
    json body = {
        {"model", cfg.model},
        {"messages",
         json::array({{{"role", "system"}, {"content", request.system}},
                      {{"role", "user"}, {"content", request.human + "\n\n" + request.task}}})},
        {"temperature", cfg.temperature},
        {"n", 1},
    };
    if (cfg.max_tokens) body["max_tokens"] = *cfg.max_tokens;
    return body.dump();
}

std::string chat_reply_content(std::string_view body) {
    try {
        auto parsed = json::parse(body);
        return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw BackendError(BackendErrorKind::bad_response, std::string("not a chat-completion reply: ") + e.what(),
                           std::string(body));
    }
}

LlmBackend::LlmBackend(BackendConfig cfg, Transport transport)
    : cfg_(std::move(cfg)), transport_(std::move(transport)), cache_(cfg_.cache_dir) {
    if (cfg_.timeout_seconds <= 0) throw std::invalid_argument("backend timeout must be positive");
    if (cfg_.max_retries < 0) throw std::invalid_argument("backend retries must be non-negative");
}

std::string LlmBackend::fetch(const SynthesisRequest& request) {
    HttpPost post{cfg_.endpoint, chat_request_body(request, cfg_), {}, cfg_.timeout_seconds};
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key)
        post.headers.emplace_back("Authorization", std::string("Bearer ") + key);

    double backoff = cfg_.retry_backoff_seconds;
    for (int attempt = 0;; ++attempt) {
        ++network_calls_;
        HttpReply reply = transport_(post);
        bool retryable = !reply.error.empty() || reply.status == 429 || reply.status >= 500;
        if (!retryable || attempt >= cfg_.max_retries) {
            if (!reply.error.empty())
                throw BackendError(BackendErrorKind::transport, "request to " + cfg_.endpoint + " failed: " + reply.error);
            if (reply.status < 200 || reply.status >= 300)
                throw BackendError(BackendErrorKind::http_status,
                                   "endpoint returned HTTP " + std::to_string(reply.status), reply.body);
            return chat_reply_content(reply.body);
        }
        if (backoff > 0) std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
        backoff *= 2.0;
    }
}

SyntheticRow LlmBackend::synthesize(const SynthesisRequest& request) {
    const std::string digest = ResponseCache::key(cfg_.model, prompt_text(request));
    std::lock_guard lock(key_locks_[std::hash<std::string>{}(digest) % key_locks_.size()]);
    if (auto cached = cache_.get(digest)) {
        ++cache_hits_;
        return parse_reply(*cached, request.schema);
    }
    std::string content = fetch(request);
    SyntheticRow row = parse_reply(content, request.schema);
    cache_.put(digest, content);
    return row;
}

}  // namespace moot
