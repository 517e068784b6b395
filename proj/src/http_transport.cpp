#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "moot/backends.hpp"

namespace moot {

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw std::invalid_argument("endpoint URL lacks a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

Transport http_transport() {
    return [](const HttpPost& post) -> HttpReply {
        SplitUrl url = split_url(post.url);
        httplib::Client client(url.origin);
        auto secs = static_cast<time_t>(post.timeout_seconds);
        auto usecs = static_cast<time_t>((post.timeout_seconds - static_cast<double>(secs)) * 1e6);
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);
        httplib::Headers headers;
        for (const auto& [k, v] : post.headers) headers.emplace(k, v);
        auto res = client.Post(url.path, headers, post.body, "application/json");
        if (!res) return {0, {}, httplib::to_string(res.error())};
        return {res->status, res->body, {}};
    };
}

}  // namespace moot
