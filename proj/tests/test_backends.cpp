#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include "moot/backends.hpp"
#include "moot/synthcore.hpp"
#include "support/fixtures.hpp"
#include "support/synthetic.hpp"

using namespace moot;
using moot::testing::table_from;
namespace fs = std::filesystem;

namespace {

std::string chat_body(const std::string& content) {
    nlohmann::json j = {{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
    return j.dump();
}

SynthesisRequest request_for(const Table& t, std::span<const Scored> best, std::span<const Scored> rest,
                             std::uint64_t seed = 1) {
    auto p = render_prompt(make_bundle(t, build_meta(t, {}), best, rest));
    return {p.system, p.human, p.task, schema_of(t), seed};
}

BackendConfig offline_config(const std::string& tag) {
    BackendConfig cfg;
    cfg.cache_dir = moot::testing::scratch_dir(tag);
    cfg.retry_backoff_seconds = 0.0;
    cfg.endpoint = "http://127.0.0.1:9/v1/chat/completions";
    cfg.api_key_env = "MOOT_TEST_UNSET_KEY";
    return cfg;
}

std::size_t file_count(const fs::path& dir) {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) ++n;
    return n;
}

}  // namespace

TEST_SUITE("synth-backends") {
    TEST_CASE("reply parsing") {
        auto schema = schema_of(moot::testing::table2());
        auto row = parse_reply("| 50 | 3 | 9 |", schema);
        CHECK(row == SyntheticRow{{50.0, 3.0, 9.0}});

        auto prose = parse_reply(
            "Here is a better configuration, balancing throughput.\n\n"
            "| Spout_wait | Spliters | Counters |\n|---|---|---|\n| 12 | 5 | 16 |\n\nThis should do well.",
            schema);
        CHECK(prose == SyntheticRow{{12.0, 5.0, 16.0}});

        auto echoed = parse_reply("| Spout_wait | Spliters | Counters |\n| 20 | 4 | 11 |\n", schema);
        CHECK(echoed == SyntheticRow{{20.0, 4.0, 11.0}});

        auto tagged = parse_reply("| class | Spout_wait | Spliters | Counters |\n|---|---|---|---|\n| Better | 8 | 6 | 17 |",
                                  schema);
        CHECK(tagged == SyntheticRow{{8.0, 6.0, 17.0}});

        CHECK(parse_reply("| **9** | `2` | +3 |", schema) == SyntheticRow{{9.0, 2.0, 3.0}});
        // clamped into the observed range
        CHECK(parse_reply("| 1e9 | -4 | 9 |", schema) == SyntheticRow{{10000.0, 1.0, 9.0}});

        auto kind_of = [&](const std::string& reply) {
            try {
                parse_reply(reply, schema);
            } catch (const BackendError& e) {
                CHECK(e.raw() == reply);
                return e.kind();
            }
            FAIL("reply parsed: " << reply);
            return BackendErrorKind::transport;
        };
        CHECK(kind_of("no table here") == BackendErrorKind::no_table_row);
        CHECK(kind_of("| 1 | 2 |") == BackendErrorKind::cell_count);
        CHECK(kind_of("| 1 | two | 3 |") == BackendErrorKind::bad_cell);

        auto sym = table_from("size, Mode, Cost-\nsmall, 1, 3\nlarge, 2, 4\nlarge, 3, 5\n");
        auto s = schema_of(sym);
        CHECK(s[0].modal == "large");
        CHECK(parse_reply("| huge | 2 |", s) == SyntheticRow{{std::string("large"), 2.0}});
        CHECK(parse_reply("| small | 2.5 |", s) == SyntheticRow{{std::string("small"), 2.5}});
    }

    TEST_CASE("surrogate proposals") {
        auto t = table_from("X, Y, Cost-\n0, 1, 1\n10, 3, 2\n4, 7, 9\n");
        std::vector<Scored> one{{1, 0.0}}, rest{{2, 1.0}};
        Rng rng(1);
        CHECK(surrogate_synthesize(request_for(t, one, rest), rng, 0.0) == SyntheticRow{{10.0, 3.0}});

        std::vector<Scored> two{{0, 0.0}, {1, 0.1}};
        auto mid = surrogate_synthesize(request_for(t, two, rest), rng, 0.0);
        CHECK(std::get<double>(mid.x[0]) == 5.0);
        CHECK(std::get<double>(mid.x[1]) == 2.0);

        SurrogateBackend jittery(0.05);
        auto req = request_for(t, two, rest, 42);
        CHECK(jittery.synthesize(req) == jittery.synthesize(req));
        auto other = req;
        other.seed = 43;
        CHECK_FALSE(jittery.synthesize(req) == jittery.synthesize(other));

        auto broken = req;
        broken.human = "nothing useful";
        CHECK_THROWS_AS(jittery.synthesize(broken), BackendError);
    }

    TEST_CASE("surrogate and llm backends are interchangeable") {
        auto t = moot::testing::parabola_pool(80);
        auto cfg = offline_config("swap");
        Transport fake = [](const HttpPost&) { return HttpReply{200, chat_body("| 0.31 |"), {}}; };
        LlmBackend llm(cfg, fake);
        SurrogateBackend surrogate;
        auto plan = plan_budget(20, 3, 4);
        auto a = run_synthcore(t, llm, plan);
        auto b = run_synthcore(t, surrogate, plan);
        CHECK(a.labels_spent == 20);
        CHECK(b.labels_spent == 20);
        CHECK(a.failed_rounds == 0);
    }

    TEST_CASE("response cache") {
        auto dir = moot::testing::scratch_dir("cache");
        ResponseCache cache(dir);
        auto k = ResponseCache::key("m", "prompt");
        CHECK(k.size() == 64);
        CHECK(k == ResponseCache::key("m", "prompt"));
        CHECK(k != ResponseCache::key("m", "prompt "));
        CHECK(k != ResponseCache::key("m2", "prompt"));
        CHECK(ResponseCache::key("ab", "c") != ResponseCache::key("a", "bc"));
        CHECK(k == "b5974118c27de6325802b8e38cd93ab7e7b9f0c616e156eaee1c038ccb7d23b7");  // sha256("m\0prompt") computed externally
        CHECK_FALSE(cache.get(k).has_value());
        cache.put(k, "| 1 |");
        cache.put(k, "| 1 |");
        CHECK(cache.get(k) == std::optional<std::string>("| 1 |"));
        CHECK(file_count(dir) == 1);

        auto blocker = dir / "plain-file";
        std::ofstream(blocker) << "x";
        try {
            ResponseCache bad(blocker / "sub");
            FAIL("cache accepted an unusable directory");
        } catch (const BackendError& e) {
            CHECK(e.kind() == BackendErrorKind::cache_io);
        }
    }

    TEST_CASE("llm backend caches and coalesces") {
        auto t = moot::testing::table2();
        std::vector<Scored> best{{0, 0.0}}, rest{{4, 1.0}};
        auto req = request_for(t, best, rest);
        auto cfg = offline_config("llm");
        std::atomic<int> calls{0};
        Transport fake = [&](const HttpPost& post) {
            ++calls;
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
            auto body = nlohmann::json::parse(post.body);
            CHECK(body["messages"].size() == 2);
            return HttpReply{200, chat_body("Sure.\n\n| 9 | 5 | 17 |"), {}};
        };
        LlmBackend llm(cfg, fake);

        std::vector<std::thread> threads;
        std::vector<SyntheticRow> rows(100);
        for (std::size_t i = 0; i < rows.size(); ++i)
            threads.emplace_back([&, i] { rows[i] = llm.synthesize(req); });
        for (auto& th : threads) th.join();
        CHECK(calls.load() == 1);
        CHECK(llm.network_calls() == 1);
        CHECK(llm.cache_hits() == 99);
        for (const auto& r : rows) CHECK(r == SyntheticRow{{9.0, 5.0, 17.0}});
        CHECK(file_count(cfg.cache_dir) == 1);

        // A second client over the same directory never touches the network.
        Transport offline = [&](const HttpPost&) -> HttpReply {
            FAIL("network used on a cache hit");
            return {};
        };
        LlmBackend warm(cfg, offline);
        CHECK(warm.synthesize(req) == rows.front());
        CHECK(warm.network_calls() == 0);
        CHECK(warm.cache_hits() == 1);
    }

    TEST_CASE("llm backend errors and retries") {
        auto t = moot::testing::table2();
        std::vector<Scored> best{{0, 0.0}}, rest{{4, 1.0}};
        auto req = request_for(t, best, rest);

        auto kind_of = [&](Transport tr, int& calls, const std::string& tag) {
            LlmBackend llm(offline_config(tag), [&, tr](const HttpPost& p) {
                ++calls;
                return tr(p);
            });
            try {
                llm.synthesize(req);
            } catch (const BackendError& e) {
                return e.kind();
            }
            return BackendErrorKind::bad_prompt;  // sentinel: no error
        };

        int n = 0;
        CHECK(kind_of([](const HttpPost&) { return HttpReply{0, {}, "connection refused"}; }, n, "e1") ==
              BackendErrorKind::transport);
        CHECK(n == 3);

        n = 0;
        CHECK(kind_of([](const HttpPost&) { return HttpReply{429, "slow down", {}}; }, n, "e2") ==
              BackendErrorKind::http_status);
        CHECK(n == 3);

        n = 0;
        CHECK(kind_of([](const HttpPost&) { return HttpReply{404, "missing", {}}; }, n, "e3") ==
              BackendErrorKind::http_status);
        CHECK(n == 1);

        n = 0;
        CHECK(kind_of([](const HttpPost&) { return HttpReply{200, "not json", {}}; }, n, "e4") ==
              BackendErrorKind::bad_response);

        n = 0;
        CHECK(kind_of([](const HttpPost&) { return HttpReply{200, chat_body("I cannot help."), {}}; }, n, "e5") ==
              BackendErrorKind::no_table_row);

        n = 0;
        int served = 0;
        CHECK(kind_of(
                  [&](const HttpPost&) {
                      return ++served < 3 ? HttpReply{503, "busy", {}} : HttpReply{200, chat_body("| 9 | 5 | 17 |"), {}};
                  },
                  n, "e6") == BackendErrorKind::bad_prompt);
        CHECK(n == 3);

        // Malformed replies are not cached, so a retry asks again.
        auto cfg = offline_config("e7");
        int asked = 0;
        LlmBackend llm(cfg, [&](const HttpPost&) {
            ++asked;
            return HttpReply{200, chat_body(asked == 1 ? "no table" : "| 9 | 5 | 17 |"), {}};
        });
        CHECK_THROWS_AS(llm.synthesize(req), BackendError);
        CHECK(llm.synthesize(req) == SyntheticRow{{9.0, 5.0, 17.0}});
        CHECK(asked == 2);
    }

    TEST_CASE("chat request shape and api key") {
        SynthesisRequest req{"sys", "human", "task", {}, 0};
        BackendConfig cfg;
        cfg.model = "m1";
        cfg.temperature = 0.25;
        auto body = nlohmann::json::parse(chat_request_body(req, cfg));
        CHECK(body["model"] == "m1");
        CHECK(body["temperature"] == 0.25);
        CHECK(body["n"] == 1);
        CHECK_FALSE(body.contains("max_tokens"));
        REQUIRE(body["messages"].size() == 2);
        CHECK(body["messages"][0]["role"] == "system");
        CHECK(body["messages"][0]["content"] == "sys");
        CHECK(body["messages"][1]["role"] == "user");
        CHECK(body["messages"][1]["content"] == "human\n\ntask");
        cfg.max_tokens = 64;
        CHECK(nlohmann::json::parse(chat_request_body(req, cfg))["max_tokens"] == 64);

        CHECK(chat_reply_content(chat_body("hi")) == "hi");
        CHECK_THROWS_AS(chat_reply_content("{\"choices\": []}"), BackendError);

        auto t = moot::testing::table2();
        std::vector<Scored> best{{0, 0.0}}, rest{{4, 1.0}};
        auto sreq = request_for(t, best, rest);
        std::string seen_auth = "unset";
        auto capture = [&](const HttpPost& p) {
            seen_auth.clear();
            for (const auto& [k, v] : p.headers)
                if (k == "Authorization") seen_auth = v;
            return HttpReply{200, chat_body("| 9 | 5 | 17 |"), {}};
        };
        auto keyed = offline_config("key1");
        keyed.api_key_env = "MOOT_TEST_API_KEY";
        ::setenv("MOOT_TEST_API_KEY", "sekrit", 1);
        LlmBackend with_key(keyed, capture);
        with_key.synthesize(sreq);
        CHECK(seen_auth == "Bearer sekrit");
        ::unsetenv("MOOT_TEST_API_KEY");
        LlmBackend without_key(offline_config("key2"), capture);
        without_key.synthesize(sreq);
        CHECK(seen_auth.empty());
    }

    TEST_CASE("http transport against a local server") {
        httplib::Server server;
        std::string got_auth, got_type;
        server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
            got_auth = req.get_header_value("Authorization");
            got_type = req.get_header_value("Content-Type");
            auto body = nlohmann::json::parse(req.body);
            res.set_content(chat_body("| 9 | 5 | " + std::to_string(body["messages"].size()) + " |"),
                            "application/json");
        });
        server.Post("/fail", [](const httplib::Request&, httplib::Response& res) {
            res.status = 500;
            res.set_content("boom", "text/plain");
        });
        int port = server.bind_to_any_port("127.0.0.1");
        REQUIRE(port > 0);
        std::thread th([&] { server.listen_after_bind(); });
        server.wait_until_ready();

        auto transport = http_transport();
        const std::string base = "http://127.0.0.1:" + std::to_string(port);
        auto ok = transport(HttpPost{base + "/v1/chat/completions", "{\"messages\":[1,2]}", {{"Authorization", "Bearer k"}}, 5.0});
        CHECK(ok.error.empty());
        CHECK(ok.status == 200);
        CHECK(chat_reply_content(ok.body) == "| 9 | 5 | 2 |");
        CHECK(got_auth == "Bearer k");
        CHECK(got_type == "application/json");

        auto fail = transport(HttpPost{base + "/fail", "{}", {}, 5.0});
        CHECK(fail.status == 500);
        CHECK(fail.body == "boom");

        auto cfg = offline_config("http");
        cfg.endpoint = base + "/v1/chat/completions";
        LlmBackend llm(cfg);
        auto t = moot::testing::table2();
        std::vector<Scored> best{{0, 0.0}}, rest{{4, 1.0}};
        CHECK(llm.synthesize(request_for(t, best, rest)) == SyntheticRow{{9.0, 5.0, 2.0}});

        server.stop();
        th.join();

        auto refused = transport(HttpPost{base + "/v1/chat/completions", "{}", {}, 1.0});
        CHECK_FALSE(refused.error.empty());
        CHECK_THROWS_AS(transport(HttpPost{"no-scheme", "{}", {}, 1.0}), std::invalid_argument);
    }
}
