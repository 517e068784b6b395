#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "moot/markdown.hpp"
#include "moot/synthcore.hpp"
#include "support/fixtures.hpp"
#include "support/synthetic.hpp"

#ifndef MOOT_GOLDEN_DIR
#error "MOOT_GOLDEN_DIR must point at tests/golden"
#endif

using namespace moot;
using moot::testing::table_from;

namespace {

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Logs every request it sees, then defers to the surrogate.
class RecordingBackend final : public SynthesisBackend {
public:
    SyntheticRow synthesize(const SynthesisRequest& request) override {
        {
            std::lock_guard lock(mu_);
            humans.push_back(request.human);
        }
        return inner_.synthesize(request);
    }
    std::vector<std::string> humans;

private:
    std::mutex mu_;
    SurrogateBackend inner_{0.05};
};

// Proposes an exact copy of an unlabeled row chosen at call time.
class CloneBackend final : public SynthesisBackend {
public:
    CloneBackend(const Table& t, const LabelLedger& l) : table_(t), ledger_(l) {}
    SyntheticRow synthesize(const SynthesisRequest&) override {
        auto pool = ledger_.unlabeled();
        target = pool[pool.size() / 2];
        return SyntheticRow{table_.row(target).x};
    }
    RowId target = 0;

private:
    const Table& table_;
    const LabelLedger& ledger_;
};

class FailingBackend final : public SynthesisBackend {
public:
    explicit FailingBackend(BackendErrorKind k) : kind_(k) {}
    SyntheticRow synthesize(const SynthesisRequest&) override {
        ++calls;
        throw BackendError(kind_, "scripted failure", "raw");
    }
    int calls = 0;

private:
    BackendErrorKind kind_;
};

std::string key_of(const std::vector<std::string>& cells, std::size_t from, std::size_t count) {
    std::string k;
    for (std::size_t i = from; i < from + count; ++i) k += cells[i] + "|";
    return k;
}

}  // namespace

TEST_SUITE("synthcore") {
    TEST_CASE("budget plan") {
        auto cfg = plan_budget(20, 3);
        CHECK(cfg.rounds == 2);
        CHECK(cfg.warm == 12);
        CHECK(cfg.warm + cfg.rounds * (cfg.shots + 1) == 20);
        CHECK(plan_budget(20).warm == 12);

        CHECK_THROWS_AS(plan_budget(7, 5), std::invalid_argument);
        CHECK_THROWS_AS(plan_budget(9, 3), std::invalid_argument);
        CHECK_THROWS_AS(plan_budget(20, 1), std::invalid_argument);

        for (std::size_t b = 10; b <= 200; ++b)
            for (std::size_t n = 2; n <= 8; ++n) {
                if (b < n + 3) continue;
                auto c = plan_budget(b, n);
                std::size_t m = std::max<std::size_t>(1, (4 * b) / (10 * (n + 1)));
                CHECK(c.rounds == m);
                CHECK(c.warm + c.rounds * (c.shots + 1) == b);
                if ((4 * b) / (10 * (n + 1)) >= 1) CHECK(10 * c.warm >= 6 * b);
            }

        CHECK_THROWS_AS(validate(SynthConfig{20, 11, 2, 3, 0, 2}), std::invalid_argument);
        CHECK_THROWS_AS(plan_budget_with_rounds(20, 3, 5), std::invalid_argument);
    }

    TEST_CASE("meta table statistics") {
        auto t = table_from(
            "Flat, Size, mode, Cost-\n"
            "5,    8,    on,   1\n"
            "5,    10000, off, 2\n"
            "5,    9,    on,   3\n"
            "5,    10,   off,  4\n");
        std::vector<Scored> labeled{{0, 0.0}, {3, 0.0}};
        auto meta = build_meta(t, labeled);
        auto blocks = markdown::tables(meta);
        REQUIRE(blocks.size() == 1);
        const auto& rows = blocks[0].rows;
        REQUIRE(rows.size() == 4);
        CHECK(rows[0] == std::vector<std::string>{"Flat", "5", "5", "5", "0"});
        CHECK(rows[1][1] == "8");
        CHECK(rows[1][2] == "10000");
        CHECK(rows[2][0] == "mode");
        CHECK(std::stod(rows[2][4]) == doctest::Approx(1.0).epsilon(1e-12));
        // goal stats only see rows 0 and 3
        CHECK(rows[3][1] == "1");
        CHECK(rows[3][2] == "4");

        auto t2 = moot::testing::table2();
        auto b2 = markdown::tables(build_meta(t2, {}));
        REQUIRE(b2[0].rows.size() == 5);
        CHECK(b2[0].rows[0][0] == "Spout_wait");
        CHECK(b2[0].rows[0][1] == "8");
        CHECK(b2[0].rows[0][2] == "10000");
        CHECK(b2[0].rows[3][1] == "?");
    }

    TEST_CASE("prompt matches the golden snapshot") {
        auto t = moot::testing::table2();
        LabelLedger ledger(t, 8);
        std::vector<Scored> four;
        for (RowId id : {0, 3, 5, 7}) four.push_back({id, ledger.label(id)});
        const auto meta = build_meta(t, ledger.labeled());
        auto [best, rest] = best_rest_split(four, kSynthBestFraction);
        auto bundle = make_bundle(t, meta, best, rest);
        CHECK(bundle.example_count == 4);
        auto p = render_prompt(bundle);
        std::string rendered = "=== system\n" + p.system + "=== human\n" + p.human + "=== task\n" + p.task;

        auto golden = std::filesystem::path(MOOT_GOLDEN_DIR) / "prompt_table2_4rows.txt";
        REQUIRE_MESSAGE(std::filesystem::exists(golden), golden.string());
        CHECK(rendered == read_file(golden));

        // Best rows precede Rest rows; k columns give k meta rows.
        auto examples = markdown::tables(p.human);
        REQUIRE(examples.size() == 1);
        CHECK(examples[0].rows.size() == 4);
        CHECK(examples[0].rows[0][0] == "Best");
        CHECK(examples[0].rows[1][0] == "Best");
        CHECK(examples[0].rows[2][0] == "Rest");
        CHECK(markdown::tables(p.system)[0].rows.size() == t.x_columns().size() + t.goal_columns().size());
    }

    TEST_CASE("nearest row") {
        auto t = table_from("X, Y-\n0, 1\n1, 2\n");
        std::vector<RowId> pool{0, 1};
        CHECK(nearest_row(t, pool, SyntheticRow{{0.4}}) == 0);
        CHECK(nearest_row(t, pool, SyntheticRow{{0.6}}) == 1);
        CHECK(nearest_row(t, pool, SyntheticRow{{0.5}}) == 0);
        CHECK(x_distance(t, t.row(1), SyntheticRow{{1.0}}) == 0.0);
        CHECK_THROWS_AS(nearest_row(t, std::vector<RowId>{}, SyntheticRow{{0.4}}), std::invalid_argument);

        moot::testing::SyntheticSpec spec;
        spec.numeric_dims = 3;
        spec.symbolic_dims = 1;
        spec.rows = 10;
        spec.seed = 5;
        auto r = moot::testing::make_synthetic(spec);
        auto cols = r.x_columns();
        Rng rng(3);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<RowId> all;
        for (RowId i = 0; i < r.size(); ++i) all.push_back(i);
        for (int trial = 0; trial < 50; ++trial) {
            SyntheticRow s;
            for (const auto& c : cols) {
                if (c.is_numeric())
                    s.x.emplace_back(c.lo + u(rng) * (c.hi - c.lo));
                else
                    s.x.emplace_back(c.levels[uniform_index(rng, c.levels.size())]);
            }
            RowId want = 0;
            double best = 1e300;
            for (RowId id : all) {
                double sum = 0.0;
                for (std::size_t c = 0; c < cols.size(); ++c) {
                    double d = cols[c].is_numeric()
                                   ? std::abs(std::get<double>(r.row(id).x[c]) - std::get<double>(s.x[c])) /
                                         (cols[c].hi - cols[c].lo)
                                   : (std::get<std::string>(r.row(id).x[c]) == std::get<std::string>(s.x[c]) ? 0.0 : 1.0);
                    sum += d * d;
                }
                if (sum < best) {
                    best = sum;
                    want = id;
                }
            }
            CHECK(nearest_row(r, all, s) == want);
        }
    }

    TEST_CASE("one round spends shots + 1 labels") {
        auto t = moot::testing::parabola_pool(100);
        LabelLedger ledger(t, 30);
        SurrogateBackend backend;
        Rng rng(4);
        auto out = synthesize_round(t, ledger, backend, 4, rng, build_meta(t, {}));
        CHECK_FALSE(out.aborted);
        CHECK(out.labels.size() == 5);
        CHECK(ledger.spent() == 5);

        LabelLedger tight(t, 4);
        Rng rng2(4);
        CHECK_THROWS_AS(synthesize_round(t, tight, backend, 4, rng2, ""), BudgetExhausted);
    }

    TEST_CASE("a cloned proposal labels that row") {
        auto t = moot::testing::parabola_pool(60);
        LabelLedger ledger(t, 20);
        CloneBackend clone(t, ledger);
        Rng rng(9);
        auto out = synthesize_round(t, ledger, clone, 3, rng, build_meta(t, {}));
        REQUIRE(out.labels.size() == 4);
        CHECK(out.labels.back().id == clone.target);
    }

    TEST_CASE("rounds are deterministic") {
        auto t = moot::testing::make_synthetic({});
        SurrogateBackend backend;
        auto run = [&] {
            LabelLedger ledger(t, 40);
            Rng rng(77);
            return synthesize_round(t, ledger, backend, 3, rng, build_meta(t, {})).labels;
        };
        CHECK(run() == run());

        auto a = run_synthcore(t, backend, plan_budget(30, 3, 5));
        auto b = run_synthcore(t, backend, plan_budget(30, 3, 5));
        CHECK(a.trace == b.trace);
        CHECK(a.best_row_id == b.best_row_id);
    }

    TEST_CASE("failed rounds keep their sampled labels") {
        auto t = moot::testing::parabola_pool(80);
        FailingBackend malformed(BackendErrorKind::bad_cell);
        LabelLedger ledger(t, 20);
        Rng rng(1);
        auto out = synthesize_round(t, ledger, malformed, 3, rng, "", 2);
        CHECK(out.aborted);
        CHECK(out.labels.size() == 3);
        CHECK(ledger.spent() == 3);
        CHECK(malformed.calls == 3);
        CHECK(out.error.find("bad_cell") != std::string::npos);

        FailingBackend down(BackendErrorKind::transport);
        LabelLedger l2(t, 20);
        Rng rng2(1);
        CHECK(synthesize_round(t, l2, down, 3, rng2, "", 2).aborted);
        CHECK(down.calls == 1);

        FailingBackend always(BackendErrorKind::no_table_row);
        auto res = run_synthcore(t, always, plan_budget(20, 3, 2));
        CHECK(res.failed_rounds == 2);
        CHECK(res.labels_spent == 12 + 2 * 3);
    }

    TEST_CASE("rounds never see each other's examples") {
        auto t = moot::testing::make_synthetic({});
        RecordingBackend rec;
        auto cfg = plan_budget(40, 3, 11);
        REQUIRE(cfg.rounds == 4);
        auto res = run_synthcore(t, rec, cfg);
        CHECK(res.labels_spent == cfg.warm + cfg.rounds * (cfg.shots + 1));
        CHECK(res.labels_spent == 40);
        REQUIRE(rec.humans.size() == cfg.rounds);

        // Identify example rows by their x cells as rendered in the prompt.
        const auto nx = t.x_columns().size();
        std::map<std::string, RowId> by_x;
        for (const auto& r : t.rows()) {
            std::vector<std::string> cells;
            for (const auto& c : r.x) cells.push_back(markdown::number(std::get<double>(c)));
            by_x[key_of(cells, 0, nx)] = r.id;
        }
        REQUIRE(by_x.size() == t.size());
        std::set<RowId> seen;
        for (std::size_t round = 0; round < cfg.rounds; ++round) {
            auto blocks = markdown::tables(rec.humans[round]);
            REQUIRE(blocks.size() == 1);
            REQUIRE(blocks[0].rows.size() == cfg.shots);
            std::set<RowId> shown;
            for (const auto& row : blocks[0].rows) {
                auto it = by_x.find(key_of(row, 1, nx));
                REQUIRE(it != by_x.end());
                shown.insert(it->second);
            }
            std::set<RowId> sampled;
            const std::size_t from = cfg.warm + round * (cfg.shots + 1);
            for (std::size_t i = from; i < from + cfg.shots; ++i) sampled.insert(res.trace[i].row);
            CHECK(shown == sampled);
            for (RowId id : shown) CHECK(seen.insert(id).second);
        }
    }

    TEST_CASE("surrogate ensemble beats random on paired seeds") {
        moot::testing::SyntheticSpec spec;
        spec.numeric_dims = 10;
        spec.rows = 1000;
        spec.seed = 10;
        auto t = moot::testing::make_synthetic(spec);
        SurrogateBackend backend;
        const std::size_t budget = 50;
        int wins = 0;
        for (std::uint64_t s = 0; s < 100; ++s) {
            auto shuffled = shuffle_rows(t, s);
            RandomStrategy random;
            double synth = run_synthcore(shuffled, backend, plan_budget(budget, 3, s)).best_score;
            double rnd = run_loop(shuffled, random, budget, kDefaultWarm, s).best_score;
            if (synth <= rnd) ++wins;
        }
        MESSAGE("paired wins: " << wins << "/100");
        CHECK(wins >= 70);
    }
}
