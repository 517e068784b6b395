#include "moot/synthcore.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>

#include "moot/markdown.hpp"

namespace moot {

void validate(const SynthConfig& cfg) {
    if (cfg.warm < 2) throw std::invalid_argument("synthcore needs at least two warm labels");
    if (cfg.rounds < 1) throw std::invalid_argument("synthcore needs at least one round");
    if (cfg.shots < 2) throw std::invalid_argument("synthcore needs at least two examples per round");
    if (cfg.budget != cfg.warm + cfg.rounds * (cfg.shots + 1))
        throw std::invalid_argument("budget must equal warm + rounds * (shots + 1)");
}

SynthConfig plan_budget(std::size_t budget, std::size_t shots, std::uint64_t seed) {
    if (budget < 10) throw std::invalid_argument("synthcore budget must be at least 10");
    if (shots < 2) throw std::invalid_argument("synthcore needs at least two examples per round");
    if (budget < shots + 1 + 2)
        throw std::invalid_argument("budget " + std::to_string(budget) + " cannot pay for one round of " +
                                    std::to_string(shots) + " examples plus two warm labels");
    auto rounds = static_cast<std::size_t>(std::floor((1.0 - kWarmFraction) * static_cast<double>(budget) /
                                                      static_cast<double>(shots + 1) + 1e-9));
    return plan_budget_with_rounds(budget, shots, std::max<std::size_t>(rounds, 1), seed);
}

SynthConfig plan_budget_with_rounds(std::size_t budget, std::size_t shots, std::size_t rounds, std::uint64_t seed) {
    if (rounds * (shots + 1) > budget) throw std::invalid_argument("rounds exceed the budget");
    SynthConfig cfg{budget, budget - rounds * (shots + 1), rounds, shots, seed, kDefaultRoundRetries};
    validate(cfg);
    return cfg;
}

namespace {

struct NumericStats {
    double min, max, mean, sd;
};

NumericStats numeric_stats(const std::vector<double>& v) {
    NumericStats s{v.front(), v.front(), 0.0, 0.0};
    for (double x : v) {
        s.min = std::min(s.min, x);
        s.max = std::max(s.max, x);
        s.mean += x;
    }
    s.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return s;
}

std::string cell_text(const Cell& c) {
    if (auto* v = std::get_if<double>(&c)) return markdown::number(*v);
    return std::get<std::string>(c);
}

}  // namespace

std::string build_meta(const Table& table, std::span<const Scored> labeled) {
    std::vector<std::string> head{"column", "min", "max", "mean/mode", "sd/entropy"};
    std::string out = markdown::row(head) + "\n" + markdown::separator(head.size()) + "\n";
    const auto xs = table.x_columns();
    for (std::size_t c = 0; c < xs.size(); ++c) {
        std::vector<std::string> cells{xs[c].header()};
        if (xs[c].is_numeric()) {
            std::vector<double> v;
            for (const auto& r : table.rows()) v.push_back(std::get<double>(r.x[c]));
            auto s = numeric_stats(v);
            cells.insert(cells.end(), {markdown::number(s.min), markdown::number(s.max), markdown::stat(s.mean),
                                       markdown::stat(s.sd)});
        } else {
            std::map<std::string, std::size_t> counts;
            for (const auto& r : table.rows()) ++counts[std::get<std::string>(r.x[c])];
            auto mode = counts.begin();
            double entropy = 0.0;
            const double n = static_cast<double>(table.size());
            for (auto it = counts.begin(); it != counts.end(); ++it) {
                if (it->second > mode->second) mode = it;
                double p = static_cast<double>(it->second) / n;
                entropy -= p * std::log2(p);
            }
            cells.insert(cells.end(), {xs[c].levels.front(), xs[c].levels.back(), mode->first,
                                       markdown::stat(entropy + 0.0)});
        }
        out += markdown::row(cells) + "\n";
    }
    const auto ys = table.goal_columns();
    for (std::size_t g = 0; g < ys.size(); ++g) {
        std::vector<std::string> cells{ys[g].header()};
        if (labeled.empty()) {
            cells.insert(cells.end(), {"?", "?", "?", "?"});
        } else {
            std::vector<double> v;
            for (const auto& s : labeled) v.push_back(table.row(s.id).y[g]);
            auto s = numeric_stats(v);
            cells.insert(cells.end(), {markdown::number(s.min), markdown::number(s.max), markdown::stat(s.mean),
                                       markdown::stat(s.sd)});
        }
        out += markdown::row(cells) + "\n";
    }
    return out;
}

std::string build_examples(const Table& table, std::span<const Scored> best, std::span<const Scored> rest) {
    std::vector<std::string> head{"class"};
    for (const auto& c : table.x_columns()) head.push_back(c.name);
    for (const auto& c : table.goal_columns()) head.push_back(c.header());
    std::string out = markdown::row(head) + "\n" + markdown::separator(head.size()) + "\n";
    auto emit = [&](std::span<const Scored> rows, const char* tag) {
        for (const auto& s : rows) {
            const auto& r = table.row(s.id);
            std::vector<std::string> cells{tag};
            for (const auto& c : r.x) cells.push_back(cell_text(c));
            for (double y : r.y) cells.push_back(markdown::number(y));
            out += markdown::row(cells) + "\n";
        }
    };
    emit(best, "Best");
    emit(rest, "Rest");
    return out;
}

PromptBundle make_bundle(const Table& table, std::string meta, std::span<const Scored> best,
                         std::span<const Scored> rest) {
    PromptBundle bundle;
    bundle.meta_markdown = std::move(meta);
    bundle.examples_markdown = build_examples(table, best, rest);
    for (const auto& c : table.x_columns()) bundle.x_names.push_back(c.name);
    bundle.example_count = best.size() + rest.size();
    return bundle;
}

PromptText render_prompt(const PromptBundle& bundle) {
    PromptText p;
    p.system =
        "You are given a dataset with several features. The rows have been categorized into \"Best\" and \"Rest\" "
        "examples based on their overall performance. Below are the key features and their descriptions from the "
        "dataset:\n\n" +
        bundle.meta_markdown;
    p.human = "Given Examples:\n\n" + bundle.examples_markdown;
    p.task =
        "Generate an examples that is Better:\n"
        "This should outperform the given \"Best\" examples by optimizing the relevant features to better "
        "combinations.\n\n"
        "Consider the inter-dependencies between features, and ensure that the generated examples follow logical "
        "consistency within the dataset's context.\n\n"
        "Return the output in the same markdown structure:\n" +
        markdown::row(bundle.x_names) + "\n" + markdown::separator(bundle.x_names.size()) + "\n" +
        "Reply with exactly one markdown table row giving a value for each of these columns, in this order.\n";
    return p;
}

double x_distance(const Table& table, const Row& row, const SyntheticRow& synthetic) {
    const auto cols = table.x_columns();
    if (synthetic.x.size() != cols.size()) throw std::invalid_argument("synthetic row width differs from the table");
    double sum = 0.0;
    for (std::size_t c = 0; c < cols.size(); ++c) {
        double d = 0.0;
        if (cols[c].is_numeric()) {
            double span = cols[c].hi - cols[c].lo;
            double delta = std::abs(std::get<double>(row.x[c]) - std::get<double>(synthetic.x[c]));
            d = span > 0.0 ? delta / span : 0.0;
        } else {
            d = std::get<std::string>(row.x[c]) == std::get<std::string>(synthetic.x[c]) ? 0.0 : 1.0;
        }
        sum += d * d;
    }
    return std::sqrt(sum) / std::sqrt(static_cast<double>(cols.size()));
}

RowId nearest_row(const Table& table, std::span<const RowId> pool, const SyntheticRow& synthetic) {
    if (pool.empty()) throw std::invalid_argument("cannot map a synthetic row onto an empty pool");
    RowId chosen = pool.front();
    double best = x_distance(table, table.row(chosen), synthetic);
    for (RowId id : pool.subspan(1)) {
        double d = x_distance(table, table.row(id), synthetic);
        if (d < best || (d == best && id < chosen)) {
            best = d;
            chosen = id;
        }
    }
    return chosen;
}

RoundOutcome synthesize_round(const Table& table, LabelLedger& ledger, SynthesisBackend& backend,
                              std::size_t shots, Rng& rng, const std::string& meta, int retries) {
    if (ledger.remaining() < shots + 1)
        throw BudgetExhausted("round needs " + std::to_string(shots + 1) + " labels, " +
                              std::to_string(ledger.remaining()) + " remain");
    auto pool = ledger.unlabeled();
    if (pool.size() < shots + 1) throw std::invalid_argument("pool too small for another round");

    RoundOutcome out;
    for (std::size_t i = 0; i < shots; ++i) std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
    for (std::size_t i = 0; i < shots; ++i) out.labels.push_back({pool[i], ledger.label(pool[i])});

    auto [best, rest] = best_rest_split(out.labels, kSynthBestFraction);
    auto prompt = render_prompt(make_bundle(table, meta, best, rest));
    SynthesisRequest request{prompt.system, prompt.human, prompt.task, schema_of(table), rng()};

    std::optional<SyntheticRow> proposal;
    for (int attempt = 0; attempt <= retries && !proposal; ++attempt) {
        try {
            proposal = conform(backend.synthesize(request), request.schema);
        } catch (const BackendError& e) {
            out.error = std::string(to_string(e.kind())) + ": " + e.what();
            bool malformed = e.kind() == BackendErrorKind::no_table_row || e.kind() == BackendErrorKind::cell_count ||
                             e.kind() == BackendErrorKind::bad_cell || e.kind() == BackendErrorKind::bad_response;
            if (!malformed) break;
            request.seed = rng();
        }
    }
    if (!proposal) {
        out.aborted = true;
        return out;
    }
    out.error.clear();
    auto remaining = ledger.unlabeled();
    RowId pick = nearest_row(table, remaining, *proposal);
    out.labels.push_back({pick, ledger.label(pick)});
    return out;
}

RunResult run_synthcore(const Table& table, SynthesisBackend& backend, const SynthConfig& cfg) {
    validate(cfg);
    if (table.size() < cfg.budget)
        throw std::invalid_argument("pool of " + std::to_string(table.size()) + " rows cannot supply " +
                                    std::to_string(cfg.budget) + " labels");
    auto start = std::chrono::steady_clock::now();
    LabelLedger ledger(table, cfg.budget);

    Rng warm_rng(derive_seed(cfg.seed, {0}));
    auto pool = ledger.unlabeled();
    for (std::size_t i = 0; i < cfg.warm; ++i) {
        std::swap(pool[i], pool[i + uniform_index(warm_rng, pool.size() - i)]);
        ledger.label(pool[i]);
    }
    const std::string meta = build_meta(table, ledger.labeled());

    std::size_t failed = 0;
    for (std::size_t round = 0; round < cfg.rounds; ++round) {
        Rng round_rng(derive_seed(cfg.seed, {1, round}));
        auto outcome = synthesize_round(table, ledger, backend, cfg.shots, round_rng, meta, cfg.retries);
        if (outcome.aborted) ++failed;
    }
    std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    auto result = summarize(ledger, elapsed.count());
    result.failed_rounds = failed;
    return result;
}

}  // namespace moot
