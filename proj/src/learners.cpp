#include "moot/learners.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

namespace moot {

LabelLedger::LabelLedger(const Table& table, std::size_t budget)
    : table_(&table), ideal_(IdealPoint::of(table.goal_columns())), budget_(budget), labeled_mask_(table.size(), 0) {
    if (budget == 0) throw std::invalid_argument("label budget must be positive");
}

double LabelLedger::label(RowId id) {
    if (labeled_mask_.at(id)) return score(id);
    if (labeled_.size() >= budget_)
        throw BudgetExhausted("label budget of " + std::to_string(budget_) + " exhausted");
    double s = chebyshev(table_->row(id), ideal_, table_->goal_columns());
    labeled_mask_[id] = 1;
    labeled_.push_back({id, s});
    return s;
}

double LabelLedger::score(RowId id) const {
    if (!is_labeled(id)) throw std::logic_error("row " + std::to_string(id) + " has not been labeled");
    auto it = std::find_if(labeled_.begin(), labeled_.end(), [&](const Scored& s) { return s.id == id; });
    return it->score;
}

std::vector<RowId> LabelLedger::unlabeled() const {
    std::vector<RowId> ids;
    ids.reserve(table_->size() - labeled_.size());
    for (RowId i = 0; i < labeled_mask_.size(); ++i)
        if (!labeled_mask_[i]) ids.push_back(i);
    return ids;
}

RunResult summarize(const LabelLedger& ledger, double wall_time) {
    RunResult result;
    result.labels_spent = ledger.spent();
    result.wall_time = wall_time;
    const auto labeled = ledger.labeled();
    for (std::size_t i = 0; i < labeled.size(); ++i) result.trace.push_back({i, labeled[i].id, labeled[i].score});
    if (!labeled.empty()) {
        auto best = *std::min_element(labeled.begin(), labeled.end(), score_order);
        result.best_row_id = best.id;
        result.best_score = best.score;
    }
    return result;
}

namespace {

std::vector<RowId> sample_without_replacement(std::vector<RowId> pool, std::size_t k, Rng& rng) {
    for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
    pool.resize(k);
    return pool;
}

std::pair<std::vector<RowId>, std::vector<RowId>> split_ids(const LabelLedger& ledger) {
    auto [best, rest] = best_rest_split(ledger.labeled(), kBayesBestFraction);
    std::vector<RowId> b, r;
    for (const auto& s : best) b.push_back(s.id);
    for (const auto& s : rest) r.push_back(s.id);
    return {std::move(b), std::move(r)};
}

template <typename Key>
RowId argmax_by(const Table& table, std::span<const RowId> pool, Key&& key) {
    if (pool.empty()) throw std::invalid_argument("cannot acquire from an empty pool");
    RowId chosen = pool.front();
    double best = -std::numeric_limits<double>::infinity();
    bool first = true;
    for (RowId id : pool) {
        double v = key(table.row(id));
        if (first || v > best || (v == best && id < chosen)) {
            best = v;
            chosen = id;
            first = false;
        }
    }
    return chosen;
}

}  // namespace

RunResult run_loop(const Table& table, Strategy& policy, std::size_t budget, std::size_t warm, std::uint64_t seed) {
    if (warm < 2 || budget < warm) throw std::invalid_argument("run_loop needs budget >= warm >= 2");
    if (table.size() < budget)
        throw std::invalid_argument("pool of " + std::to_string(table.size()) + " rows cannot supply " +
                                    std::to_string(budget) + " labels");
    auto start = std::chrono::steady_clock::now();
    Rng rng(seed);
    LabelLedger ledger(table, budget);
    for (RowId id : sample_without_replacement(ledger.unlabeled(), warm, rng)) ledger.label(id);
    while (ledger.remaining() > 0) {
        auto pool = ledger.unlabeled();
        RowId pick = policy.acquire(ledger, pool, rng);
        if (ledger.is_labeled(pick)) throw std::logic_error(std::string(policy.name()) + " picked a labeled row");
        ledger.label(pick);
    }
    std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    return summarize(ledger, elapsed.count());
}

RowId acquire_random(std::span<const RowId> pool, Rng& rng) {
    if (pool.empty()) throw std::invalid_argument("cannot acquire from an empty pool");
    return pool[uniform_index(rng, pool.size())];
}

NaiveBayesClass::NaiveBayesClass(const Table& table, std::span<const RowId> members)
    : columns_(table.x_columns()), size_(members.size()) {
    if (members.empty()) throw std::invalid_argument("a Naive Bayes class needs at least one row");
    const double n = static_cast<double>(members.size());
    numeric_.resize(columns_.size());
    level_log_freq_.resize(columns_.size());
    unseen_log_freq_.resize(columns_.size());
    for (std::size_t c = 0; c < columns_.size(); ++c) {
        const auto& col = columns_[c];
        if (col.is_numeric()) {
            double sum = 0.0;
            for (RowId id : members) sum += std::get<double>(table.row(id).x[c]);
            double mean = sum / n;
            double ss = 0.0;
            for (RowId id : members) {
                double d = std::get<double>(table.row(id).x[c]) - mean;
                ss += d * d;
            }
            double sd = members.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
            sd = std::max({sd, 1e-6 * (col.hi - col.lo), 1e-12});
            numeric_[c] = {mean, sd};
        } else {
            const double k = static_cast<double>(std::max<std::size_t>(col.levels.size(), 1));
            std::vector<double> counts(col.levels.size(), 0.0);
            for (RowId id : members) {
                int level = col.level_index(std::get<std::string>(table.row(id).x[c]));
                if (level >= 0) counts[static_cast<std::size_t>(level)] += 1.0;
            }
            for (double count : counts) level_log_freq_[c].push_back(std::log((count + 1.0) / (n + k)));
            unseen_log_freq_[c] = std::log(1.0 / (n + k));
        }
    }
}

double NaiveBayesClass::log_likelihood(const Row& row) const {
    double total = 0.0;
    for (std::size_t c = 0; c < columns_.size(); ++c) {
        if (columns_[c].is_numeric()) {
            const auto [mean, sd] = numeric_[c];
            double z = (std::get<double>(row.x[c]) - mean) / sd;
            total += -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
        } else {
            int level = columns_[c].level_index(std::get<std::string>(row.x[c]));
            total += level >= 0 ? level_log_freq_[c][static_cast<std::size_t>(level)] : unseen_log_freq_[c];
        }
    }
    return total;
}

double Likelihoods::b() const { return std::exp(log_b); }
double Likelihoods::r() const { return std::exp(log_r); }

double Likelihoods::log_abs_gap() const {
    if (log_b == log_r) return -std::numeric_limits<double>::infinity();
    double hi = std::max(log_b, log_r);
    return hi + std::log1p(-std::exp(-std::abs(log_b - log_r)));
}

Likelihoods likelihoods(const NaiveBayesClass& best, const NaiveBayesClass& rest, const Row& row) {
    const double total = static_cast<double>(best.size() + rest.size());
    return {best.log_likelihood(row) + std::log(static_cast<double>(best.size()) / total),
            rest.log_likelihood(row) + std::log(static_cast<double>(rest.size()) / total)};
}

Likelihoods likelihoods(const Table& table, const Row& row, std::span<const RowId> best, std::span<const RowId> rest) {
    return likelihoods(NaiveBayesClass(table, best), NaiveBayesClass(table, rest), row);
}

RowId acquire_exploit(const Table& table, std::span<const RowId> pool, std::span<const RowId> best,
                      std::span<const RowId> rest) {
    NaiveBayesClass b(table, best), r(table, rest);
    return argmax_by(table, pool, [&](const Row& row) {
        auto like = likelihoods(b, r, row);
        return like.log_b - like.log_r;
    });
}

RowId acquire_explore(const Table& table, std::span<const RowId> pool, std::span<const RowId> best,
                      std::span<const RowId> rest) {
    NaiveBayesClass b(table, best), r(table, rest);
    return argmax_by(table, pool, [&](const Row& row) { return -likelihoods(b, r, row).log_abs_gap(); });
}

RowId RandomStrategy::acquire(const LabelLedger&, std::span<const RowId> pool, Rng& rng) {
    return acquire_random(pool, rng);
}

RowId ExploitStrategy::acquire(const LabelLedger& ledger, std::span<const RowId> pool, Rng&) {
    auto [best, rest] = split_ids(ledger);
    return acquire_exploit(ledger.table(), pool, best, rest);
}

RowId ExploreStrategy::acquire(const LabelLedger& ledger, std::span<const RowId> pool, Rng&) {
    auto [best, rest] = split_ids(ledger);
    return acquire_explore(ledger.table(), pool, best, rest);
}

}  // namespace moot
