#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "moot/rng.hpp"
#include "moot/scoring.hpp"
#include "moot/table.hpp"

namespace moot {

class BudgetExhausted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Owns the act of labeling: revealing a row's goals and charging it to the
/// budget. Labeling an already-labeled row is a free no-op.
class LabelLedger {
public:
    LabelLedger(const Table& table, std::size_t budget);

    /// Reveals `id` and returns its distance to heaven. Throws
    /// BudgetExhausted when a new label would exceed the budget.
    double label(RowId id);

    bool is_labeled(RowId id) const { return labeled_mask_.at(id) != 0; }

    /// Throws std::logic_error for a row that has not been labeled.
    double score(RowId id) const;

    /// Labeled rows in the order they were labeled.
    std::span<const Scored> labeled() const { return labeled_; }

    /// Unlabeled row ids, ascending.
    std::vector<RowId> unlabeled() const;

    std::size_t spent() const { return labeled_.size(); }
    std::size_t budget() const { return budget_; }
    std::size_t remaining() const { return budget_ - labeled_.size(); }
    const Table& table() const { return *table_; }

private:
    const Table* table_;
    IdealPoint ideal_;
    std::size_t budget_;
    std::vector<Scored> labeled_;
    std::vector<char> labeled_mask_;
};

struct TraceStep {
    std::size_t step = 0;
    RowId row = 0;
    double score = 0.0;

    friend bool operator==(const TraceStep&, const TraceStep&) = default;
};

struct RunResult {
    RowId best_row_id = 0;
    double best_score = 1.0;
    std::size_t labels_spent = 0;
    std::vector<TraceStep> trace;
    double wall_time = 0.0;  // seconds
    std::size_t failed_rounds = 0;
};

/// Builds a RunResult from everything the ledger has labeled so far.
RunResult summarize(const LabelLedger& ledger, double wall_time);

/// An acquisition policy. Implementations refit whatever model they need
/// from the ledger on every call.
class Strategy {
public:
    virtual ~Strategy() = default;
    virtual std::string_view name() const = 0;

    /// Picks one row from `pool` (unlabeled ids, ascending, non-empty).
    virtual RowId acquire(const LabelLedger& ledger, std::span<const RowId> pool, Rng& rng) = 0;
};

inline constexpr std::size_t kDefaultWarm = 4;

/// Labels `warm` random rows, then asks `policy` for one row at a time until
/// `budget` labels are spent.
RunResult run_loop(const Table& table, Strategy& policy, std::size_t budget, std::size_t warm, std::uint64_t seed);

RowId acquire_random(std::span<const RowId> pool, Rng& rng);

/// Per-class Naive Bayes model over x: a Gaussian per numeric attribute and a
/// Laplace-smoothed frequency per symbolic attribute.
class NaiveBayesClass {
public:
    NaiveBayesClass(const Table& table, std::span<const RowId> members);

    /// Summed log density of the row's x values (no prior).
    double log_likelihood(const Row& row) const;
    std::size_t size() const { return size_; }

private:
    struct Numeric {
        double mean;
        double sd;
    };
    std::span<const ColumnSpec> columns_;
    std::size_t size_;
    std::vector<Numeric> numeric_;                      // per x column; unused for symbolic
    std::vector<std::vector<double>> level_log_freq_;   // per x column; empty for numeric
    std::vector<double> unseen_log_freq_;
};

/// Log-space class likelihoods, priors included. b() and r() may underflow
/// to 0 in high dimensions; comparisons should use the log values.
struct Likelihoods {
    double log_b;
    double log_r;

    double b() const;
    double r() const;
    /// log |b - r|, -inf when b == r.
    double log_abs_gap() const;
};

Likelihoods likelihoods(const NaiveBayesClass& best, const NaiveBayesClass& rest, const Row& row);
Likelihoods likelihoods(const Table& table, const Row& row, std::span<const RowId> best, std::span<const RowId> rest);

/// argmax b/r over the pool, ties by lower id.
RowId acquire_exploit(const Table& table, std::span<const RowId> pool, std::span<const RowId> best,
                      std::span<const RowId> rest);

/// argmax 1/|b - r| over the pool (most uncertain), ties by lower id.
RowId acquire_explore(const Table& table, std::span<const RowId> pool, std::span<const RowId> best,
                      std::span<const RowId> rest);

class RandomStrategy final : public Strategy {
public:
    std::string_view name() const override { return "random"; }
    RowId acquire(const LabelLedger& ledger, std::span<const RowId> pool, Rng& rng) override;
};

/// Exploit and explore split the labeled rows in half (best/rest) each step.
class ExploitStrategy final : public Strategy {
public:
    std::string_view name() const override { return "exploit"; }
    RowId acquire(const LabelLedger& ledger, std::span<const RowId> pool, Rng& rng) override;
};

class ExploreStrategy final : public Strategy {
public:
    std::string_view name() const override { return "explore"; }
    RowId acquire(const LabelLedger& ledger, std::span<const RowId> pool, Rng& rng) override;
};

inline constexpr double kBayesBestFraction = 0.5;

}  // namespace moot
