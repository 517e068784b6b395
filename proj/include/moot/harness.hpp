#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "moot/backends.hpp"
#include "moot/learners.hpp"
#include "moot/stats.hpp"
#include "moot/synthcore.hpp"

namespace moot {

enum class Stratum { low, medium, high };

std::string_view to_string(Stratum s);

/// low: |x| < 6, medium: 6..11, high: > 11.
Stratum classify_dimensionality(std::size_t x_dims);
Stratum classify_dimensionality(const Table& table);

/// Treatment names in canonical order. "baseline" labels nothing and scores
/// the pool mean.
const std::vector<std::string>& all_treatments();

/// Throws std::invalid_argument for an unknown name, or for "synthcore" and
/// "baseline", which are not loop policies.
std::unique_ptr<Strategy> make_strategy(std::string_view name);

enum class BackendKind { surrogate, llm };

struct ExperimentConfig {
    std::vector<std::filesystem::path> datasets;  // files or directories of *.csv
    std::vector<std::string> treatments = all_treatments();
    std::vector<std::size_t> budgets = {20, 30, 50, 100};
    std::size_t repeats = 20;
    std::uint64_t seed = 1;
    std::size_t shots = kDefaultShots;
    BackendKind backend = BackendKind::surrogate;
    BackendConfig llm;
    std::filesystem::path out_dir = "moot-out";
    std::size_t jobs = 1;
};

/// Expands directories into their *.csv files; sorted, duplicates removed.
std::vector<std::filesystem::path> resolve_datasets(const std::vector<std::filesystem::path>& inputs);

/// Canonical JSON of everything that influences results.
std::string config_json(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

/// Injective over (dataset, treatment, budget, repeat) for a fixed master
/// seed, given dataset < 2^16, treatment < 2^8, budget < 2^24, repeat < 2^16.
std::uint64_t cell_seed(std::uint64_t master, std::size_t dataset, std::size_t treatment, std::size_t budget,
                        std::size_t repeat);

struct CellRecord {
    std::string dataset;
    std::size_t x_dims = 0;
    std::string treatment;
    std::size_t budget = 0;
    std::size_t repeat = 0;
    std::uint64_t seed = 0;
    bool ok = true;
    std::string error;
    RowId best_row_id = 0;
    double best_score = 0.0;
    std::size_t labels_spent = 0;
    std::size_t failed_rounds = 0;
    double pool_min = 0.0;
    double pool_mean = 0.0;
    double wall_time = 0.0;  // kept out of results.jsonl so records replay byte-identically
};

std::string to_json_line(const CellRecord& r);
CellRecord record_from_json(const std::string& line);

struct ExperimentReport {
    std::vector<CellRecord> records;
    std::map<std::string, stats::RankTable> rank_tables;  // low, medium, high, all
    std::vector<std::string> envelope_violations;
    std::string manifest;
};

/// Runs every (dataset, treatment, budget, repeat) cell on a bounded pool of
/// cfg.jobs workers. Failed cells are recorded and the run continues.
/// `backend` overrides the backend named by the config.
ExperimentReport run_experiment(const ExperimentConfig& cfg, SynthesisBackend* backend = nullptr);

/// Scott-Knott per (dataset, budget) unit over ok records, then a rank table
/// per dimensionality stratum plus "all". Units missing a treatment are
/// skipped.
std::map<std::string, stats::RankTable> rank_records(const std::vector<CellRecord>& records, std::uint64_t seed,
                                                     const stats::ScottKnottOptions& options = {});

/// Records with pool_min <= best_score <= pool_mean violated.
std::vector<std::string> envelope_violations(const std::vector<CellRecord>& records);

/// results.jsonl, timings.csv, ranks_<stratum>.{csv,md}, manifest.json and
/// the curve files.
void write_report(const ExperimentReport& report, const std::filesystem::path& dir);

void write_rank_tables(const std::map<std::string, stats::RankTable>& tables, const std::filesystem::path& dir);

/// Reads results.jsonl and, when present, joins wall times from timings.csv.
std::vector<CellRecord> load_records(const std::filesystem::path& dir);

/// curve_envelope.csv: per dataset and budget, the pool optimum, pool mean
///   and each treatment's mean best score, datasets ordered by optimum, plus
///   an unweighted cross-dataset mean under dataset "ALL".
/// curve_budget.csv: treatment, budget, mean best score across datasets.
/// curve_runtime.csv: treatment, budget, mean wall seconds.
/// Throws std::invalid_argument for an empty record set.
std::vector<std::filesystem::path> emit_curves(const std::vector<CellRecord>& records,
                                               const std::filesystem::path& dir);

}  // namespace moot
