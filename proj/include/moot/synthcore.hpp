#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "moot/backends.hpp"
#include "moot/learners.hpp"

namespace moot {

inline constexpr std::size_t kDefaultShots = 3;
inline constexpr double kWarmFraction = 0.6;
inline constexpr double kSynthBestFraction = 0.5;
inline constexpr int kDefaultRoundRetries = 2;

/// Budget plan for one ensemble run: `warm` random labels, then `rounds`
/// independent sessions, each labeling `shots` sampled rows plus the row
/// nearest the synthesized candidate. budget == warm + rounds * (shots + 1).
struct SynthConfig {
    std::size_t budget = 0;
    std::size_t warm = 0;
    std::size_t rounds = 0;
    std::size_t shots = kDefaultShots;
    std::uint64_t seed = 0;
    int retries = kDefaultRoundRetries;  // re-asks per round on a malformed reply
};

/// Throws std::invalid_argument when the budget identity or any of
/// warm >= 2, rounds >= 1, shots >= 2 fails.
void validate(const SynthConfig& cfg);

/// rounds = floor(0.4 * budget / (shots + 1)), at least 1; warm takes the
/// remainder, so warm >= 0.6 * budget whenever rounds was not raised to 1.
/// Throws std::invalid_argument for budget < 10, shots < 2, or a budget that
/// cannot pay for one round plus two warm labels.
SynthConfig plan_budget(std::size_t budget, std::size_t shots = kDefaultShots, std::uint64_t seed = 0);

/// Explicit round count; warm = budget - rounds * (shots + 1).
SynthConfig plan_budget_with_rounds(std::size_t budget, std::size_t shots, std::size_t rounds, std::uint64_t seed = 0);

struct PromptBundle {
    std::string meta_markdown;
    std::string examples_markdown;
    std::vector<std::string> x_names;
    std::size_t example_count = 0;
};

/// One row per column (x columns, then goals): name, min, max, mean or mode,
/// sd or entropy (bits). x statistics cover every row; goal statistics
/// cover only `labeled`.
std::string build_meta(const Table& table, std::span<const Scored> labeled);

/// Best rows first, then rest; each tagged in a leading `class` column and
/// showing x and goal values.
std::string build_examples(const Table& table, std::span<const Scored> best, std::span<const Scored> rest);

PromptBundle make_bundle(const Table& table, std::string meta, std::span<const Scored> best,
                         std::span<const Scored> rest);

struct PromptText {
    std::string system;
    std::string human;
    std::string task;
};

/// The three-part few-shot prompt, with the meta and example tables filled in.
PromptText render_prompt(const PromptBundle& bundle);

/// Distance in x space between a table row and a synthetic row: per numeric
/// dim |delta| / (hi - lo), per symbolic dim a 0/1 mismatch, combined as the
/// Euclidean norm over sqrt(d).
double x_distance(const Table& table, const Row& row, const SyntheticRow& synthetic);

/// argmin of x_distance over the pool; ties by lower id.
RowId nearest_row(const Table& table, std::span<const RowId> pool, const SyntheticRow& synthetic);

struct RoundOutcome {
    std::vector<Scored> labels;  // shots sampled rows, then the synthesized pick
    bool aborted = false;
    std::string error;
};

/// One context-free session: sample and label `shots` unlabeled rows, split
/// them best/rest, prompt the backend, label the unlabeled row nearest its
/// proposal. A backend that keeps failing aborts the round; the sampled
/// labels stay spent.
RoundOutcome synthesize_round(const Table& table, LabelLedger& ledger, SynthesisBackend& backend,
                              std::size_t shots, Rng& rng, const std::string& meta,
                              int retries = kDefaultRoundRetries);

/// Warm start of cfg.warm random labels, cfg.rounds independent rounds, and
/// the best of everything labeled.
RunResult run_synthcore(const Table& table, SynthesisBackend& backend, const SynthConfig& cfg);

}  // namespace moot
