#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "moot/rng.hpp"

namespace moot::stats {

inline constexpr double kSmallEffect = 0.147;
inline constexpr std::size_t kDefaultResamples = 512;
inline constexpr double kDefaultAlpha = 0.05;

struct TreatmentSamples {
    std::string name;
    std::vector<double> values;
};

struct RankGroup {
    int rank = 0;
    std::vector<std::string> members;
    double mean = 0.0;
};

/// Groups ordered by ascending mean, ranks 0, 1, 2, ...
using RankedGroups = std::vector<RankGroup>;

double mean(std::span<const double> v);

/// (#{a_i > b_j} - #{a_i < b_j}) / (|a| * |b|), computed over sorted copies.
double cliffs_delta(std::span<const double> a, std::span<const double> b);

/// True when |mean(a) - mean(b)| exceeds the (1 - alpha) quantile of the
/// same statistic over `resamples` draws that pool a and b and resplit them
/// with replacement into groups of |a| and |b|. Throws
/// std::invalid_argument for resamples == 0 or fewer than two samples on a
/// side.
bool bootstrap_distinct(std::span<const double> a, std::span<const double> b, std::size_t resamples, double alpha,
                        Rng& rng);

struct ScottKnottOptions {
    double small_effect = kSmallEffect;
    std::size_t resamples = kDefaultResamples;
    double alpha = kDefaultAlpha;
};

/// Sorts treatments by mean, then recursively cuts at the boundary that
/// maximizes the between-group sum of squares, recursing only while the two
/// sides' pooled samples are bootstrap-distinct and differ by more than a
/// small Cliff's delta.
RankedGroups scott_knott(std::vector<TreatmentSamples> treatments, const ScottKnottOptions& options, Rng& rng);

/// Percentage of datasets placing each treatment at each rank, rounded by
/// largest remainder so every row sums to exactly 100.
struct RankTable {
    std::vector<std::string> treatments;          // by descending rank-0 share
    std::vector<std::vector<int>> percent;        // [treatment][rank]
    std::size_t datasets = 0;

    std::size_t rank_columns() const { return percent.empty() ? 0 : percent.front().size(); }
    std::string to_csv() const;
    /// Markdown layout with empty cells for zero percentages.
    std::string to_markdown() const;
};

/// Throws std::invalid_argument when datasets rank different treatment sets.
/// At least `min_rank_columns` rank columns are emitted.
RankTable rank_table(const std::map<std::string, RankedGroups>& per_dataset, std::size_t min_rank_columns = 7);

/// Smallest n with 1 - (1 - epsilon)^n >= confidence, at least 1.
std::size_t neo_samples(double confidence, double epsilon);

}  // namespace moot::stats
