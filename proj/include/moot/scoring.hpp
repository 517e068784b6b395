#pragma once

#include <span>
#include <utility>
#include <vector>

#include "moot/table.hpp"

namespace moot {

/// Normalized goal target per goal column: 1 for maximize, 0 for minimize.
struct IdealPoint {
    std::vector<double> targets;

    static IdealPoint of(std::span<const ColumnSpec> goals);
};

/// Maps `value` onto [0, 1] using the column's lo/hi. A constant column
/// (lo == hi) maps to 0. Throws std::out_of_range when `value` lies outside
/// [lo, hi], which means the ColumnSpec is stale.
double normalize_goal(double value, const ColumnSpec& col);

/// Distance to heaven: the largest per-goal gap between a normalized goal
/// value and its ideal. 0 is perfect, 1 is worst-possible on some goal.
double chebyshev(std::span<const double> y, const IdealPoint& ideal, std::span<const ColumnSpec> goals);
double chebyshev(const Row& row, const IdealPoint& ideal, std::span<const ColumnSpec> goals);

/// Distance to heaven of every row in the table, in row-id order. This reads
/// hidden goal values, so it is for evaluation (pool optimum, pool mean),
/// never for acquisition.
std::vector<double> score_all(const Table& table);

/// A labeled row together with its distance to heaven.
struct Scored {
    RowId id = 0;
    double score = 0.0;

    friend bool operator==(const Scored&, const Scored&) = default;
};

/// Ascending by score; ties by ascending row id.
bool score_order(const Scored& a, const Scored& b);

/// ceil(fraction * n) without drift from inexact products like 0.3 * 10.
std::size_t ceil_fraction(double fraction, std::size_t n);

/// Sorts by score_order and puts the first ceil(fraction * n) rows in
/// `first`, the remainder in `second`. Throws std::invalid_argument for
/// fewer than two rows or a fraction outside (0, 1).
std::pair<std::vector<Scored>, std::vector<Scored>> best_rest_split(std::span<const Scored> rows, double fraction);

}  // namespace moot
