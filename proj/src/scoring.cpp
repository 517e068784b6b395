#include "moot/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace moot {

IdealPoint IdealPoint::of(std::span<const ColumnSpec> goals) {
    IdealPoint ideal;
    for (const auto& g : goals) {
        if (!g.is_goal()) throw std::invalid_argument("ideal point over non-goal column '" + g.name + "'");
        ideal.targets.push_back(g.direction == Direction::maximize ? 1.0 : 0.0);
    }
    return ideal;
}

double normalize_goal(double value, const ColumnSpec& col) {
    if (value < col.lo || value > col.hi)
        throw std::out_of_range("value outside [lo, hi] of column '" + col.name + "'");
    if (col.hi == col.lo) return 0.0;
    return (value - col.lo) / (col.hi - col.lo);
}

double chebyshev(std::span<const double> y, const IdealPoint& ideal, std::span<const ColumnSpec> goals) {
    if (y.size() != goals.size() || ideal.targets.size() != goals.size())
        throw std::invalid_argument("goal vector, ideal point and goal columns differ in length");
    double worst = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
        worst = std::max(worst, std::abs(normalize_goal(y[i], goals[i]) - ideal.targets[i]));
    return worst;
}

double chebyshev(const Row& row, const IdealPoint& ideal, std::span<const ColumnSpec> goals) {
    return chebyshev(row.y, ideal, goals);
}

std::vector<double> score_all(const Table& table) {
    auto ideal = IdealPoint::of(table.goal_columns());
    std::vector<double> scores;
    scores.reserve(table.size());
    for (const auto& row : table.rows()) scores.push_back(chebyshev(row, ideal, table.goal_columns()));
    return scores;
}

bool score_order(const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.id < b.id;
}

std::size_t ceil_fraction(double fraction, std::size_t n) {
    return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
}

std::pair<std::vector<Scored>, std::vector<Scored>> best_rest_split(std::span<const Scored> rows, double fraction) {
    if (rows.size() < 2) throw std::invalid_argument("best/rest split needs at least two labeled rows");
    if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("split fraction must lie in (0, 1)");
    std::vector<Scored> sorted(rows.begin(), rows.end());
    std::sort(sorted.begin(), sorted.end(), score_order);
    std::size_t cut = std::clamp<std::size_t>(ceil_fraction(fraction, sorted.size()), 1, sorted.size() - 1);
    std::vector<Scored> rest(sorted.begin() + static_cast<std::ptrdiff_t>(cut), sorted.end());
    sorted.resize(cut);
    return {std::move(sorted), std::move(rest)};
}

}  // namespace moot
