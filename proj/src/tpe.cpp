#include "moot/tpe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace moot {

QuantileSplit split_by_quantile(std::span<const Scored> labeled, double gamma) {
    if (labeled.size() < 2) throw std::invalid_argument("quantile split needs at least two labeled rows");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
    std::vector<Scored> sorted(labeled.begin(), labeled.end());
    std::sort(sorted.begin(), sorted.end(), score_order);
    std::size_t cut = std::clamp<std::size_t>(ceil_fraction(gamma, sorted.size()), 1, sorted.size() - 1);
    QuantileSplit split;
    split.low.assign(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(cut));
    split.high.assign(sorted.begin() + static_cast<std::ptrdiff_t>(cut), sorted.end());
    split.y_star = split.high.front().score;
    return split;
}

std::vector<double> numeric_spread(std::span<const MixedPoint> points) {
    if (points.empty()) throw std::invalid_argument("spread of an empty point set");
    const double n = static_cast<double>(points.size());
    std::vector<double> out;
    for (std::size_t d = 0; d < points.front().numeric.size(); ++d) {
        double mean = 0.0;
        for (const auto& p : points) mean += p.numeric[d];
        mean /= n;
        double ss = 0.0;
        for (const auto& p : points) ss += (p.numeric[d] - mean) * (p.numeric[d] - mean);
        out.push_back(points.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0);
    }
    return out;
}

ParzenEstimator::ParzenEstimator(std::vector<MixedPoint> points, std::vector<std::size_t> level_counts,
                                 std::span<const double> spread)
    : points_(std::move(points)), level_counts_(std::move(level_counts)) {
    if (points_.empty()) throw std::invalid_argument("Parzen estimator needs at least one point");
    const double n = static_cast<double>(points_.size());
    const std::size_t dims = points_.front().numeric.size();
    const double scott = std::pow(n, -1.0 / 5.0);
    if (!spread.empty() && spread.size() != dims) throw std::invalid_argument("spread must cover every numeric dim");
    auto own = spread.empty() ? numeric_spread(points_) : std::vector<double>(spread.begin(), spread.end());
    for (std::size_t d = 0; d < dims; ++d) bandwidths_.push_back(std::max(own[d] * scott, kBandwidthFloor));
    const std::size_t sym_dims = points_.front().symbolic.size();
    if (level_counts_.size() < sym_dims) level_counts_.resize(sym_dims, 0);
    for (std::size_t s = 0; s < sym_dims; ++s) {
        // Observed codes may exceed the declared level count for ad-hoc inputs.
        std::size_t k = level_counts_[s];
        for (const auto& p : points_) k = std::max<std::size_t>(k, static_cast<std::size_t>(p.symbolic[s] + 1));
        k = std::max<std::size_t>(k, 1);
        level_counts_[s] = k;
        std::vector<double> counts(k, 0.0);
        for (const auto& p : points_)
            if (p.symbolic[s] >= 0) counts[static_cast<std::size_t>(p.symbolic[s])] += 1.0;
        std::vector<double> logs;
        for (double c : counts) logs.push_back(std::log((c + 1.0) / (n + static_cast<double>(k))));
        level_log_freq_.push_back(std::move(logs));
    }
}

double ParzenEstimator::log_density(const MixedPoint& query) const {
    const double n = static_cast<double>(points_.size());
    double total = 0.0;
    std::vector<double> terms(points_.size());
    for (std::size_t d = 0; d < bandwidths_.size(); ++d) {
        const double h = bandwidths_[d];
        double peak = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < points_.size(); ++i) {
            double z = (query.numeric[d] - points_[i].numeric[d]) / h;
            terms[i] = -0.5 * z * z;
            peak = std::max(peak, terms[i]);
        }
        double sum = 0.0;
        for (double t : terms) sum += std::exp(t - peak);
        total += peak + std::log(sum / n) - std::log(h * std::sqrt(2.0 * std::numbers::pi));
    }
    for (std::size_t s = 0; s < level_log_freq_.size(); ++s) {
        int level = query.symbolic[s];
        const auto& logs = level_log_freq_[s];
        if (level >= 0 && static_cast<std::size_t>(level) < logs.size())
            total += logs[static_cast<std::size_t>(level)];
        else
            total += std::log(1.0 / (n + static_cast<double>(level_counts_[s])));
    }
    return total;
}

double kde_density(std::span<const MixedPoint> points, const MixedPoint& query,
                   std::span<const std::size_t> level_counts) {
    ParzenEstimator est({points.begin(), points.end()}, {level_counts.begin(), level_counts.end()});
    return std::max(std::exp(est.log_density(query)), kDensityFloor);
}

namespace {

std::vector<MixedPoint> encode_scored(const Table& table, std::span<const Scored> rows) {
    std::vector<MixedPoint> out;
    for (const auto& s : rows) out.push_back(encode_mixed(table.row(s.id).x, table.x_columns()));
    return out;
}

}  // namespace

ParzenPair ParzenPair::fit(const Table& table, std::span<const Scored> labeled, double gamma) {
    auto split = split_by_quantile(labeled, gamma);
    auto counts = level_counts(table.x_columns());
    auto spread = numeric_spread(encode_scored(table, labeled));
    return ParzenPair{gamma, split.y_star, ParzenEstimator(encode_scored(table, split.low), counts, spread),
                      ParzenEstimator(encode_scored(table, split.high), counts, spread)};
}

RowId acquire_tpe(const ParzenPair& pair, const Table& table, std::span<const RowId> pool) {
    if (pool.empty()) throw std::invalid_argument("cannot acquire from an empty pool");
    RowId chosen = pool.front();
    double best = std::numeric_limits<double>::infinity();
    bool first = true;
    for (RowId id : pool) {
        double v = pair.log_ratio(encode_mixed(table.row(id).x, table.x_columns()));
        if (first || v < best || (v == best && id < chosen)) {
            best = v;
            chosen = id;
            first = false;
        }
    }
    return chosen;
}

RowId TpeStrategy::acquire(const LabelLedger& ledger, std::span<const RowId> pool, Rng&) {
    return acquire_tpe(ParzenPair::fit(ledger.table(), ledger.labeled(), gamma_), ledger.table(), pool);
}

}  // namespace moot
