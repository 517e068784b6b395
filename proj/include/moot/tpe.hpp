#pragma once

#include <span>
#include <vector>

#include "moot/encoding.hpp"
#include "moot/learners.hpp"

namespace moot {

inline constexpr double kDefaultGamma = 0.25;
inline constexpr double kDensityFloor = 1e-300;
inline constexpr double kBandwidthFloor = 1e-3;  // fraction of the column range

struct QuantileSplit {
    std::vector<Scored> low;   // feeds l(x)
    std::vector<Scored> high;  // feeds g(x)
    double y_star = 0.0;       // score of the first high row
};

/// Ascending by score (ties by id): the first ceil(gamma * n) rows are low,
/// the rest high. Both sides keep at least one row.
QuantileSplit split_by_quantile(std::span<const Scored> labeled, double gamma);

/// Per-dimension sample standard deviation of the numeric coordinates (0 for
/// a single point).
std::vector<double> numeric_spread(std::span<const MixedPoint> points);

/// Product of per-dimension Parzen estimates. Numeric dims use Gaussian
/// kernels with a per-dimension Scott bandwidth sd * n^(-1/5), floored at
/// kBandwidthFloor of the (unit) range; symbolic dims use Laplace-smoothed
/// level frequencies. `spread` overrides the sd (n stays the point count);
/// when empty the points' own spread is used.
class ParzenEstimator {
public:
    ParzenEstimator(std::vector<MixedPoint> points, std::vector<std::size_t> level_counts,
                    std::span<const double> spread = {});

    /// Log density, computed with log-sum-exp so it stays finite far from
    /// the support.
    double log_density(const MixedPoint& query) const;

    std::span<const double> bandwidths() const { return bandwidths_; }
    std::size_t size() const { return points_.size(); }

private:
    std::vector<MixedPoint> points_;
    std::vector<std::size_t> level_counts_;
    std::vector<double> bandwidths_;
    std::vector<std::vector<double>> level_log_freq_;
};

/// Density of `query` under a Parzen estimator over `points`, floored at
/// kDensityFloor.
double kde_density(std::span<const MixedPoint> points, const MixedPoint& query,
                   std::span<const std::size_t> level_counts = {});

/// l(x) over the low rows and g(x) over the high rows. Both take their
/// kernel scale from the spread of all labeled rows, so a low set of one or
/// two neighbouring rows does not collapse to a needle.
struct ParzenPair {
    double gamma;
    double y_star;
    ParzenEstimator l;
    ParzenEstimator g;

    static ParzenPair fit(const Table& table, std::span<const Scored> labeled, double gamma = kDefaultGamma);

    /// log g(x) - log l(x)
    double log_ratio(const MixedPoint& x) const { return g.log_density(x) - l.log_density(x); }
};

/// argmin over the pool of g(x)/l(x); ties by lower id.
RowId acquire_tpe(const ParzenPair& pair, const Table& table, std::span<const RowId> pool);

class TpeStrategy final : public Strategy {
public:
    explicit TpeStrategy(double gamma = kDefaultGamma) : gamma_(gamma) {}
    std::string_view name() const override { return "tpe"; }
    RowId acquire(const LabelLedger& ledger, std::span<const RowId> pool, Rng& rng) override;

private:
    double gamma_;
};

}  // namespace moot
