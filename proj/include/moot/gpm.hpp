#pragma once

#include <optional>
#include <span>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/Cholesky>

#include "moot/learners.hpp"

namespace moot {

/// Kernel and acquisition settings. Unset lengthscale defaults to sqrt(d)/2
/// for d encoded dimensions; unset signal variance defaults to var(y).
struct GpParams {
    std::optional<double> lengthscale;
    std::optional<double> signal_variance;
    double kappa = 2.0;
    double jitter_start = 1e-6;
    double jitter_max = 1e-2;
};

class GpFitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Posterior {
    double mean;
    double sd;
};

/// Squared-exponential GP with a constant prior mean equal to mean(y).
/// Immutable once fitted.
class GpModel {
public:
    /// `inputs` holds one encoded point per row. Jitter starts at
    /// params.jitter_start and doubles until the Gram matrix factors or
    /// params.jitter_max is passed, in which case GpFitError is thrown.
    static GpModel fit(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets, const GpParams& params = {});

    Posterior posterior(const Eigen::VectorXd& x) const;

    /// Posterior for every row of `queries`.
    void posterior(const Eigen::MatrixXd& queries, Eigen::VectorXd& mean, Eigen::VectorXd& sd) const;

    double kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;

    double lengthscale() const { return lengthscale_; }
    double signal_variance() const { return signal_variance_; }
    double jitter() const { return jitter_; }
    double kappa() const { return kappa_; }
    double prior_mean() const { return prior_mean_; }
    Eigen::Index size() const { return inputs_.rows(); }
    const Eigen::MatrixXd& inputs() const { return inputs_; }
    const Eigen::VectorXd& targets() const { return targets_; }

private:
    Eigen::MatrixXd cross_kernel(const Eigen::MatrixXd& queries) const;

    Eigen::MatrixXd inputs_;
    Eigen::VectorXd targets_;
    double lengthscale_ = 1.0;
    double signal_variance_ = 1.0;
    double jitter_ = 0.0;
    double kappa_ = 2.0;
    double prior_mean_ = 0.0;
    Eigen::LLT<Eigen::MatrixXd> cholesky_;
    Eigen::VectorXd alpha_;
};

/// Encodes the x values of `ids` as rows of a matrix (see encode_x).
Eigen::MatrixXd encode_rows(const Table& table, std::span<const RowId> ids);

/// Fits to the labeled rows of a ledger, targets being their
/// distance-to-heaven scores.
GpModel fit_labeled(const LabelLedger& ledger, const GpParams& params = {});

/// argmin over the pool of mean - kappa * sd (cost-minimizing UCB); ties by
/// lower id.
RowId acquire_ucb(const GpModel& model, const Table& table, std::span<const RowId> pool);

class UcbGpmStrategy final : public Strategy {
public:
    explicit UcbGpmStrategy(GpParams params = {}) : params_(params) {}
    std::string_view name() const override { return "ucb_gpm"; }
    RowId acquire(const LabelLedger& ledger, std::span<const RowId> pool, Rng& rng) override;

private:
    GpParams params_;
};

}  // namespace moot
