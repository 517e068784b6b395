#include "moot/gpm.hpp"

#include <algorithm>
#include <cmath>

#include "moot/encoding.hpp"

namespace moot {

double GpModel::kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    return signal_variance_ * std::exp(-(a - b).squaredNorm() / (2.0 * lengthscale_ * lengthscale_));
}

Eigen::MatrixXd GpModel::cross_kernel(const Eigen::MatrixXd& queries) const {
    // ||q - x||^2 = ||q||^2 + ||x||^2 - 2 q.x
    Eigen::VectorXd qn = queries.rowwise().squaredNorm();
    Eigen::VectorXd xn = inputs_.rowwise().squaredNorm();
    Eigen::MatrixXd d2 = (-2.0 * queries * inputs_.transpose()).colwise() + qn;
    d2.rowwise() += xn.transpose();
    const double scale = -1.0 / (2.0 * lengthscale_ * lengthscale_);
    return (d2.cwiseMax(0.0) * scale).array().exp().matrix() * signal_variance_;
}

GpModel GpModel::fit(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets, const GpParams& params) {
    if (inputs.rows() < 2) throw std::invalid_argument("GP fit needs at least two points");
    if (inputs.rows() != targets.size()) throw std::invalid_argument("GP inputs and targets differ in length");

    GpModel m;
    m.inputs_ = inputs;
    m.targets_ = targets;
    m.kappa_ = params.kappa;
    m.prior_mean_ = targets.mean();
    const double d = static_cast<double>(std::max<Eigen::Index>(inputs.cols(), 1));
    m.lengthscale_ = params.lengthscale.value_or(std::sqrt(d) / 2.0);
    if (params.signal_variance) {
        m.signal_variance_ = *params.signal_variance;
    } else {
        Eigen::VectorXd centered = targets.array() - m.prior_mean_;
        m.signal_variance_ = std::max(centered.squaredNorm() / static_cast<double>(targets.size()), 1e-12);
    }

    const Eigen::Index n = inputs.rows();
    Eigen::MatrixXd gram(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j)
            gram(i, j) = gram(j, i) = m.kernel(inputs.row(i).transpose(), inputs.row(j).transpose());

    for (double jitter = params.jitter_start; jitter <= params.jitter_max * (1.0 + 1e-12); jitter *= 2.0) {
        Eigen::MatrixXd k = gram;
        k.diagonal().array() += jitter;
        m.cholesky_.compute(k);
        if (m.cholesky_.info() == Eigen::Success) {
            m.jitter_ = jitter;
            m.alpha_ = m.cholesky_.solve((targets.array() - m.prior_mean_).matrix());
            return m;
        }
    }
    throw GpFitError("Gram matrix not positive definite even with jitter " + std::to_string(params.jitter_max));
}

Posterior GpModel::posterior(const Eigen::VectorXd& x) const {
    Eigen::VectorXd mean, sd;
    posterior(Eigen::MatrixXd(x.transpose()), mean, sd);
    return {mean(0), sd(0)};
}

void GpModel::posterior(const Eigen::MatrixXd& queries, Eigen::VectorXd& mean, Eigen::VectorXd& sd) const {
    Eigen::MatrixXd cross = cross_kernel(queries);  // q x n
    mean = (cross * alpha_).array() + prior_mean_;
    Eigen::MatrixXd v = cholesky_.matrixL().solve(cross.transpose());  // n x q
    Eigen::VectorXd var = (signal_variance_ - v.colwise().squaredNorm().array()).matrix();
    sd = var.cwiseMax(0.0).cwiseSqrt();
}

Eigen::MatrixXd encode_rows(const Table& table, std::span<const RowId> ids) {
    const auto cols = table.x_columns();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(encoded_dimension(cols)));
    for (std::size_t i = 0; i < ids.size(); ++i) {
        auto enc = encode_x(table.row(ids[i]), cols);
        out.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(enc.data(), out.cols());
    }
    return out;
}

GpModel fit_labeled(const LabelLedger& ledger, const GpParams& params) {
    std::vector<RowId> ids;
    Eigen::VectorXd y(static_cast<Eigen::Index>(ledger.spent()));
    for (const auto& s : ledger.labeled()) {
        y(static_cast<Eigen::Index>(ids.size())) = s.score;
        ids.push_back(s.id);
    }
    return GpModel::fit(encode_rows(ledger.table(), ids), y, params);
}

RowId acquire_ucb(const GpModel& model, const Table& table, std::span<const RowId> pool) {
    if (pool.empty()) throw std::invalid_argument("cannot acquire from an empty pool");
    Eigen::VectorXd mean, sd;
    model.posterior(encode_rows(table, pool), mean, sd);
    RowId chosen = pool.front();
    double best = mean(0) - model.kappa() * sd(0);
    for (std::size_t i = 1; i < pool.size(); ++i) {
        auto k = static_cast<Eigen::Index>(i);
        double v = mean(k) - model.kappa() * sd(k);
        if (v < best || (v == best && pool[i] < chosen)) {
            best = v;
            chosen = pool[i];
        }
    }
    return chosen;
}

RowId UcbGpmStrategy::acquire(const LabelLedger& ledger, std::span<const RowId> pool, Rng&) {
    return acquire_ucb(fit_labeled(ledger, params_), ledger.table(), pool);
}

}  // namespace moot
