#include "wigp/gp.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Cholesky>
#include <fmt/format.h>

#include "wigp/error.hpp"

namespace wigp {

Eigen::VectorXd GramFactor::solve(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd y = lower.triangularView<Eigen::Lower>().solve(rhs);
    return lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

Eigen::MatrixXd GramFactor::solve(const Eigen::MatrixXd& rhs) const {
    Eigen::MatrixXd y = lower.triangularView<Eigen::Lower>().solve(rhs);
    return lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

Eigen::MatrixXd GramFactor::inverse() const {
    const Eigen::Index n = size();
    Eigen::MatrixXd linv = lower.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n));
    return linv.transpose() * linv;
}

Eigen::MatrixXd build_cov(const InputPoints& inputs, const KernelExpr& kernel, const HyperVector& theta) {
    if (inputs.empty()) throw InvalidArgument("build_cov needs at least one input");
    KernelEvaluator eval(kernel, theta);
    const auto n = static_cast<Eigen::Index>(inputs.size());
    Eigen::MatrixXd sigma(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        sigma(i, i) = eval.value(inputs[i], inputs[i], true);
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = eval.value(inputs[i], inputs[j], false);
            sigma(i, j) = v;
            sigma(j, i) = v;
        }
    }
    return sigma;
}

Eigen::MatrixXd build_cross_cov(const InputPoints& train, const InputPoints& query, const KernelExpr& kernel,
                                const HyperVector& theta) {
    KernelEvaluator eval(kernel, theta);
    Eigen::MatrixXd cross(static_cast<Eigen::Index>(train.size()), static_cast<Eigen::Index>(query.size()));
    for (std::size_t i = 0; i < train.size(); ++i)
        for (std::size_t j = 0; j < query.size(); ++j) cross(i, j) = eval.value(train[i], query[j], false);
    return cross;
}

GramFactor factorize(const Eigen::MatrixXd& sigma) {
    if (sigma.rows() != sigma.cols() || sigma.rows() == 0)
        throw InvalidArgument("factorize needs a non-empty square matrix");
    if (!sigma.allFinite()) throw NotPositiveDefinite("covariance matrix has non-finite entries");

    const double base = sigma.diagonal().mean();
    const Eigen::Index n = sigma.rows();
    for (double level : kJitterLadder) {
        const double jitter = level * base;
        if (level > 0.0 && !(jitter > 0.0)) continue;
        Eigen::MatrixXd jittered = sigma;
        jittered.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(jittered);
        if (llt.info() != Eigen::Success) continue;
        GramFactor factor;
        factor.lower = llt.matrixL();
        if (!factor.lower.diagonal().allFinite() || (factor.lower.diagonal().array() <= 0.0).any()) continue;
        factor.jitter = jitter;
        factor.log_det = 2.0 * factor.lower.diagonal().array().log().sum();
        return factor;
    }
    throw NotPositiveDefinite(fmt::format("{}x{} covariance is not positive definite at any jitter level", n, n));
}

namespace {

void check_sizes(const InputPoints& inputs, const Eigen::VectorXd& outputs) {
    if (inputs.empty()) throw InvalidArgument("at least one observation is required");
    if (static_cast<Eigen::Index>(inputs.size()) != outputs.size())
        throw InvalidArgument(
            fmt::format("{} inputs but {} outputs", inputs.size(), static_cast<std::size_t>(outputs.size())));
}

double gaussian_log_density(const GramFactor& factor, const Eigen::VectorXd& alpha, const Eigen::VectorXd& f) {
    const double n = static_cast<double>(f.size());
    return -0.5 * factor.log_det - 0.5 * f.dot(alpha) - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

}  // namespace

double log_marginal(const InputPoints& inputs, const Eigen::VectorXd& outputs, const KernelExpr& kernel,
                    const HyperVector& theta) {
    check_sizes(inputs, outputs);
    const GramFactor factor = factorize(build_cov(inputs, kernel, theta));
    const Eigen::VectorXd alpha = factor.solve(outputs);
    return gaussian_log_density(factor, alpha, outputs);
}

LogMarginalGradient grad_log_marginal(const InputPoints& inputs, const Eigen::VectorXd& outputs,
                                      const KernelExpr& kernel, const HyperVector& theta) {
    check_sizes(inputs, outputs);
    const auto n = static_cast<Eigen::Index>(inputs.size());
    const auto m = static_cast<Eigen::Index>(kernel.num_params());

    const GramFactor factor = factorize(build_cov(inputs, kernel, theta));
    const Eigen::VectorXd alpha = factor.solve(outputs);

    // dL = 1/2 tr(W dSigma), W = alpha alpha^T - Sigma^{-1}
    Eigen::MatrixXd w = alpha * alpha.transpose() - factor.inverse();

    LogMarginalGradient out;
    out.value = gaussian_log_density(factor, alpha, outputs);
    out.jitter = factor.jitter;
    out.dtheta = Eigen::VectorXd::Zero(m);
    out.dinput = Eigen::VectorXd::Zero(n);

    KernelEvaluator eval(kernel, theta);
    Eigen::VectorXd dk(m);
    std::span<double> dk_span(dk.data(), static_cast<std::size_t>(m));
    double dwarped = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        eval.value_and_grad(inputs[i], inputs[i], true, dk_span, dwarped);
        out.dtheta.noalias() += 0.5 * w(i, i) * dk;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            eval.value_and_grad(inputs[i], inputs[j], false, dk_span, dwarped);
            out.dtheta.noalias() += w(i, j) * dk;
            // Every kernel in the grammar is stationary, so d k(b,a)/d b = -d k(a,b)/d a.
            out.dinput[i] += w(i, j) * dwarped;
            out.dinput[j] -= w(i, j) * dwarped;
        }
    }
    return out;
}

PredictiveDistribution posterior(const InputPoints& train, const Eigen::VectorXd& outputs, const InputPoints& query,
                                 const KernelExpr& kernel, const HyperVector& theta) {
    check_sizes(train, outputs);
    const GramFactor factor = factorize(build_cov(train, kernel, theta));
    const Eigen::VectorXd alpha = factor.solve(outputs);
    const Eigen::MatrixXd cross = build_cross_cov(train, query, kernel, theta);
    const Eigen::MatrixXd v = factor.lower.triangularView<Eigen::Lower>().solve(cross);

    PredictiveDistribution pred;
    pred.query = query;
    pred.mean = cross.transpose() * alpha;
    pred.variance.resize(static_cast<Eigen::Index>(query.size()));
    KernelEvaluator eval(kernel, theta);
    for (std::size_t j = 0; j < query.size(); ++j) {
        const double prior = eval.value(query[j], query[j], true);
        const auto col = static_cast<Eigen::Index>(j);
        pred.variance[col] = std::max(0.0, prior - v.col(col).squaredNorm());
    }
    return pred;
}

Eigen::VectorXd sample_gaussian(const Eigen::MatrixXd& sigma, std::uint64_t seed) {
    const GramFactor factor = factorize(sigma);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(sigma.rows());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
    return factor.lower.triangularView<Eigen::Lower>() * z;
}

Eigen::VectorXd sample_prior(const InputPoints& inputs, const KernelExpr& kernel, const HyperVector& theta,
                             std::uint64_t seed) {
    return sample_gaussian(build_cov(inputs, kernel, theta), seed);
}

}  // namespace wigp
