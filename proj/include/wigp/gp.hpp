#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Core>

#include "wigp/kernels.hpp"

namespace wigp {

/// Cholesky factor of a covariance matrix plus whatever diagonal jitter was
/// needed to make it factorize.
struct GramFactor {
    Eigen::MatrixXd lower;
    double jitter = 0.0;
    double log_det = 0.0;

    Eigen::Index size() const { return lower.rows(); }
    /// Solves (Sigma + jitter I) x = rhs.
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
    Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
    /// Dense inverse of the jittered covariance.
    Eigen::MatrixXd inverse() const;
};

struct PredictiveDistribution {
    InputPoints query;
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;
};

/// Jitter multipliers tried in order, relative to mean(diag Sigma).
inline constexpr std::array<double, 5> kJitterLadder = {0.0, 1e-10, 1e-8, 1e-6, 1e-4};

/// Training covariance: noise leaves only on the diagonal.
Eigen::MatrixXd build_cov(const InputPoints& inputs, const KernelExpr& kernel, const HyperVector& theta);

/// Cross covariance between training rows and query columns, noise excluded.
Eigen::MatrixXd build_cross_cov(const InputPoints& train, const InputPoints& query, const KernelExpr& kernel,
                                const HyperVector& theta);

/// Cholesky with the escalating jitter ladder. Throws NotPositiveDefinite.
GramFactor factorize(const Eigen::MatrixXd& sigma);

/// Zero-mean Gaussian log marginal likelihood of `outputs`.
double log_marginal(const InputPoints& inputs, const Eigen::VectorXd& outputs, const KernelExpr& kernel,
                    const HyperVector& theta);

struct LogMarginalGradient {
    double value = 0.0;
    Eigen::VectorXd dtheta;  // wrt log hyperparameters
    Eigen::VectorXd dinput;  // wrt the warped coordinate of each input
    double jitter = 0.0;
};

LogMarginalGradient grad_log_marginal(const InputPoints& inputs, const Eigen::VectorXd& outputs,
                                      const KernelExpr& kernel, const HyperVector& theta);

/// Posterior predictive for noisy observations at `query`: latent variance
/// plus the noise leaves' variance.
PredictiveDistribution posterior(const InputPoints& train, const Eigen::VectorXd& outputs, const InputPoints& query,
                                 const KernelExpr& kernel, const HyperVector& theta);

/// f = L z with z ~ N(0, I) drawn from a generator seeded with `seed`.
Eigen::VectorXd sample_prior(const InputPoints& inputs, const KernelExpr& kernel, const HyperVector& theta,
                             std::uint64_t seed);

/// Same as above for an already assembled covariance matrix.
Eigen::VectorXd sample_gaussian(const Eigen::MatrixXd& sigma, std::uint64_t seed);

}  // namespace wigp
