#pragma once

#include <Eigen/Core>

#include "wigp/kernels.hpp"

namespace wigp {

/// Prior on the stretch factor of each gap between adjacent inputs: a
/// log-normal with location 0 (median 1, i.e. "no warp") and log-scale sigma.
struct WarpPrior {
    double log_scale = 1.0;

    /// log p(lambda) as a density over lambda, evaluated at lambda = exp(log_stretch).
    double log_density(double log_stretch) const;
    /// d log p(exp(u)) / d u.
    double dlog_density(double log_stretch) const;
};

/// Per-gap log stretch factors and the warped inputs they induce.
struct WarpState {
    Eigen::VectorXd log_stretch;  // n - 1 entries
    Eigen::VectorXd warped;       // n entries, warped[0] == x[0]

    static WarpState identity(const Eigen::VectorXd& x);
    static WarpState from_log_stretch(const Eigen::VectorXd& x, const Eigen::VectorXd& log_stretch);
};

/// Cumulative warp: xw[0] = x[0], xw[i] = xw[i-1] + exp(u[i-1]) (x[i] - x[i-1]).
Eigen::VectorXd warp_inputs(const Eigen::VectorXd& x, const Eigen::VectorXd& log_stretch);

/// Sum of log prior densities over all gaps (normalizing constant of the joint
/// objective dropped).
double warp_log_prior(const Eigen::VectorXd& log_stretch, const WarpPrior& prior);
Eigen::VectorXd warp_log_prior_grad(const Eigen::VectorXd& log_stretch, const WarpPrior& prior);

/// Maps a gradient with respect to the warped inputs onto the log stretch
/// factors. Gap i moves every warped input after it, so this is a suffix sum.
Eigen::VectorXd chain_warp_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& log_stretch,
                                    const Eigen::VectorXd& dwarped);

/// Pairs warped and original time for kernels that mix `@orig` leaves in.
InputPoints combine_inputs(const Eigen::VectorXd& warped, const Eigen::VectorXd& original);

struct WgpObjective {
    double value = 0.0;  // log_marginal + log_prior
    double log_marginal = 0.0;
    double log_prior = 0.0;
    Eigen::VectorXd dtheta;
    Eigen::VectorXd dlog_stretch;
    double jitter = 0.0;
};

/// Joint objective of the warped-input GP: GP log marginal on warped inputs
/// plus the warp prior, with gradients for hyperparameters and log stretches.
WgpObjective wgp_objective(const Eigen::VectorXd& x, const Eigen::VectorXd& f, const Eigen::VectorXd& log_stretch,
                           const KernelExpr& kernel, const HyperVector& theta, const WarpPrior& prior);

/// Warped location of future inputs, continuing the last gap's stretch:
/// xw_* = xw_n + lambda_n (x_* - x_n). A single training point uses lambda = 1.
Eigen::VectorXd extrapolate_warp(const Eigen::VectorXd& x, const Eigen::VectorXd& warped,
                                 const Eigen::VectorXd& query);

/// Throws InvalidArgument unless x is strictly increasing and finite.
void require_strictly_increasing(const Eigen::VectorXd& x, const char* what);

}  // namespace wigp
