#include "wigp/warp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "wigp/error.hpp"
#include "wigp/gp.hpp"

namespace wigp {

void require_strictly_increasing(const Eigen::VectorXd& x, const char* what) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i])) throw InvalidArgument(fmt::format("{}: non-finite value at index {}", what, i));
        if (i > 0 && !(x[i] > x[i - 1]))
            throw InvalidArgument(fmt::format("{}: inputs must be strictly increasing (index {}: {} after {})", what,
                                              i, x[i], x[i - 1]));
    }
}

double WarpPrior::log_density(double log_stretch) const {
    const double s = log_scale;
    return -log_stretch - std::log(s) - 0.5 * std::log(2.0 * std::numbers::pi) -
           0.5 * log_stretch * log_stretch / (s * s);
}

double WarpPrior::dlog_density(double log_stretch) const { return -1.0 - log_stretch / (log_scale * log_scale); }

WarpState WarpState::identity(const Eigen::VectorXd& x) {
    return from_log_stretch(x, Eigen::VectorXd::Zero(std::max<Eigen::Index>(x.size() - 1, 0)));
}

WarpState WarpState::from_log_stretch(const Eigen::VectorXd& x, const Eigen::VectorXd& log_stretch) {
    return {log_stretch, warp_inputs(x, log_stretch)};
}

Eigen::VectorXd warp_inputs(const Eigen::VectorXd& x, const Eigen::VectorXd& log_stretch) {
    if (x.size() == 0) throw InvalidArgument("warp_inputs: empty input vector");
    if (log_stretch.size() != x.size() - 1)
        throw InvalidArgument(fmt::format("warp_inputs: {} inputs need {} log stretches, got {}", x.size(),
                                          x.size() - 1, log_stretch.size()));
    require_strictly_increasing(x, "warp_inputs");
    // Accumulate the displacement from x rather than x itself so that a zero
    // log stretch reproduces x exactly.
    Eigen::VectorXd warped(x.size());
    warped[0] = x[0];
    double offset = 0.0;
    for (Eigen::Index i = 1; i < x.size(); ++i) {
        offset += std::expm1(log_stretch[i - 1]) * (x[i] - x[i - 1]);
        warped[i] = x[i] + offset;
    }
    return warped;
}

double warp_log_prior(const Eigen::VectorXd& log_stretch, const WarpPrior& prior) {
    if (!(prior.log_scale > 0.0)) throw InvalidArgument("warp prior log-scale must be positive");
    double total = 0.0;
    for (Eigen::Index i = 0; i < log_stretch.size(); ++i) {
        if (!std::isfinite(log_stretch[i]))
            throw InvalidArgument(fmt::format("warp_log_prior: non-finite log stretch at gap {}", i));
        total += prior.log_density(log_stretch[i]);
    }
    return total;
}

Eigen::VectorXd warp_log_prior_grad(const Eigen::VectorXd& log_stretch, const WarpPrior& prior) {
    Eigen::VectorXd g(log_stretch.size());
    for (Eigen::Index i = 0; i < log_stretch.size(); ++i) g[i] = prior.dlog_density(log_stretch[i]);
    return g;
}

Eigen::VectorXd chain_warp_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& log_stretch,
                                    const Eigen::VectorXd& dwarped) {
    const Eigen::Index gaps = log_stretch.size();
    Eigen::VectorXd out(gaps);
    double suffix = 0.0;
    for (Eigen::Index i = gaps - 1; i >= 0; --i) {
        suffix += dwarped[i + 1];
        out[i] = std::exp(log_stretch[i]) * (x[i + 1] - x[i]) * suffix;
    }
    return out;
}

InputPoints combine_inputs(const Eigen::VectorXd& warped, const Eigen::VectorXd& original) {
    if (warped.size() != original.size())
        throw InvalidArgument(
            fmt::format("combine_inputs: {} warped vs {} original inputs", warped.size(), original.size()));
    InputPoints points;
    points.reserve(static_cast<std::size_t>(warped.size()));
    for (Eigen::Index i = 0; i < warped.size(); ++i) points.push_back(InputPoint::paired(warped[i], original[i]));
    return points;
}

WgpObjective wgp_objective(const Eigen::VectorXd& x, const Eigen::VectorXd& f, const Eigen::VectorXd& log_stretch,
                           const KernelExpr& kernel, const HyperVector& theta, const WarpPrior& prior) {
    const Eigen::VectorXd warped = warp_inputs(x, log_stretch);
    const auto lml = grad_log_marginal(combine_inputs(warped, x), f, kernel, theta);

    WgpObjective out;
    out.log_marginal = lml.value;
    out.log_prior = warp_log_prior(log_stretch, prior);
    out.value = out.log_marginal + out.log_prior;
    out.dtheta = lml.dtheta;
    out.dlog_stretch = chain_warp_gradient(x, log_stretch, lml.dinput) + warp_log_prior_grad(log_stretch, prior);
    out.jitter = lml.jitter;
    return out;
}

Eigen::VectorXd extrapolate_warp(const Eigen::VectorXd& x, const Eigen::VectorXd& warped,
                                 const Eigen::VectorXd& query) {
    const Eigen::Index n = x.size();
    if (n == 0 || warped.size() != n)
        throw InvalidArgument("extrapolate_warp: training and warped inputs must be non-empty and equal length");
    double stretch = 1.0;
    if (n >= 2) stretch = (warped[n - 1] - warped[n - 2]) / (x[n - 1] - x[n - 2]);
    Eigen::VectorXd out(query.size());
    for (Eigen::Index j = 0; j < query.size(); ++j) {
        if (!(query[j] > x[n - 1]))
            throw InvalidArgument(fmt::format(
                "extrapolate_warp: query {} is not after the last training input {}", query[j], x[n - 1]));
        out[j] = query[j] + (warped[n - 1] - x[n - 1]) + (stretch - 1.0) * (query[j] - x[n - 1]);
    }
    return out;
}

}  // namespace wigp
