#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Core>

#include "wigp/data.hpp"
#include "wigp/kernels.hpp"
#include "wigp/warp.hpp"

namespace wigp {

/// Optimizer and prior settings shared by fit_gp and fit_wgp.
struct FitConfig {
    int max_iterations = 1000;
    double gradient_tolerance = 1e-5;
    int restarts = 1;
    std::uint64_t seed = 0;
    /// Log-scale of the log-normal prior on stretch factors.
    double sigma_d = 1.0;
    /// Log-scale of the log-normal hyperprior on every kernel hyperparameter.
    double hyperprior_scale = 3.0;
    /// Initial hyperparameter strategy; only "heuristic" exists.
    std::string init = "heuristic";

    void validate() const;
    std::string to_text() const;
    static FitConfig from_text(const std::string& text);
};

enum class ModelKind { gp, wgp };

struct TrainedModel {
    ModelKind kind = ModelKind::gp;
    std::string kernel_source;
    HyperVector theta;
    /// Identity warp for plain GP fits.
    WarpState warp;
    /// Training data exactly as fitted.
    TimeSeries train;
    double objective = 0.0;
    bool converged = false;
    double gradient_norm = 0.0;
    int iterations = 0;
    int evaluations = 0;
    int restart = 0;
    int failed_restarts = 0;
    double jitter = 0.0;
    /// Priors the objective was evaluated under.
    double sigma_d = 1.0;
    double hyperprior_scale = 3.0;
};

/// Independent N(0, scale^2) log-density on each log hyperparameter.
double hyperprior_logpdf(const Eigen::VectorXd& log_theta, double scale);
Eigen::VectorXd hyperprior_grad(const Eigen::VectorXd& log_theta, double scale);

/// Heuristic starting point: length scales and periods at a quarter of the
/// input range, periodic shapes at 1, scales at the output variance, noise at
/// 1% of it.
Eigen::VectorXd initial_log_theta(const KernelExpr& kernel, const TimeSeries& series);

/// Maximizes log marginal + hyperprior over log hyperparameters.
TrainedModel fit_gp(const TimeSeries& series, const KernelExpr& kernel, const FitConfig& config);

/// Jointly maximizes the warped objective + hyperprior over log
/// hyperparameters and log stretches (which start at 0 on every restart).
TrainedModel fit_wgp(const TimeSeries& series, const KernelExpr& kernel, const FitConfig& config);

/// Re-evaluates the training objective at the stored parameters.
double model_objective(const TrainedModel& model, const KernelExpr& kernel);

}  // namespace wigp
