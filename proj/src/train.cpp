#include "wigp/train.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>

#include <fmt/format.h>

#include "wigp/error.hpp"
#include "wigp/gp.hpp"
#include "wigp/keyvalue.hpp"
#include "wigp/lbfgs.hpp"
#include "wigp/log.hpp"

namespace wigp {

// ---------------------------------------------------------------------------
// FitConfig

void FitConfig::validate() const {
    if (max_iterations < 1) throw InvalidArgument("max_iterations must be at least 1");
    if (!(gradient_tolerance > 0.0)) throw InvalidArgument("gradient_tolerance must be positive");
    if (restarts < 1) throw InvalidArgument("restarts must be at least 1");
    if (!(sigma_d > 0.0) || !std::isfinite(sigma_d)) throw InvalidArgument("sigma_d must be positive");
    if (!(hyperprior_scale > 0.0) || !std::isfinite(hyperprior_scale))
        throw InvalidArgument("hyperprior_scale must be positive");
    if (init != "heuristic") throw InvalidArgument(fmt::format("unknown init strategy '{}'", init));
}

std::string FitConfig::to_text() const {
    std::string out;
    out += "max_iterations = " + std::to_string(max_iterations) + "\n";
    out += "gradient_tolerance = " + format_real(gradient_tolerance) + "\n";
    out += "restarts = " + std::to_string(restarts) + "\n";
    out += "seed = " + std::to_string(seed) + "\n";
    out += "sigma_d = " + format_real(sigma_d) + "\n";
    out += "hyperprior_scale = " + format_real(hyperprior_scale) + "\n";
    out += "init = " + init + "\n";
    return out;
}

FitConfig FitConfig::from_text(const std::string& text) {
    FitConfig c;
    for (const auto& [key, value] : parse_key_values(text)) {
        if (key == "max_iterations")
            c.max_iterations = static_cast<int>(parse_integer(key, value));
        else if (key == "gradient_tolerance")
            c.gradient_tolerance = parse_real(key, value);
        else if (key == "restarts")
            c.restarts = static_cast<int>(parse_integer(key, value));
        else if (key == "seed")
            c.seed = static_cast<std::uint64_t>(parse_integer(key, value));
        else if (key == "sigma_d")
            c.sigma_d = parse_real(key, value);
        else if (key == "hyperprior_scale")
            c.hyperprior_scale = parse_real(key, value);
        else if (key == "init")
            c.init = value;
        else
            throw DataError(fmt::format("fit config: unknown key '{}'", key));
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Priors and initialization

double hyperprior_logpdf(const Eigen::VectorXd& log_theta, double scale) {
    const double m = static_cast<double>(log_theta.size());
    return -0.5 * log_theta.squaredNorm() / (scale * scale) - m * (std::log(scale) + 0.5 * std::log(2.0 * std::numbers::pi));
}

Eigen::VectorXd hyperprior_grad(const Eigen::VectorXd& log_theta, double scale) {
    return -log_theta / (scale * scale);
}

Eigen::VectorXd initial_log_theta(const KernelExpr& kernel, const TimeSeries& series) {
    const Eigen::Index n = series.size();
    const double range = series.inputs[n - 1] - series.inputs[0];
    const double mean = series.outputs.mean();
    double var = (series.outputs.array() - mean).square().mean();
    if (!(var > 0.0)) var = 1.0;

    Eigen::VectorXd theta(static_cast<Eigen::Index>(kernel.num_params()));
    for (std::size_t i = 0; i < kernel.num_params(); ++i) {
        double v = 1.0;
        switch (kernel.param_roles()[i]) {
            case ParamRole::length_scale:
            case ParamRole::period: v = 0.25 * range; break;
            case ParamRole::periodic_shape: v = 1.0; break;
            case ParamRole::scale: v = var; break;
            case ParamRole::noise: v = 1e-2 * var; break;
        }
        theta[static_cast<Eigen::Index>(i)] = std::log(v);
    }
    return theta;
}

// ---------------------------------------------------------------------------
// Fitting

namespace {

std::uint64_t restart_seed(std::uint64_t seed, int restart) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(restart)};
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Eigen::VectorXd restart_theta(const Eigen::VectorXd& base, std::uint64_t seed, int restart) {
    if (restart == 0) return base;
    std::mt19937_64 rng(restart_seed(seed, restart));
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd theta = base;
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] += normal(rng);
    return theta;
}

void check_series(const TimeSeries& series) {
    if (series.size() < 2) throw InvalidArgument("fitting needs at least 2 observations");
    series.validate();
}

// Result of one objective evaluation in optimizer coordinates.
struct Evaluation {
    double value;
    double jitter;
};

// Objective in optimizer coordinates: [log theta, log stretch / sigma_d].
// Whitening the stretches keeps the prior's curvature at 1 for any sigma_d.
class FitProblem {
  public:
    FitProblem(const TimeSeries& series, const KernelExpr& kernel, ModelKind kind, double sigma_d,
               double hyperprior_scale)
        : series_(series), kernel_(kernel), kind_(kind), prior_{sigma_d}, hyperprior_scale_(hyperprior_scale),
          m_(static_cast<Eigen::Index>(kernel.num_params())),
          gaps_(kind == ModelKind::wgp ? series.size() - 1 : 0) {}

    Eigen::Index dimension() const { return m_ + gaps_; }

    Eigen::VectorXd pack(const Eigen::VectorXd& log_theta, const Eigen::VectorXd& log_stretch) const {
        Eigen::VectorXd z(dimension());
        z.head(m_) = log_theta;
        if (gaps_ > 0) z.tail(gaps_) = log_stretch / prior_.log_scale;
        return z;
    }

    Eigen::VectorXd log_theta(const Eigen::VectorXd& z) const { return z.head(m_); }
    Eigen::VectorXd log_stretch(const Eigen::VectorXd& z) const {
        if (gaps_ == 0) return Eigen::VectorXd::Zero(std::max<Eigen::Index>(series_.size() - 1, 0));
        return z.tail(gaps_) * prior_.log_scale;
    }

    // Objective to maximize and its gradient in optimizer coordinates.
    Evaluation evaluate(const Eigen::VectorXd& z, Eigen::VectorXd& grad) const {
        const HyperVector theta = kernel_.make_hyper(log_theta(z));
        grad.resize(dimension());
        double value = 0.0;
        double jitter = 0.0;
        if (kind_ == ModelKind::gp) {
            const auto lml = grad_log_marginal(combine_inputs(series_.inputs, series_.inputs), series_.outputs,
                                               kernel_, theta);
            value = lml.value;
            jitter = lml.jitter;
            grad.head(m_) = lml.dtheta;
        } else {
            const Eigen::VectorXd u = log_stretch(z);
            const auto obj = wgp_objective(series_.inputs, series_.outputs, u, kernel_, theta, prior_);
            value = obj.value;
            jitter = obj.jitter;
            grad.head(m_) = obj.dtheta;
            grad.tail(gaps_) = obj.dlog_stretch * prior_.log_scale;
        }
        value += hyperprior_logpdf(theta.log_values(), hyperprior_scale_);
        grad.head(m_) += hyperprior_grad(theta.log_values(), hyperprior_scale_);
        return {value, jitter};
    }

  private:
    const TimeSeries& series_;
    const KernelExpr& kernel_;
    ModelKind kind_;
    WarpPrior prior_;
    double hyperprior_scale_;
    Eigen::Index m_;
    Eigen::Index gaps_;
};

TrainedModel fit(const TimeSeries& series, const KernelExpr& kernel, const FitConfig& config, ModelKind kind) {
    config.validate();
    check_series(series);

    const FitProblem problem(series, kernel, kind, config.sigma_d, config.hyperprior_scale);
    const Eigen::VectorXd base = initial_log_theta(kernel, series);
    const Eigen::VectorXd zero_warp = Eigen::VectorXd::Zero(series.size() - 1);

    Objective negated = [&](const Eigen::VectorXd& z, Eigen::VectorXd& grad) {
        try {
            const Evaluation e = problem.evaluate(z, grad);
            grad = -grad;
            if (!std::isfinite(e.value) || !grad.allFinite()) return std::numeric_limits<double>::infinity();
            return -e.value;
        } catch (const NotPositiveDefinite&) {
            grad.setZero();
            return std::numeric_limits<double>::infinity();
        }
    };

    LbfgsOptions options;
    options.max_iterations = config.max_iterations;
    options.gradient_tolerance = config.gradient_tolerance;

    std::optional<LbfgsResult> best;
    int best_restart = -1;
    int failed = 0;
    for (int r = 0; r < config.restarts; ++r) {
        const Eigen::VectorXd z0 = problem.pack(restart_theta(base, config.seed, r), zero_warp);
        try {
            LbfgsResult result = minimize_lbfgs(negated, z0, options);
            log().debug("restart {}: objective {} after {} iterations ({})", r, -result.value, result.iterations,
                        result.message);
            if (!best || result.value < best->value) {
                best = std::move(result);
                best_restart = r;
            }
        } catch (const InvalidArgument& e) {
            ++failed;
            log().info("restart {} failed: {}", r, e.what());
        }
    }
    if (!best) throw AllRestartsFailed(fmt::format("all {} restart(s) failed to produce a finite objective", config.restarts));

    TrainedModel model;
    model.kind = kind;
    model.kernel_source = kernel.source();
    model.theta = kernel.make_hyper(problem.log_theta(best->x));
    model.warp = WarpState::from_log_stretch(series.inputs, problem.log_stretch(best->x));
    model.train = series;
    model.converged = best->converged;
    model.gradient_norm = best->gradient.size() ? best->gradient.lpNorm<Eigen::Infinity>() : 0.0;
    model.iterations = best->iterations;
    model.evaluations = best->evaluations;
    model.restart = best_restart;
    model.failed_restarts = failed;
    model.sigma_d = config.sigma_d;
    model.hyperprior_scale = config.hyperprior_scale;

    // Re-evaluate at the stored parameters so objective and jitter are exactly
    // what a reload would see.
    Eigen::VectorXd grad;
    const Evaluation e = problem.evaluate(problem.pack(model.theta.log_values(), model.warp.log_stretch), grad);
    model.objective = e.value;
    model.jitter = e.jitter;
    if (e.jitter > 0.0) log().info("fit used diagonal jitter {}", e.jitter);
    return model;
}

}  // namespace

TrainedModel fit_gp(const TimeSeries& series, const KernelExpr& kernel, const FitConfig& config) {
    return fit(series, kernel, config, ModelKind::gp);
}

TrainedModel fit_wgp(const TimeSeries& series, const KernelExpr& kernel, const FitConfig& config) {
    return fit(series, kernel, config, ModelKind::wgp);
}

double model_objective(const TrainedModel& model, const KernelExpr& kernel) {
    const FitProblem problem(model.train, kernel, model.kind, model.sigma_d, model.hyperprior_scale);
    Eigen::VectorXd grad;
    return problem.evaluate(problem.pack(model.theta.log_values(), model.warp.log_stretch), grad).value;
}

}  // namespace wigp
