#include "wigp/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>

#include "wigp/error.hpp"

namespace wigp {

namespace {

struct Trial {
    double step = 0.0;
    double value = 0.0;
    double slope = 0.0;  // directional derivative
    Eigen::VectorXd grad;
    bool finite() const { return std::isfinite(value) && std::isfinite(slope); }
};

// Minimizer of the cubic through (a, fa, da) and (b, fb, db), or NaN.
double cubic_minimizer(double a, double fa, double da, double b, double fb, double db) {
    const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
    const double disc = d1 * d1 - da * db;
    if (disc < 0.0) return std::numeric_limits<double>::quiet_NaN();
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    const double denom = db - da + 2.0 * d2;
    if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return b - (b - a) * (db + d2 - d1) / denom;
}

class LineSearch {
  public:
    LineSearch(const Objective& f, const Eigen::VectorXd& x, const Eigen::VectorXd& dir, double f0, double slope0,
               const LbfgsOptions& opt, int& evaluations)
        : f_(f), x_(x), dir_(dir), f0_(f0), slope0_(slope0), opt_(opt), evaluations_(evaluations) {}

    // Returns the accepted trial, or a trial with step 0 if nothing decreased f.
    Trial run(double initial_step) {
        Trial prev{0.0, f0_, slope0_, {}};
        double step = initial_step;
        for (int i = 0; i < opt_.max_line_search; ++i) {
            Trial t = evaluate(step);
            if (!t.finite()) {
                // Infeasible; shrink toward the last good point.
                step = prev.step + 0.5 * (step - prev.step);
                continue;
            }
            remember(t);
            if (t.value > f0_ + opt_.armijo * t.step * slope0_ || (i > 0 && t.value >= prev.value))
                return zoom(prev, t, i);
            if (std::abs(t.slope) <= -opt_.curvature * slope0_) return t;
            if (t.slope >= 0.0) return zoom(t, prev, i);
            prev = t;
            step *= 2.0;
        }
        return fallback();
    }

  private:
    Trial evaluate(double step) {
        Trial t;
        t.step = step;
        t.grad.resize(x_.size());
        ++evaluations_;
        t.value = f_(x_ + step * dir_, t.grad);
        t.slope = t.grad.allFinite() ? t.grad.dot(dir_) : std::numeric_limits<double>::quiet_NaN();
        return t;
    }

    void remember(const Trial& t) {
        if (t.value <= f0_ + opt_.armijo * t.step * slope0_ && (!best_ || t.value < best_->value)) best_ = t;
    }

    Trial fallback() const {
        if (best_) return *best_;
        return Trial{0.0, f0_, slope0_, {}};
    }

    Trial zoom(Trial lo, Trial hi, int used) {
        for (int i = used; i < opt_.max_line_search; ++i) {
            const double width = hi.step - lo.step;
            double step = std::numeric_limits<double>::quiet_NaN();
            if (hi.finite()) step = cubic_minimizer(lo.step, lo.value, lo.slope, hi.step, hi.value, hi.slope);
            const double lower = std::min(lo.step, hi.step) + 0.1 * std::abs(width);
            const double upper = std::max(lo.step, hi.step) - 0.1 * std::abs(width);
            if (!std::isfinite(step) || step < lower || step > upper) step = lo.step + 0.5 * width;
            if (std::abs(width) < 1e-16 * std::max(1.0, std::abs(lo.step))) break;

            Trial t = evaluate(step);
            if (!t.finite()) {
                hi = t;
                continue;
            }
            remember(t);
            if (t.value > f0_ + opt_.armijo * t.step * slope0_ || t.value >= lo.value) {
                hi = t;
            } else {
                if (std::abs(t.slope) <= -opt_.curvature * slope0_) return t;
                if (t.slope * (hi.step - lo.step) >= 0.0) hi = lo;
                lo = t;
            }
        }
        return fallback();
    }

    const Objective& f_;
    const Eigen::VectorXd& x_;
    const Eigen::VectorXd& dir_;
    double f0_;
    double slope0_;
    const LbfgsOptions& opt_;
    int& evaluations_;
    std::optional<Trial> best_;
};

}  // namespace

LbfgsResult minimize_lbfgs(const Objective& f, Eigen::VectorXd x0, const LbfgsOptions& options) {
    LbfgsResult result;
    result.x = std::move(x0);
    result.gradient.resize(result.x.size());
    result.value = f(result.x, result.gradient);
    result.evaluations = 1;
    if (!std::isfinite(result.value) || !result.gradient.allFinite())
        throw InvalidArgument("objective is not finite at the starting point");
    result.history.push_back(result.value);

    std::deque<Eigen::VectorXd> s_hist;
    std::deque<Eigen::VectorXd> y_hist;
    std::deque<double> rho_hist;

    auto converged = [&] { return result.gradient.size() == 0 || result.gradient.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance; };

    bool retried = false;
    while (true) {
        if (converged()) {
            result.converged = true;
            result.message = "gradient tolerance reached";
            break;
        }
        if (result.iterations >= options.max_iterations) {
            result.message = "iteration limit reached";
            break;
        }

        // Two-loop recursion.
        Eigen::VectorXd q = result.gradient;
        std::vector<double> alpha(s_hist.size());
        for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
            alpha[i] = rho_hist[i] * s_hist[i].dot(q);
            q -= alpha[i] * y_hist[i];
        }
        if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            const double beta = rho_hist[i] * y_hist[i].dot(q);
            q += (alpha[i] - beta) * s_hist[i];
        }
        Eigen::VectorXd dir = -q;
        double slope = result.gradient.dot(dir);
        if (!(slope < 0.0)) {
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            dir = -result.gradient;
            slope = result.gradient.dot(dir);
        }

        const double initial_step = s_hist.empty() ? std::min(1.0, 1.0 / result.gradient.norm()) : 1.0;
        LineSearch search(f, result.x, dir, result.value, slope, options, result.evaluations);
        Trial t = search.run(initial_step);
        if (t.step == 0.0) {
            if (!retried && !s_hist.empty()) {
                // Forget curvature pairs and retry along steepest descent once.
                s_hist.clear();
                y_hist.clear();
                rho_hist.clear();
                retried = true;
                continue;
            }
            result.message = "line search failed";
            break;
        }
        retried = false;

        Eigen::VectorXd s = t.step * dir;
        Eigen::VectorXd y = t.grad - result.gradient;
        const double improvement = result.value - t.value;
        result.x += s;
        result.value = t.value;
        result.gradient = std::move(t.grad);
        ++result.iterations;
        result.history.push_back(result.value);

        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > options.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }

        if (options.function_tolerance > 0.0 && !converged() &&
            improvement <= options.function_tolerance * std::max(1.0, std::abs(result.value))) {
            result.message = "function tolerance reached";
            break;
        }
    }
    return result;
}

}  // namespace wigp
