#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace wigp {

struct LbfgsOptions {
    int max_iterations = 1000;
    /// Converged when the infinity norm of the gradient drops to this.
    double gradient_tolerance = 1e-5;
    /// Stop (unconverged) when an accepted step improves f by less than
    /// this times max(1, |f|). Zero disables the test.
    double function_tolerance = 0.0;
    int memory = 8;
    double armijo = 1e-4;     // c1
    double curvature = 0.9;   // c2
    int max_line_search = 40;
};

struct LbfgsResult {
    Eigen::VectorXd x;
    double value = 0.0;
    Eigen::VectorXd gradient;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::string message;
    /// Objective after every accepted iteration, starting with the initial point.
    std::vector<double> history;
};

/// Returns f(x) and writes the gradient. A non-finite return marks the point
/// as infeasible; the line search then backs off.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

/// Minimizes `f` with limited-memory BFGS and a strong-Wolfe line search.
/// Throws InvalidArgument if f is not finite at x0.
LbfgsResult minimize_lbfgs(const Objective& f, Eigen::VectorXd x0, const LbfgsOptions& options = {});

}  // namespace wigp
