#include <cmath>
#include <limits>

#include <doctest.h>
#include <Eigen/Dense>

#include "wigp/error.hpp"
#include "wigp/lbfgs.hpp"

using namespace wigp;

namespace {

double rosenbrock(const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g.resize(x.size());
    g.setZero();
    double f = 0.0;
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
        const double a = x[i + 1] - x[i] * x[i];
        const double b = 1.0 - x[i];
        f += 100.0 * a * a + b * b;
        g[i] += -400.0 * a * x[i] - 2.0 * b;
        g[i + 1] += 200.0 * a;
    }
    return f;
}

}  // namespace

TEST_CASE("minimizes a quadratic") {
    Eigen::MatrixXd a(3, 3);
    a << 4, 1, 0, 1, 3, 0.5, 0, 0.5, 2;
    const Eigen::VectorXd b(Eigen::Vector3d(1, -2, 0.5));
    Objective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        g = a * x - b;
        return 0.5 * x.dot(a * x) - b.dot(x);
    };
    const auto r = minimize_lbfgs(f, Eigen::VectorXd::Zero(3));
    CHECK(r.converged);
    CHECK((r.x - a.ldlt().solve(b)).norm() < 1e-5);
    CHECK(r.gradient.lpNorm<Eigen::Infinity>() <= 1e-5);
}

TEST_CASE("minimizes Rosenbrock with monotone history") {
    const auto r = minimize_lbfgs(rosenbrock, Eigen::VectorXd::Constant(4, -1.2));
    CHECK(r.converged);
    CHECK((r.x - Eigen::VectorXd::Ones(4)).norm() < 1e-4);
    REQUIRE(r.history.size() >= 2);
    for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i] <= r.history[i - 1]);
    CHECK(r.evaluations >= r.iterations);
}

TEST_CASE("respects the iteration cap") {
    LbfgsOptions opt;
    opt.max_iterations = 3;
    const auto r = minimize_lbfgs(rosenbrock, Eigen::VectorXd::Constant(2, -1.2), opt);
    CHECK_FALSE(r.converged);
    CHECK(r.iterations <= 3);
    CHECK(!r.message.empty());
    CHECK((r.converged || r.gradient.lpNorm<Eigen::Infinity>() > opt.gradient_tolerance));
}

TEST_CASE("backs off from infeasible points") {
    // f = x - log(x) is infinite for x <= 0; minimum at x = 1.
    Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        g.resize(1);
        if (x[0] <= 0.0) {
            g[0] = 0.0;
            return std::numeric_limits<double>::infinity();
        }
        g[0] = 1.0 - 1.0 / x[0];
        return x[0] - std::log(x[0]);
    };
    const auto r = minimize_lbfgs(f, Eigen::VectorXd::Constant(1, 0.05));
    CHECK(r.converged);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("rejects a non-finite start") {
    Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        g = x;
        return std::numeric_limits<double>::quiet_NaN();
    };
    CHECK_THROWS_AS(minimize_lbfgs(f, Eigen::VectorXd::Zero(2)), InvalidArgument);
}

TEST_CASE("zero gradient at start converges immediately") {
    Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        g = 2.0 * x;
        return x.squaredNorm();
    };
    const auto r = minimize_lbfgs(f, Eigen::VectorXd::Zero(3));
    CHECK(r.converged);
    CHECK(r.iterations == 0);
}
