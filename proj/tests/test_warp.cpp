#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "oracles.hpp"
#include "wigp/error.hpp"
#include "wigp/gp.hpp"
#include "wigp/warp.hpp"

using namespace wigp;
namespace wt = wigp::testing;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

}  // namespace

TEST_CASE("warp recurrence") {
    CHECK(warp_inputs(vec({0, 1, 2}), vec({0, 0})) == vec({0, 1, 2}));
    const Eigen::VectorXd w = warp_inputs(vec({0, 1, 2}), vec({std::log(2.0), std::log(0.5)}));
    CHECK(w[0] == 0.0);
    CHECK(w[1] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(w[2] == doctest::Approx(2.5).epsilon(1e-15));

    const Eigen::VectorXd x = vec({0.3, 1.1, 1.4, 3.0});
    const Eigen::VectorXd u = vec({0.4, -1.2, 0.7});
    const Eigen::VectorXd xw = warp_inputs(x, u);
    for (int i = 1; i < 4; ++i)
        CHECK(xw[i] - xw[i - 1] == doctest::Approx(std::exp(u[i - 1]) * (x[i] - x[i - 1])).epsilon(1e-13));

    CHECK(warp_inputs(vec({5.0}), Eigen::VectorXd()) == vec({5.0}));
    CHECK_THROWS_AS(warp_inputs(vec({0, 1}), vec({0, 0})), InvalidArgument);
    CHECK_THROWS_AS(warp_inputs(vec({0, 0}), vec({0})), InvalidArgument);
}

TEST_CASE("warp state") {
    const auto id = WarpState::identity(vec({1, 2, 4}));
    CHECK(id.log_stretch == Eigen::VectorXd::Zero(2));
    CHECK(id.warped == vec({1, 2, 4}));
    const auto s = WarpState::from_log_stretch(vec({1, 2, 4}), vec({0.0, std::log(3.0)}));
    CHECK(s.warped[2] == doctest::Approx(8.0));
}

TEST_CASE("warp prior") {
    const WarpPrior prior{1.0};
    CHECK(warp_log_prior(Eigen::VectorXd::Zero(4), prior) ==
          doctest::Approx(4.0 * std::log(1.0 / std::sqrt(2.0 * std::numbers::pi))).epsilon(1e-14));
    // Log-normal density over lambda, evaluated at lambda = e^u.
    const double u = 0.37, s = 0.6;
    const double lambda = std::exp(u);
    const double lognormal = 1.0 / (lambda * s * std::sqrt(2.0 * std::numbers::pi)) * std::exp(-u * u / (2 * s * s));
    CHECK(WarpPrior{s}.log_density(u) == doctest::Approx(std::log(lognormal)).epsilon(1e-13));
    CHECK(warp_log_prior(vec({60.0}), prior) < -1000.0);
    CHECK(warp_log_prior(vec({-60.0}), prior) < -1000.0);
    // Vague prior: the spread over moderate log stretches shrinks.
    const WarpPrior vague{1e3};
    CHECK(std::abs(vague.log_density(0.5) + 0.5 - vague.log_density(0.0)) < 1e-6);

    const Eigen::VectorXd z = vec({0.3, -0.8, 1.1});
    const Eigen::VectorXd num = wt::central_gradient([&](const Eigen::VectorXd& v) { return warp_log_prior(v, prior); }, z);
    CHECK(wt::all_close(warp_log_prior_grad(z, prior), num));
    CHECK_THROWS_AS(warp_log_prior(vec({NAN}), prior), InvalidArgument);
}

TEST_CASE("chain rule through the cumulative warp") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::VectorXd x = wt::random_increasing(rng, 6);
        const Eigen::VectorXd u = wt::random_vector(rng, 5, -1.0, 1.0);
        const Eigen::VectorXd weights = wt::random_vector(rng, 6, -1.0, 1.0);
        // d/du of weights . warp(x, u)
        const Eigen::VectorXd analytic = chain_warp_gradient(x, u, weights);
        const Eigen::VectorXd numeric = wt::central_gradient(
            [&](const Eigen::VectorXd& v) { return weights.dot(warp_inputs(x, v)); }, u);
        CHECK(wt::all_close(analytic, numeric));
    }
}

TEST_CASE("joint objective") {
    const auto k = KernelExpr::parse("c * matern52(l) + noise(s)");
    std::mt19937_64 rng(31);
    const Eigen::VectorXd x = wt::random_increasing(rng, 6);
    const Eigen::VectorXd f = wt::random_vector(rng, 6, -1.5, 1.5);
    const auto theta = k.make_hyper(vec({0.2, 0.4, -2.0}));
    const WarpPrior prior{0.8};

    SUBCASE("reduces to the plain GP at zero warp") {
        const auto obj = wgp_objective(x, f, Eigen::VectorXd::Zero(5), k, theta, prior);
        CHECK(obj.log_marginal == log_marginal(combine_inputs(x, x), f, k, theta));
        CHECK(obj.log_prior == doctest::Approx(5.0 * prior.log_density(0.0)));
        CHECK(obj.value == doctest::Approx(obj.log_marginal + obj.log_prior));
    }
    SUBCASE("gradients match finite differences") {
        for (const auto& src : wt::random_kernel_sources()) {
            const auto kk = KernelExpr::parse(src);
            for (int trial = 0; trial < 4; ++trial) {
                const auto th =
                    kk.make_hyper(wt::random_vector(rng, static_cast<Eigen::Index>(kk.num_params()), -0.5, 0.5));
                const Eigen::VectorXd u = wt::random_vector(rng, 5, -0.7, 0.7);
                const auto obj = wgp_objective(x, f, u, kk, th, prior);
                const Eigen::VectorXd nt = wt::central_gradient(
                    [&](const Eigen::VectorXd& lv) { return wgp_objective(x, f, u, kk, kk.make_hyper(lv), prior).value; },
                    th.log_values());
                const Eigen::VectorXd nu = wt::central_gradient(
                    [&](const Eigen::VectorXd& v) { return wgp_objective(x, f, v, kk, th, prior).value; }, u);
                CHECK(wt::all_close(obj.dtheta, nt));
                CHECK(wt::all_close(obj.dlog_stretch, nu));
            }
        }
    }
    SUBCASE("translation consistency") {
        const Eigen::VectorXd u = vec({0.1, -0.2, 0.3, 0.0, 0.5});
        const Eigen::VectorXd shifted = x.array() + 17.25;
        const auto a = wgp_objective(x, f, u, k, theta, prior);
        const auto b = wgp_objective(shifted, f, u, k, theta, prior);
        CHECK(b.value == doctest::Approx(a.value).epsilon(1e-12));
        CHECK(((warp_inputs(shifted, u).array() - 17.25).matrix() - warp_inputs(x, u)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("forecast-time extrapolation") {
    CHECK(extrapolate_warp(vec({0, 1, 2}), vec({0, 1, 2}), vec({2.5})) == vec({2.5}));
    CHECK(extrapolate_warp(vec({0, 1, 2}), vec({0, 1, 3}), vec({3}))[0] == doctest::Approx(5.0));
    const Eigen::VectorXd two = extrapolate_warp(vec({0, 1, 2}), vec({0, 1, 3}), vec({3, 4}));
    CHECK(two[0] == doctest::Approx(5.0));
    CHECK(two[1] == doctest::Approx(7.0));
    // A single training point carries no stretch information: lambda = 1.
    CHECK(extrapolate_warp(vec({4}), vec({4}), vec({6}))[0] == doctest::Approx(6.0));
    CHECK_THROWS_AS(extrapolate_warp(vec({0, 1, 2}), vec({0, 1, 3}), vec({2})), InvalidArgument);
    CHECK_THROWS_AS(extrapolate_warp(vec({0, 1, 2}), vec({0, 1, 3}), vec({1.5})), InvalidArgument);
}

TEST_CASE("combined inputs") {
    CHECK_THROWS_AS(combine_inputs(vec({0, 1}), vec({0})), InvalidArgument);
    const auto pts = combine_inputs(vec({0, 2}), vec({0, 1}));
    CHECK(pts[1].warped == 2.0);
    CHECK(*pts[1].original == 1.0);

    // Changing the warp never changes the seasonal factor between two indices.
    const auto k = KernelExpr::parse("periodic(p, l)@orig");
    const auto theta = k.make_hyper(vec({std::log(2.0), 0.0}));
    const Eigen::VectorXd x = vec({0.0, 0.7, 1.9});
    const auto a = combine_inputs(warp_inputs(x, vec({0.0, 0.0})), x);
    const auto b = combine_inputs(warp_inputs(x, vec({1.3, -0.4})), x);
    CHECK(eval_kernel(k, a[0], a[2], theta) == eval_kernel(k, b[0], b[2], theta));
}
