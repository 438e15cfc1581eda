#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "oracles.hpp"
#include "wigp/error.hpp"
#include "wigp/gp.hpp"
#include "wigp/train.hpp"

using namespace wigp;
namespace wt = wigp::testing;

namespace {

TimeSeries gp_sample(const char* kernel, std::initializer_list<double> values, int n, double range,
                     std::uint64_t seed) {
    const auto k = KernelExpr::parse(kernel);
    Eigen::VectorXd lv(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double v : values) lv[i++] = std::log(v);
    TimeSeries s;
    s.inputs = Eigen::VectorXd::LinSpaced(n, 0.0, range);
    s.outputs = sample_prior(single_channel(s.inputs), k, k.make_hyper(lv), seed);
    return s;
}

const char* const kTrend = "c * matern52(l) + noise(s)";

}  // namespace

TEST_CASE("hyperprior") {
    const double s = 3.0;
    CHECK(hyperprior_logpdf(Eigen::VectorXd::Zero(4), s) ==
          doctest::Approx(-4.0 * (std::log(s) + 0.5 * std::log(2.0 * std::numbers::pi))).epsilon(1e-14));
    CHECK(hyperprior_logpdf(Eigen::VectorXd::Zero(2), 2 * s) < hyperprior_logpdf(Eigen::VectorXd::Zero(2), s));
    const Eigen::VectorXd t = Eigen::Vector3d(0.5, -1.5, 2.0);
    const Eigen::VectorXd num =
        wt::central_gradient([&](const Eigen::VectorXd& v) { return hyperprior_logpdf(v, s); }, t);
    CHECK(wt::all_close(hyperprior_grad(t, s), num));
}

TEST_CASE("fit config") {
    FitConfig c;
    c.restarts = 4;
    c.seed = 99;
    c.sigma_d = 0.25;
    const FitConfig back = FitConfig::from_text(c.to_text());
    CHECK(back.to_text() == c.to_text());
    CHECK_THROWS_AS(FitConfig::from_text("restarts = 0\n"), InvalidArgument);
    CHECK_THROWS_AS(FitConfig::from_text("speed = 3\n"), DataError);
    FitConfig bad;
    bad.gradient_tolerance = 0.0;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("initialization heuristic") {
    TimeSeries s;
    s.inputs = Eigen::VectorXd::LinSpaced(5, 0.0, 8.0);
    s.outputs = Eigen::VectorXd::LinSpaced(5, -2.0, 2.0);
    const auto k = KernelExpr::parse("c * periodic(p, q) + noise(s)");
    const Eigen::VectorXd t = initial_log_theta(k, s);
    const double var = 2.0;  // population variance of -2..2 in 5 steps
    CHECK(std::exp(t[0]) == doctest::Approx(var));
    CHECK(std::exp(t[1]) == doctest::Approx(2.0));
    CHECK(std::exp(t[2]) == doctest::Approx(1.0));
    CHECK(std::exp(t[3]) == doctest::Approx(0.01 * var));
}

TEST_CASE("recovers a known length scale") {
    std::vector<double> recovered;
    FitConfig config;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const TimeSeries s = gp_sample("rbf(l) + noise(s)", {1.0, 0.01}, 60, 10.0, 1000 + seed);
        const auto model = fit_gp(s, KernelExpr::parse("c * rbf(l) + noise(s)"), config);
        recovered.push_back(model.theta.value("l"));
    }
    std::nth_element(recovered.begin(), recovered.begin() + 10, recovered.end());
    const double median = recovered[10];
    CHECK(median >= 0.5);
    CHECK(median <= 2.0);
}

TEST_CASE("fit contract") {
    const TimeSeries s = gp_sample(kTrend, {1.0, 2.0, 0.05}, 30, 15.0, 4);
    const auto k = KernelExpr::parse(kTrend);
    FitConfig config;
    config.restarts = 2;
    config.seed = 5;

    for (auto fitter : {&fit_gp, &fit_wgp}) {
        const auto a = fitter(s, k, config);
        const auto b = fitter(s, k, config);
        CHECK(a.theta == b.theta);
        CHECK(a.warp.log_stretch == b.warp.log_stretch);
        CHECK(a.objective == b.objective);
        CHECK((a.gradient_norm <= config.gradient_tolerance || !a.converged));
        CHECK(std::abs(model_objective(a, k) - a.objective) <= 1e-9);
        CHECK(a.theta.log_values().allFinite());
        CHECK(a.kernel_source == kTrend);
    }
    const auto gp = fit_gp(s, k, config);
    CHECK(gp.warp.log_stretch == Eigen::VectorXd::Zero(29));
    CHECK(gp.warp.warped == s.inputs);
}

TEST_CASE("restarts never hurt") {
    const TimeSeries s = gp_sample(kTrend, {1.0, 2.0, 0.05}, 25, 12.0, 6);
    const auto k = KernelExpr::parse(kTrend);
    FitConfig one, many;
    one.seed = many.seed = 3;
    many.restarts = 4;
    CHECK(fit_gp(s, k, many).objective >= fit_gp(s, k, one).objective);
    CHECK(fit_wgp(s, k, many).objective >= fit_wgp(s, k, one).objective);
}

TEST_CASE("warp against the plain GP") {
    const auto k = KernelExpr::parse(kTrend);
    FitConfig config;

    SUBCASE("stationary data yields no spurious warp") {
        const TimeSeries s = gp_sample(kTrend, {1.0, 3.0, 0.01}, 40, 20.0, 12);
        const auto m = fit_wgp(s, k, config);
        const Eigen::VectorXd u = m.warp.log_stretch;
        const double mean = u.mean();
        const double sd = std::sqrt((u.array() - mean).square().sum() / static_cast<double>(u.size() - 1));
        CHECK(sd < config.sigma_d);
    }
    SUBCASE("warped optimum dominates the unwarped one") {
        TimeSeries s = gp_sample(kTrend, {1.0, 1.0, 0.01}, 40, 20.0, 13);
        // Slow the second half down: non-stationary in the original inputs.
        for (Eigen::Index i = 20; i < 40; ++i) s.inputs[i] = s.inputs[19] + 3.0 * (s.inputs[i] - s.inputs[19]);
        const auto gp = fit_gp(s, k, config);
        const auto wgp = fit_wgp(s, k, config);
        const double no_warp_mass = 39.0 * WarpPrior{config.sigma_d}.log_density(0.0);
        CHECK(wgp.objective >= gp.objective + no_warp_mass - 1e-6);
    }
    SUBCASE("a vanishing warp prior reproduces the GP fit") {
        const TimeSeries s = gp_sample(kTrend, {1.0, 2.0, 0.05}, 30, 15.0, 14);
        FitConfig tight = config;
        tight.sigma_d = 1e-6;
        tight.gradient_tolerance = 1e-8;
        FitConfig plain = config;
        plain.gradient_tolerance = 1e-8;
        const auto gp = fit_gp(s, k, plain);
        const auto wgp = fit_wgp(s, k, tight);
        CHECK(wgp.warp.log_stretch.cwiseAbs().maxCoeff() < 1e-4);
        for (std::size_t i = 0; i < k.num_params(); ++i) {
            const double a = std::exp(gp.theta.log_values()[static_cast<Eigen::Index>(i)]);
            const double b = std::exp(wgp.theta.log_values()[static_cast<Eigen::Index>(i)]);
            CHECK(std::abs(a - b) <= 1e-3 * std::abs(a));
        }
    }
}

TEST_CASE("failure modes") {
    const auto k = KernelExpr::parse(kTrend);
    TimeSeries tiny;
    tiny.inputs = Eigen::VectorXd::Zero(1);
    tiny.outputs = Eigen::VectorXd::Zero(1);
    CHECK_THROWS_AS(fit_gp(tiny, k, FitConfig{}), InvalidArgument);

    TimeSeries unsorted;
    unsorted.inputs = Eigen::Vector3d(0.0, 2.0, 1.0);
    unsorted.outputs = Eigen::Vector3d(0.0, 1.0, 2.0);
    CHECK_THROWS_AS(fit_gp(unsorted, k, FitConfig{}), DataError);

    // Output variance overflows, so no restart has a finite starting point.
    TimeSeries huge;
    huge.inputs = Eigen::Vector3d(0.0, 1.0, 2.0);
    huge.outputs = Eigen::Vector3d(1e160, -1e160, 1e160);
    CHECK_THROWS_AS(fit_gp(huge, k, FitConfig{}), AllRestartsFailed);
}
