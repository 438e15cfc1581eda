#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>
#include <Eigen/Dense>

#include "oracles.hpp"
#include "wigp/error.hpp"
#include "wigp/gp.hpp"
#include "wigp/warp.hpp"

using namespace wigp;
namespace wt = wigp::testing;

namespace {

HyperVector logs(const KernelExpr& k, std::initializer_list<double> values) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v[i++] = std::log(x);
    return k.make_hyper(v);
}

InputPoints points(std::initializer_list<double> xs) {
    InputPoints out;
    for (double x : xs) out.push_back(InputPoint::single(x));
    return out;
}

}  // namespace

TEST_CASE("covariance assembly") {
    const auto k = KernelExpr::parse("rbf(l) + noise(s)");
    const auto one = build_cov(points({0.0}), k, logs(k, {1.0, 0.3}));
    CHECK(one.rows() == 1);
    CHECK(one(0, 0) == doctest::Approx(1.3));

    const auto rbf = KernelExpr::parse("rbf(l)");
    const auto twin = build_cov(points({2.0, 2.0}), rbf, logs(rbf, {1.0}));
    CHECK(twin.isApprox(Eigen::MatrixXd::Ones(2, 2)));

    const auto three = build_cov(points({0.0, 1.5, 3.0}), rbf, logs(rbf, {1.5}));
    CHECK(three(0, 1) == doctest::Approx(std::exp(-0.5)));
    CHECK(three(0, 2) == doctest::Approx(std::exp(-2.0)));
    CHECK(three(1, 0) == three(0, 1));

    // Noise on coincident inputs appears only on the diagonal.
    const auto noisy = build_cov(points({2.0, 2.0}), k, logs(k, {1.0, 0.3}));
    CHECK(noisy(0, 1) == doctest::Approx(1.0));
    CHECK(noisy(0, 0) == doctest::Approx(1.3));
    const auto cross = build_cross_cov(points({2.0}), points({2.0}), k, logs(k, {1.0, 0.3}));
    CHECK(cross(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("factorization and jitter ladder") {
    const auto id = factorize(Eigen::MatrixXd::Identity(4, 4));
    CHECK(id.jitter == 0.0);
    CHECK(id.lower.isApprox(Eigen::MatrixXd::Identity(4, 4)));
    CHECK(id.log_det == doctest::Approx(0.0));

    const auto singular = factorize(Eigen::MatrixXd::Ones(2, 2));
    CHECK(singular.jitter > 0.0);

    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(5, 5, [&] {
            return std::normal_distribution<double>()(rng);
        });
        const Eigen::MatrixXd spd = a.transpose() * a + 0.1 * Eigen::MatrixXd::Identity(5, 5);
        const auto f = factorize(spd);
        const Eigen::MatrixXd target = spd + f.jitter * Eigen::MatrixXd::Identity(5, 5);
        CHECK((f.lower * f.lower.transpose() - target).norm() <= 1e-10 * target.norm());
        CHECK(f.log_det == doctest::Approx(2.0 * f.lower.diagonal().array().log().sum()));
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(5);
        CHECK(f.solve(ones).isApprox(target.ldlt().solve(ones)));
        CHECK(f.inverse().isApprox(target.inverse(), 1e-8));
    }

    Eigen::MatrixXd indefinite(2, 2);
    indefinite << 1.0, 0.0, 0.0, -1.0;
    CHECK_THROWS_AS(factorize(indefinite), NotPositiveDefinite);
}

TEST_CASE("log marginal reference values") {
    const auto k = KernelExpr::parse("constant(c)");
    const auto theta = logs(k, {1.0});
    CHECK(log_marginal(points({0.0}), Eigen::VectorXd::Zero(1), k, theta) ==
          doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
    CHECK(log_marginal(points({0.0}), Eigen::VectorXd::Constant(1, 2.0), k, theta) ==
          doctest::Approx(-2.0 - 0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
    CHECK(log_marginal(points({0.0}), Eigen::VectorXd::Zero(1), k, theta) == doctest::Approx(-0.91894).epsilon(1e-5));
}

TEST_CASE("log marginal matches the dense oracle") {
    std::mt19937_64 rng(11);
    const auto& sources = wt::random_kernel_sources();
    for (int trial = 0; trial < 60; ++trial) {
        const auto k = KernelExpr::parse(sources[static_cast<std::size_t>(trial) % sources.size()]);
        const int n = 1 + trial % 8;
        const Eigen::VectorXd x = wt::random_increasing(rng, n);
        const InputPoints in = combine_inputs(x + wt::random_vector(rng, n, 0.0, 0.1), x);
        const auto theta = k.make_hyper(wt::random_vector(rng, static_cast<Eigen::Index>(k.num_params()), -1.0, 1.0));
        const Eigen::VectorXd f = wt::random_vector(rng, n, -2.0, 2.0);
        const double oracle = wt::dense_mvn_logpdf(wt::dense_gram(in, k, theta), f);
        CHECK(std::abs(log_marginal(in, f, k, theta) - oracle) <= 1e-8);
    }
}

TEST_CASE("log marginal gradients match finite differences") {
    SUBCASE("stationary point of a constant kernel") {
        const auto k = KernelExpr::parse("constant(c)");
        const Eigen::VectorXd f = Eigen::VectorXd::Constant(1, 1.7);
        const auto g = grad_log_marginal(points({0.0}), f, k, logs(k, {1.7 * 1.7}));
        CHECK(std::abs(g.dtheta[0]) < 1e-12);
    }
    std::mt19937_64 rng(5);
    const auto& sources = wt::random_kernel_sources();
    for (int trial = 0; trial < 30; ++trial) {
        const auto k = KernelExpr::parse(sources[static_cast<std::size_t>(trial) % sources.size()]);
        const int n = 5;
        const Eigen::VectorXd orig = wt::random_increasing(rng, n);
        const Eigen::VectorXd warped = orig * 1.3;
        const auto theta =
            k.make_hyper(wt::random_vector(rng, static_cast<Eigen::Index>(k.num_params()), -0.5, 0.5));
        const Eigen::VectorXd f = wt::random_vector(rng, n, -2.0, 2.0);
        const auto g = grad_log_marginal(combine_inputs(warped, orig), f, k, theta);
        CHECK(g.value == doctest::Approx(log_marginal(combine_inputs(warped, orig), f, k, theta)).epsilon(1e-12));

        const Eigen::VectorXd num_theta = wt::central_gradient(
            [&](const Eigen::VectorXd& lv) { return log_marginal(combine_inputs(warped, orig), f, k, k.make_hyper(lv)); },
            theta.log_values());
        CHECK(wt::all_close(g.dtheta, num_theta));

        const Eigen::VectorXd num_x = wt::central_gradient(
            [&](const Eigen::VectorXd& w) { return log_marginal(combine_inputs(w, orig), f, k, theta); }, warped);
        CHECK(wt::all_close(g.dinput, num_x));
    }
}

TEST_CASE("posterior") {
    const auto rbf = KernelExpr::parse("rbf(l)");
    const auto theta = logs(rbf, {1.0});

    SUBCASE("interpolates noise-free data") {
        const auto x = points({0.0, 1.0, 2.5});
        Eigen::VectorXd f(3);
        f << 0.3, -1.2, 0.8;
        const auto p = posterior(x, f, x, rbf, theta);
        for (int i = 0; i < 3; ++i) {
            CHECK(std::abs(p.mean[i] - f[i]) <= 1e-6);
            CHECK(p.variance[i] <= 1e-6);
            CHECK(p.variance[i] >= 0.0);
        }
    }
    SUBCASE("reverts to the prior far away") {
        const auto k = KernelExpr::parse("rbf(l) + noise(s)");
        const auto th = logs(k, {1.0, 0.05});
        const auto p = posterior(points({0.0, 1.0}), Eigen::Vector2d(1.0, -1.0), points({20.0}), k, th);
        CHECK(std::abs(p.mean[0]) < 1e-10);
        CHECK(p.variance[0] == doctest::Approx(1.05).epsilon(1e-10));
    }
    SUBCASE("two-point hand oracle") {
        const auto k = KernelExpr::parse("rbf(l) + noise(s)");
        const double l = 1.2, s2 = 0.1;
        const auto th = logs(k, {l, s2});
        const double a = 0.0, b = 0.9, q = 1.6;
        const double kab = std::exp(-0.5 * (a - b) * (a - b) / (l * l));
        const double kaq = std::exp(-0.5 * (a - q) * (a - q) / (l * l));
        const double kbq = std::exp(-0.5 * (b - q) * (b - q) / (l * l));
        const double s00 = 1.0 + s2, s11 = 1.0 + s2, s01 = kab;
        const double det = s00 * s11 - s01 * s01;
        const double i00 = s11 / det, i11 = s00 / det, i01 = -s01 / det;
        const double fa = 0.7, fb = -0.4;
        const double mean = kaq * (i00 * fa + i01 * fb) + kbq * (i01 * fa + i11 * fb);
        const double var = 1.0 - (kaq * (i00 * kaq + i01 * kbq) + kbq * (i01 * kaq + i11 * kbq)) + s2;
        const auto p = posterior(points({a, b}), Eigen::Vector2d(fa, fb), points({q}), k, th);
        CHECK(p.mean[0] == doctest::Approx(mean).epsilon(1e-12));
        CHECK(p.variance[0] == doctest::Approx(var).epsilon(1e-12));
        CHECK(p.query.size() == 1);
    }
}

TEST_CASE("more data never raises posterior variance") {
    std::mt19937_64 rng(23);
    const auto k = KernelExpr::parse("c * matern52(l) + noise(s)");
    for (int trial = 0; trial < 20; ++trial) {
        const auto theta = k.make_hyper(wt::random_vector(rng, 3, -1.0, 1.0));
        const Eigen::VectorXd x = wt::random_increasing(rng, 8);
        const Eigen::VectorXd f = wt::random_vector(rng, 8, -1.0, 1.0);
        const auto q = single_channel(wt::random_vector(rng, 5, -1.0, 12.0));
        const auto small = posterior(single_channel(x.head(7)), f.head(7), q, k, theta);
        const auto large = posterior(single_channel(x), f, q, k, theta);
        for (int i = 0; i < 5; ++i) CHECK(large.variance[i] <= small.variance[i] + 1e-8);
    }
}

TEST_CASE("prior sampling") {
    const auto k = KernelExpr::parse("rbf(l)");
    const auto theta = logs(k, {1.0});
    const auto x = points({0.0, 0.5, 1.7});
    CHECK(sample_prior(x, k, theta, 42) == sample_prior(x, k, theta, 42));
    CHECK(sample_prior(x, k, theta, 42) != sample_prior(x, k, theta, 43));

    const auto twin = sample_prior(points({1.0, 1.0}), k, theta, 9);
    CHECK(twin[0] == doctest::Approx(twin[1]).epsilon(1e-4));

    double sum = 0.0, sq = 0.0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        const double v = sample_prior(points({0.0}), k, theta, static_cast<std::uint64_t>(i))[0];
        sum += v;
        sq += v * v;
    }
    const double mean = sum / draws;
    const double var = sq / draws - mean * mean;
    CHECK(std::abs(var - 1.0) < 0.05);
}
