#include "helpers.hpp"
#include "oracles.hpp"

#include "mixmi/error.hpp"
#include "mixmi/gp.hpp"
#include "mixmi/gradcheck.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace mixmi;

namespace {

Eigen::VectorXd sorted_times(Eigen::Index n, Rng& rng) {
    std::uniform_real_distribution<double> gap(0.2, 1.0);
    Eigen::VectorXd t(n);
    double now = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) t[i] = (now += gap(rng));
    return t;
}

}  // namespace

TEST_SUITE("gp") {

TEST_CASE("correlation matrix") {
    const Eigen::Vector3d t(0.0, 0.5, 1.0);
    const auto r = gp::correlation_matrix(t, 2.0);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(std::abs(r(i, j) - std::exp(-2.0 * std::pow(t[i] - t[j], 2))) <= 1e-15);
    CHECK(gp::correlation_matrix(Eigen::Vector2d(0.0, 1.0), 1.0)(0, 1) == std::exp(-1.0));
    CHECK_THROWS_AS(gp::correlation_matrix(t, std::nan("")), NumericalError);
}

TEST_CASE("midpoint of two points") {
    const auto p = gp::blup_predict(1.0, Eigen::Vector2d(0.0, 1.0), Eigen::Vector2d(0.0, 1.0), 0.5);
    CHECK(std::abs(p.mean - 0.5) <= 1e-10);
}

TEST_CASE("kriging interpolates its training points without jitter") {
    Rng rng = make_stream(1, 0, Stream::Simulation);
    for (int s = 0; s < 50; ++s) {
        const auto t = sorted_times(6, rng);
        const auto x = testing::random_vector(6, rng);
        for (Eigen::Index i = 0; i < 6; ++i) {
            const auto p = gp::blup_predict(1.0, x, t, t[i], 0.0);
            CHECK(std::abs(p.mean - x[i]) < 1e-6);
            CHECK(p.variance < 1e-6);
        }
    }
}

TEST_CASE("prediction matches explicit-inverse evaluation") {
    Rng rng = make_stream(2, 0, Stream::Simulation);
    std::uniform_real_distribution<double> th(0.1, 3.0);
    for (int s = 0; s < 20; ++s) {
        const auto t = sorted_times(5, rng);
        const auto x = testing::random_vector(5, rng);
        const double theta = th(rng), q = t[2] + 0.3;
        const auto a = gp::blup_predict(theta, x, t, q);
        const auto [mean, var] = oracles::direct_blup(theta, x, t, q);
        CHECK(std::abs(a.mean - mean) < 1e-8);
        CHECK(std::abs(a.variance - std::max(var, 0.0)) < 1e-8);
    }
}

TEST_CASE("shifting all times changes nothing") {
    Rng rng = make_stream(3, 0, Stream::Simulation);
    const auto t = sorted_times(5, rng);
    const auto x = testing::random_vector(5, rng);
    const auto a = gp::blup_predict(0.7, x, t, 1.3);
    const Eigen::VectorXd shifted = t.array() + 4.0;
    const auto b = gp::blup_predict(0.7, x, shifted, 5.3);
    CHECK(std::abs(a.mean - b.mean) < 1e-10);
    CHECK(std::abs(a.variance - b.variance) < 1e-10);
}

TEST_CASE("variance is non-negative and the unclamped value is at worst a rounding error") {
    Rng rng = make_stream(4, 0, Stream::Simulation);
    std::uniform_real_distribution<double> th(0.01, 20.0), q(0.0, 6.0);
    for (int s = 0; s < 200; ++s) {
        gp::Series ser;
        ser.times = sorted_times(5, rng);
        ser.values = testing::random_vector(5, rng);
        ser.query_time = q(rng);
        const auto terms = gp::prediction_terms(th(rng), ser, gp::kJitter, false);
        CHECK(terms.variance > -1e-8);
    }
}

TEST_CASE("invalid series") {
    CHECK_THROWS_AS(gp::blup_predict(1.0, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1), 0.5), NumericalError);
    CHECK_THROWS_AS(gp::blup_predict(1.0, Eigen::Vector2d(1, 2), Eigen::Vector2d(1, 1), 0.5), NumericalError);
    gp::Series s;
    s.times = Eigen::Vector2d(0, 1);
    s.values = Eigen::Vector2d(1, 2);
    CHECK(gp::usable(s));
    s.times[1] = 0;
    CHECK_FALSE(gp::usable(s));
}

TEST_CASE("make_series maps times to unit mean spacing") {
    const auto s = gp::make_series(Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(10, 12, 13), 16.0, 9.0);
    CHECK(s.times[0] == 0.0);
    CHECK(s.query_time == doctest::Approx(3.0));
    CHECK(s.times[1] == doctest::Approx(1.0));
    CHECK(s.target == 9.0);
}

TEST_CASE("log_density") {
    CHECK(gp::log_density(0.0, 0.0, 1.0) == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)));
    CHECK(gp::log_density(0.0, 0.0, -1.0) == gp::log_density(0.0, 0.0, gp::kVarianceFloor));
}

TEST_CASE("weighted log-likelihood: zero weights and gradient") {
    Rng rng = make_stream(5, 0, Stream::Gradcheck);
    for (int s = 0; s < 30; ++s) {
        const auto inst = gradcheck::random_instance(rng);
        const auto zero = gp::weighted_loglik_and_grad(inst.theta, inst.series,
                                                       Eigen::VectorXd::Zero(inst.weights.size()));
        CHECK(zero.value == 0.0);
        CHECK(zero.gradient == 0.0);

        const auto lg = gp::weighted_loglik_and_grad(inst.theta, inst.series, inst.weights);
        CHECK(lg.value == doctest::Approx(static_cast<double>(gradcheck::reference_loglik(inst.theta, inst))).epsilon(1e-8));
        const double h = 1e-5, lt = std::log(inst.theta);
        const long double up = gradcheck::reference_loglik(std::exp(lt + h), inst);
        const long double dn = gradcheck::reference_loglik(std::exp(lt - h), inst);
        const double numeric = static_cast<double>((up - dn) / (2.0L * h));
        CHECK(gradcheck::relative_error(lg.gradient * inst.theta, numeric) < 1e-5);
    }
}

TEST_CASE("no usable series is untrainable") {
    gp::Series s;
    s.times = Eigen::VectorXd::Zero(1);
    s.values = Eigen::VectorXd::Zero(1);
    std::vector<gp::Series> v{s};
    CHECK_THROWS_AS(gp::weighted_loglik_and_grad(1.0, v, Eigen::VectorXd::Ones(1)), UntrainableError);
}

TEST_CASE("theta ascent: fixed point, monotone trace") {
    Rng rng = make_stream(6, 0, Stream::Gradcheck);
    for (int s = 0; s < 20; ++s) {
        const auto inst = gradcheck::random_instance(rng);
        const auto fit = gp::optimize_theta(inst.theta, inst.series, inst.weights);
        CHECK(fit.objective >= fit.initial_objective - 1e-10);
        for (std::size_t i = 1; i < fit.trace.size(); ++i) CHECK(fit.trace[i] >= fit.trace[i - 1] - 1e-10);
        CHECK(fit.kernel.theta >= gp::kThetaMin);
        CHECK(fit.kernel.theta <= gp::kThetaMax);

        // Restarting at an interior optimum does not move.
        if (fit.kernel.theta > 2 * gp::kThetaMin && fit.kernel.theta < gp::kThetaMax / 2) {
            const auto lg = gp::weighted_loglik_and_grad(fit.kernel.theta, inst.series, inst.weights);
            if (std::abs(lg.gradient * fit.kernel.theta / inst.weights.sum()) < 1e-6) {
                const auto again = gp::optimize_theta(fit.kernel.theta, inst.series, inst.weights);
                CHECK(again.kernel.theta == fit.kernel.theta);
                CHECK(again.iterations == 0);
            }
        }
    }
}

TEST_CASE("theta ascent recovers the generating decay within a factor of two") {
    constexpr double kTrue = 4.0;
    constexpr int kPoints = 30, kPatients = 40;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng = make_stream(seed, 7, Stream::Simulation);
        std::normal_distribution<double> z(0.0, 1.0);
        std::vector<gp::Series> series;
        for (int p = 0; p < kPatients; ++p) {
            const auto t = sorted_times(kPoints + 1, rng);
            Eigen::MatrixXd R = gp::correlation_matrix(t, kTrue);
            R.diagonal().array() += 1e-9;
            const Eigen::MatrixXd L = R.llt().matrixL();
            Eigen::VectorXd e(kPoints + 1);
            for (auto& ei : e) ei = z(rng);
            const Eigen::VectorXd draw = L * e;
            // Hold out one interior point as the target.
            const int q = std::uniform_int_distribution<int>(1, kPoints - 1)(rng);
            gp::Series s;
            s.times.resize(kPoints);
            s.values.resize(kPoints);
            for (int i = 0, j = 0; i <= kPoints; ++i)
                if (i != q) {
                    s.times[j] = t[i];
                    s.values[j++] = draw[i];
                }
            s.query_time = t[q];
            s.target = draw[q];
            series.push_back(s);
        }
        const auto fit = gp::optimize_theta(1.0, series, Eigen::VectorXd::Ones(kPatients), 200);
        CHECK(fit.kernel.theta > kTrue / 2);
        CHECK(fit.kernel.theta < kTrue * 2);
    }
}

}  // TEST_SUITE
