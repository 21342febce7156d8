#include "helpers.hpp"
#include "oracles.hpp"

#include "mixmi/error.hpp"
#include "mixmi/linreg.hpp"

#include <doctest.h>

#include <cmath>

using namespace mixmi;
using linreg::fit_weighted;

TEST_SUITE("linreg") {

TEST_CASE("exact fit hits the variance floor") {
    Eigen::MatrixXd x(3, 1);
    x << 1, 2, 3;
    const Eigen::VectorXd y = Eigen::Vector3d(2, 4, 6);
    const auto m = fit_weighted(x, y, Eigen::Vector3d::Ones());
    CHECK(m.beta[0] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(m.sigma2 == linreg::kVarianceFloor);
}

TEST_CASE("zero-weight rows do not influence the fit") {
    Eigen::MatrixXd x(3, 1);
    x << 1, 2, 3;
    const Eigen::VectorXd y = Eigen::Vector3d(2, 4, 100);
    const auto m = fit_weighted(x, y, Eigen::Vector3d(1, 1, 0));
    CHECK(m.beta[0] == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("coefficients match a dense solve of the same normal equations") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng = make_stream(seed, 0, Stream::Simulation);
        const auto x = testing::random_matrix(50, 3, rng);
        const auto y = testing::random_vector(50, rng);
        std::uniform_real_distribution<double> u(0.1, 2.0);
        Eigen::VectorXd w(50);
        for (auto& wi : w) wi = u(rng);

        const auto m = fit_weighted(x, y, w);

        const Eigen::VectorXd beta = oracles::normal_equations(x, y, w, linreg::kRidge);
        CHECK((m.beta - beta).cwiseAbs().maxCoeff() < 1e-8);

        // Weighted least squares without ridge lands within the ridge perturbation.
        const Eigen::MatrixXd sw = x.array().colwise() * w.array().sqrt();
        const Eigen::VectorXd sy = y.array() * w.array().sqrt();
        const Eigen::VectorXd ols = sw.colPivHouseholderQr().solve(sy);
        CHECK((m.beta - ols).cwiseAbs().maxCoeff() < 1e-6);

        double num = 0.0;
        for (int i = 0; i < 50; ++i) num += w[i] * std::pow(y[i] - x.row(i).dot(beta), 2);
        CHECK(m.sigma2 == doctest::Approx(num / w.sum()).epsilon(1e-10));
        CHECK(linreg::weighted_residual_variance(m, x, y, w) == doctest::Approx(m.sigma2).epsilon(1e-12));
    }
}

TEST_CASE("scaling every weight leaves the fit unchanged") {
    Rng rng = make_stream(9, 0, Stream::Simulation);
    const auto x = testing::random_matrix(30, 4, rng);
    const auto y = testing::random_vector(30, rng);
    const Eigen::VectorXd w = testing::random_vector(30, rng).cwiseAbs();
    const auto a = fit_weighted(x, y, w);
    for (double c : {1e-3, 7.0, 1e4}) {
        const auto b = fit_weighted(x, y, c * w);
        CHECK((a.beta - b.beta).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(std::abs(a.sigma2 - b.sigma2) < 1e-10);
    }
}

TEST_CASE("predict") {
    linreg::LinearModelParams m{Eigen::VectorXd::Constant(1, 2.0), 1.0};
    CHECK(linreg::predict(m, Eigen::MatrixXd::Constant(1, 1, 3.0))[0] == 6.0);
    m.beta = Eigen::VectorXd::Zero(2);
    CHECK(linreg::predict(m, Eigen::MatrixXd::Ones(4, 2)).isZero());
    CHECK_THROWS_AS(linreg::predict(m, Eigen::MatrixXd::Ones(4, 3)), NumericalError);
}

TEST_CASE("rejects zero weights and non-finite inputs") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 1);
    const Eigen::VectorXd y = Eigen::Vector3d(1, 2, 3);
    CHECK_THROWS_AS(fit_weighted(x, y, Eigen::Vector3d::Zero()), NumericalError);
    x(1, 0) = std::nan("");
    CHECK_THROWS_AS(fit_weighted(x, y, Eigen::Vector3d::Ones()), NumericalError);
}

}  // TEST_SUITE
