#pragma once

#include <Eigen/Dense>

namespace mixmi::linreg {

inline constexpr double kRidge = 1e-6;
inline constexpr double kVarianceFloor = 1e-8;

/// Gaussian linear model y ~ N(x'beta, sigma2) without intercept.
struct LinearModelParams {
    Eigen::VectorXd beta;
    double sigma2 = 1.0;
};

/// Responsibility-weighted least squares.
///
/// Solves (X'WX + ridge * mean(w) I) beta = X'Wy and sets sigma2 to the weighted mean
/// squared residual, floored at kVarianceFloor. Throws NumericalError when the
/// weights sum to zero or any input is non-finite.
LinearModelParams fit_weighted(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                               const Eigen::VectorXd& weights, double ridge = kRidge);

/// Weighted mean squared residual before flooring.
double weighted_residual_variance(const LinearModelParams& model, const Eigen::MatrixXd& inputs,
                                  const Eigen::VectorXd& targets, const Eigen::VectorXd& weights);

Eigen::VectorXd predict(const LinearModelParams& model, const Eigen::MatrixXd& inputs);

}  // namespace mixmi::linreg
