#pragma once

// Per-patient inner loops. Each kernel has an OpenMP version and a serial
// reference with identical per-element arithmetic; results are written by
// index, so both produce bit-identical output at any thread count. Callers
// reduce the outputs in patient order.

#include "mixmi/gp.hpp"

#include <Eigen/Dense>

#include <span>

namespace mixmi::kernels {

/// Cholesky-factored multivariate normal, ready for repeated log-density calls.
struct GaussianFactor {
    Eigen::VectorXd mean;
    Eigen::MatrixXd lower;  ///< L with cov = L L'
    double log_norm = 0.0;  ///< -0.5 (d ln 2pi + ln det cov)
};

/// Throws NumericalError if `cov` is not positive definite.
GaussianFactor factorize(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);

double gaussian_logpdf(const GaussianFactor& g, const Eigen::Ref<const Eigen::VectorXd>& x);

/// out[i] = ln N(rows.row(i) | g).
void gaussian_logpdf_rows_serial(const Eigen::MatrixXd& rows, const GaussianFactor& g, std::span<double> out);
void gaussian_logpdf_rows_parallel(const Eigen::MatrixXd& rows, const GaussianFactor& g, std::span<double> out);

/// out[i] = weights[i] * (ln N, d/dtheta ln N) for usable series with positive
/// weight, zero otherwise; used[i] flags which entries count.
void gp_loglik_terms_serial(double theta, std::span<const gp::Series> series, const Eigen::VectorXd& weights,
                            double jitter, std::span<gp::PatientLoglik> out, std::span<unsigned char> used);
void gp_loglik_terms_parallel(double theta, std::span<const gp::Series> series, const Eigen::VectorXd& weights,
                              double jitter, std::span<gp::PatientLoglik> out, std::span<unsigned char> used);

/// Predictive mean/variance per series (no derivatives). Unusable series get
/// NaN in both fields.
void gp_predict_serial(double theta, std::span<const gp::Series> series, double jitter,
                       std::span<gp::GpPrediction> out);
void gp_predict_parallel(double theta, std::span<const gp::Series> series, double jitter,
                         std::span<gp::GpPrediction> out);

}  // namespace mixmi::kernels
