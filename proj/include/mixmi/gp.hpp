#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace mixmi::gp {

inline constexpr double kJitter = 1e-8;
inline constexpr double kThetaMin = 1e-4;
inline constexpr double kThetaMax = 1e4;
/// Lower bound on the predictive variance wherever it enters a density.
inline constexpr double kVarianceFloor = 1e-8;

/// Squared-exponential decay shared by every patient of one (v, b) model.
struct KernelParams {
    double theta = 1.0;
};

struct GpPrediction {
    double mean = 0.0;
    double variance = 0.0;
};

/// One patient's temporal series for a (v, b) model: the other time indices
/// (values and times) plus the query time and, during training, the target.
struct Series {
    Eigen::VectorXd values;
    Eigen::VectorXd times;
    double query_time = 0.0;
    double target = 0.0;
};

/// Builds a series with times shifted and scaled so that `times` and
/// `query_time` together span [0, n] (unit mean spacing over the n + 1
/// points). Only distances enter the kernel, so the map is never inverted.
Series make_series(const Eigen::VectorXd& values, const Eigen::VectorXd& times, double query_time,
                   double target = 0.0);

/// True when the series has at least two points and pairwise distinct times.
bool usable(const Series& s);

/// R_{ij} = exp(-theta |t_i - t_j|^2), without jitter.
Eigen::MatrixXd correlation_matrix(const Eigen::VectorXd& times, double theta);

/// Kriging predictor with a generalized-least-squares constant mean.
///
/// mean     = mu + r' R^-1 (x - mu 1),  mu = 1'R^-1 x / 1'R^-1 1
/// variance = s2 [1 - r'R^-1 r + (1 - 1'R^-1 r)^2 / 1'R^-1 1],  s2 = C'R^-1 C / n
///
/// `jitter` is added to the diagonal of R before the Cholesky factorization.
/// Throws NumericalError for fewer than two points, duplicate times, or a
/// non-finite theta. The variance is clamped at zero.
GpPrediction blup_predict(double theta, const Eigen::VectorXd& values, const Eigen::VectorXd& times,
                          double query_time, double jitter = kJitter);

/// Predictive mean and variance with their derivatives in theta.
struct PredictionTerms {
    double mean = 0.0;
    double variance = 0.0;  ///< unclamped
    double d_mean = 0.0;
    double d_variance = 0.0;
};

PredictionTerms prediction_terms(double theta, const Series& s, double jitter = kJitter, bool with_gradient = true);

/// ln N(x | mean, max(variance, kVarianceFloor)).
double log_density(double x, double mean, double variance);

/// Per-patient contribution to the weighted log-likelihood and its theta-derivative.
struct PatientLoglik {
    double value = 0.0;
    double gradient = 0.0;
};

PatientLoglik patient_loglik(double theta, const Series& s, double jitter = kJitter);

struct LoglikGrad {
    double value = 0.0;
    double gradient = 0.0;  ///< d value / d theta
    std::size_t used = 0;   ///< patients that entered the sums
};

/// sum_p w_p ln N(x_p | g_p(theta), h_p(theta)) and its exact theta-derivative.
///
/// Unusable series and zero weights contribute nothing. Per-patient terms may
/// be evaluated in parallel; the sum runs in patient order. Throws
/// UntrainableError when no series is usable.
LoglikGrad weighted_loglik_and_grad(double theta, std::span<const Series> series, const Eigen::VectorXd& weights,
                                    double jitter = kJitter);

struct ThetaFit {
    KernelParams kernel;
    double objective = 0.0;          ///< weighted log-likelihood at the result
    double initial_objective = 0.0;  ///< weighted log-likelihood at theta_init
    int iterations = 0;
    std::vector<double> trace;  ///< objective after each accepted step, starting with the initial value
};

/// Projected gradient ascent on ln(theta) with Armijo backtracking.
///
/// Steps on the weight-normalized objective (initial step 1, contraction 0.5,
/// slope factor 1e-4) inside [kThetaMin, kThetaMax]. A single step never moves
/// ln(theta) by more than 1. Stops when the projected gradient falls below
/// 1e-6, the step underflows, or after `max_iters`.
ThetaFit optimize_theta(double theta_init, std::span<const Series> series, const Eigen::VectorXd& weights,
                        int max_iters = 50);

}  // namespace mixmi::gp
