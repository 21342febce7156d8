#include "mixmi/kernels.hpp"

#include "mixmi/error.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <vector>
#include <numbers>

namespace mixmi::kernels {

namespace {

// Exceptions may not leave an OpenMP region. Each iteration records its own
// failure and the lowest-index one is rethrown afterwards, matching what the
// serial loop would have thrown.
template <class Body>
void parallel_for(std::ptrdiff_t n, Body body) {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    bool failed = false;
#pragma omp parallel for schedule(static) reduction(|| : failed)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            body(i);
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
            failed = true;
        }
    }
    if (!failed) return;
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace

GaussianFactor factorize(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw NumericalError("covariance is not positive definite");
    GaussianFactor g;
    g.mean = mean;
    g.lower = llt.matrixL();
    const double logdet = 2.0 * g.lower.diagonal().array().log().sum();
    if (!std::isfinite(logdet)) throw NumericalError("covariance has non-finite log-determinant");
    g.log_norm = -0.5 * (static_cast<double>(mean.size()) * std::log(2.0 * std::numbers::pi) + logdet);
    return g;
}

double gaussian_logpdf(const GaussianFactor& g, const Eigen::Ref<const Eigen::VectorXd>& x) {
    const Eigen::VectorXd y = g.lower.triangularView<Eigen::Lower>().solve(x - g.mean);
    return g.log_norm - 0.5 * y.squaredNorm();
}

void gaussian_logpdf_rows_serial(const Eigen::MatrixXd& rows, const GaussianFactor& g, std::span<double> out) {
    for (Eigen::Index i = 0; i < rows.rows(); ++i)
        out[static_cast<std::size_t>(i)] = gaussian_logpdf(g, rows.row(i).transpose());
}

void gaussian_logpdf_rows_parallel(const Eigen::MatrixXd& rows, const GaussianFactor& g, std::span<double> out) {
    parallel_for(rows.rows(), [&](std::ptrdiff_t i) {
        out[static_cast<std::size_t>(i)] = gaussian_logpdf(g, rows.row(i).transpose());
    });
}

namespace {

inline void gp_loglik_one(double theta, const gp::Series& s, double w, double jitter, gp::PatientLoglik& out,
                          unsigned char& used) {
    out = {};
    used = 0;
    if (!(w > 0.0) || !gp::usable(s)) return;
    const auto t = gp::patient_loglik(theta, s, jitter);
    out.value = w * t.value;
    out.gradient = w * t.gradient;
    used = 1;
}

inline gp::GpPrediction gp_predict_one(double theta, const gp::Series& s, double jitter) {
    if (!gp::usable(s)) {
        constexpr double nan = std::numeric_limits<double>::quiet_NaN();
        return {nan, nan};
    }
    const auto t = gp::prediction_terms(theta, s, jitter, false);
    return {t.mean, std::max(t.variance, 0.0)};
}

}  // namespace

void gp_loglik_terms_serial(double theta, std::span<const gp::Series> series, const Eigen::VectorXd& weights,
                            double jitter, std::span<gp::PatientLoglik> out, std::span<unsigned char> used) {
    for (std::size_t i = 0; i < series.size(); ++i)
        gp_loglik_one(theta, series[i], weights[static_cast<Eigen::Index>(i)], jitter, out[i], used[i]);
}

void gp_loglik_terms_parallel(double theta, std::span<const gp::Series> series, const Eigen::VectorXd& weights,
                              double jitter, std::span<gp::PatientLoglik> out, std::span<unsigned char> used) {
    parallel_for(static_cast<std::ptrdiff_t>(series.size()), [&](std::ptrdiff_t i) {
        const auto k = static_cast<std::size_t>(i);
        gp_loglik_one(theta, series[k], weights[i], jitter, out[k], used[k]);
    });
}

void gp_predict_serial(double theta, std::span<const gp::Series> series, double jitter,
                       std::span<gp::GpPrediction> out) {
    for (std::size_t i = 0; i < series.size(); ++i) out[i] = gp_predict_one(theta, series[i], jitter);
}

void gp_predict_parallel(double theta, std::span<const gp::Series> series, double jitter,
                         std::span<gp::GpPrediction> out) {
    parallel_for(static_cast<std::ptrdiff_t>(series.size()), [&](std::ptrdiff_t i) {
        const auto k = static_cast<std::size_t>(i);
        out[k] = gp_predict_one(theta, series[k], jitter);
    });
}

}  // namespace mixmi::kernels
