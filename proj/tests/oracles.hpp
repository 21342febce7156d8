#pragma once

// Direct evaluations used as test oracles. Nothing here calls the library's
// numerical routines; inverses and determinants come from dense LU.

#include "mixmi/mixture.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

namespace oracles {

using namespace mixmi;
using mixture::ComponentKind;
using mixture::MixtureParams;
using mixture::PreparedSlice;

/// Kriging mean and variance from the displayed formulas with explicit inverses.
inline std::pair<double, double> direct_blup(double theta, const Eigen::VectorXd& x, const Eigen::VectorXd& t,
                                             double q, double jitter = 1e-8) {
    const auto n = t.size();
    Eigen::MatrixXd R(n, n);
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        r[i] = std::exp(-theta * (q - t[i]) * (q - t[i]));
        for (Eigen::Index j = 0; j < n; ++j) R(i, j) = std::exp(-theta * (t[i] - t[j]) * (t[i] - t[j]));
        R(i, i) += jitter;
    }
    const Eigen::MatrixXd Ri = R.fullPivLu().inverse();
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(n);
    const double gc = one.dot(Ri * one);
    const double fc = 1.0 - one.dot(Ri * r);
    const double mean = ((fc / gc) * one + r).dot(Ri * x);
    const Eigen::VectorXd c = x - one * (one.dot(Ri * x) / gc);
    const double s2 = c.dot(Ri * c) / static_cast<double>(n);
    return {mean, s2 * (1.0 - r.dot(Ri * r) + fc * fc / gc)};
}

/// ln N(x | mean, cov) in long double via LU determinant and inverse.
inline long double log_normal(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
    using M = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    const M c = cov.cast<long double>();
    const Eigen::FullPivLU<M> lu(c);
    const Eigen::Matrix<long double, Eigen::Dynamic, 1> d = (x - mean).cast<long double>();
    const long double quad = d.dot(lu.inverse() * d);
    return -0.5L * (static_cast<long double>(x.size()) * std::log(2.0L * std::numbers::pi_v<long double>) +
                    std::log(lu.determinant()) + quad);
}

inline long double log_normal1(double x, double mean, double var) {
    const long double v = std::max(var, 1e-8);
    const long double e = static_cast<long double>(x) - mean;
    return -0.5L * (std::log(2.0L * std::numbers::pi_v<long double> * v) + e * e / v);
}

// Component-k target log-density computed from scratch.
inline long double target_term(const MixtureParams& p, const PreparedSlice& d, std::size_t k, Eigen::Index i) {
    const auto& s = d.slice;
    const double y = s.target[i];
    switch (p.components[k]) {
        case ComponentKind::Cross: {
            double m = 0.0;
            for (Eigen::Index j = 0; j < s.cross_inputs.cols(); ++j) m += s.cross_inputs(i, j) * p.cross.beta[j];
            return log_normal1(y, m, p.cross.sigma2);
        }
        case ComponentKind::Temporal: {
            double m = 0.0;
            for (Eigen::Index j = 0; j < s.temporal_inputs.cols(); ++j)
                m += s.temporal_inputs(i, j) * p.temporal.beta[j];
            return log_normal1(y, m, p.temporal.sigma2);
        }
        case ComponentKind::Gp: {
            const auto& ser = d.series[static_cast<std::size_t>(i)];
            const auto [m, v] = direct_blup(p.kernel.theta, ser.values, ser.times, ser.query_time);
            return log_normal1(y, m, std::max(v, 0.0));
        }
    }
    return 0.0L;
}

/// Responsibilities (with the target densities) or input-only mixing weights.
inline Eigen::MatrixXd mixture_weights(const MixtureParams& p, const PreparedSlice& d, bool with_target) {
    const auto n = static_cast<Eigen::Index>(d.size());
    const auto K = p.size();
    Eigen::MatrixXd out(n, static_cast<Eigen::Index>(K));
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<long double> a(K);
        long double mx = -INFINITY;
        for (std::size_t k = 0; k < K; ++k) {
            a[k] = std::log(static_cast<long double>(p.pi[static_cast<Eigen::Index>(k)])) +
                   log_normal(d.rows.row(i).transpose(), p.gauss[k].mean, p.gauss[k].cov);
            if (with_target) a[k] += target_term(p, d, k, i);
            mx = std::max(mx, a[k]);
        }
        long double sum = 0.0L;
        for (auto& v : a) sum += (v = std::exp(v - mx));
        for (std::size_t k = 0; k < K; ++k) out(i, static_cast<Eigen::Index>(k)) = static_cast<double>(a[k] / sum);
    }
    return out;
}

/// Responsibility-weighted mean and covariance (ridge added as the library documents).
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> weighted_moments(const Eigen::MatrixXd& rows,
                                                                    const Eigen::VectorXd& w, double ridge) {
    const auto n = rows.rows(), d = rows.cols();
    double nk = 0.0;
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
    for (Eigen::Index i = 0; i < n; ++i) {
        nk += w[i];
        mu += w[i] * rows.row(i).transpose();
    }
    mu /= nk;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd c = rows.row(i).transpose() - mu;
        cov += w[i] * c * c.transpose();
    }
    cov /= nk;
    cov.diagonal().array() += ridge * cov.trace() / static_cast<double>(d);
    return {mu, cov};
}

/// Solution of (X'WX + ridge * mean(w) I) beta = X'Wy assembled row by row.
inline Eigen::VectorXd normal_equations(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                        double ridge) {
    const auto d = x.cols();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        a += w[i] * x.row(i).transpose() * x.row(i);
        rhs += w[i] * y[i] * x.row(i).transpose();
    }
    a.diagonal().array() += ridge * w.mean();
    return a.fullPivLu().solve(rhs);
}

}  // namespace oracles
