#include "mixmi/gp.hpp"

#include "mixmi/error.hpp"
#include "mixmi/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mixmi::gp {

Series make_series(const Eigen::VectorXd& values, const Eigen::VectorXd& times, double query_time, double target) {
    Series s;
    s.values = values;
    s.target = target;
    double lo = query_time, hi = query_time;
    if (times.size() > 0) {
        lo = std::min(lo, times.minCoeff());
        hi = std::max(hi, times.maxCoeff());
    }
    // Unit mean spacing: n series points plus the query span n gaps.
    const double gap = (hi - lo) / static_cast<double>(times.size() > 0 ? times.size() : 1);
    if (gap > 0.0) {
        s.times = (times.array() - lo) / gap;
        s.query_time = (query_time - lo) / gap;
    } else {
        s.times = times.array() - lo;
        s.query_time = 0.0;
    }
    return s;
}

bool usable(const Series& s) {
    const auto n = s.times.size();
    if (n < 2 || s.values.size() != n) return false;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            if (s.times[i] == s.times[j]) return false;
    return s.values.allFinite() && s.times.allFinite();
}

Eigen::MatrixXd correlation_matrix(const Eigen::VectorXd& times, double theta) {
    if (!std::isfinite(theta)) throw NumericalError("correlation_matrix: non-finite theta");
    const auto n = times.size();
    Eigen::MatrixXd r(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        r(i, i) = 1.0;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double d = times[i] - times[j];
            r(i, j) = r(j, i) = std::exp(-theta * d * d);
        }
    }
    return r;
}

PredictionTerms prediction_terms(double theta, const Series& s, double jitter, bool with_gradient) {
    if (!std::isfinite(theta)) throw NumericalError("gp: non-finite theta");
    const auto n = s.times.size();
    if (n < 2) throw NumericalError("gp: series needs at least two points");

    Eigen::MatrixXd R = correlation_matrix(s.times, theta);
    R.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(R);
    if (llt.info() != Eigen::Success) throw NumericalError("gp: correlation matrix not positive definite");

    Eigen::VectorXd r(n), dr(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = s.query_time - s.times[i];
        r[i] = std::exp(-theta * d * d);
        dr[i] = -d * d * r[i];
    }
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd a = llt.solve(ones);      // R^-1 1
    const Eigen::VectorXd u = llt.solve(r);         // R^-1 r
    const Eigen::VectorXd z = llt.solve(s.values);  // R^-1 x

    const double gc = a.sum();
    const double f = 1.0 - a.dot(r);
    const double mu = z.sum() / gc;
    const Eigen::VectorXd w = z - mu * a;  // R^-1 C
    const double q = (s.values.array() - mu).matrix().dot(w);
    const double s2 = q / static_cast<double>(n);
    const double h3 = 1.0 - r.dot(u) + f * f / gc;

    PredictionTerms out;
    out.mean = r.dot(z) + f * mu;
    out.variance = s2 * h3;
    if (!with_gradient) return out;

    Eigen::MatrixXd dR(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        dR(i, i) = 0.0;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double d = s.times[i] - s.times[j];
            dR(i, j) = dR(j, i) = -d * d * (R(i, j));
        }
    }
    const Eigen::VectorXd dRa = dR * a;
    const Eigen::VectorXd dRz = dR * z;
    const Eigen::VectorXd dRu = dR * u;

    const double d_gc = -a.dot(dRa);
    const double d_f = -a.dot(dr) + a.dot(dRu);
    const double d_mu = (-a.dot(dRz) - mu * d_gc) / gc;
    const double d_rz = dr.dot(z) - u.dot(dRz);
    out.d_mean = d_rz + d_f * mu + f * d_mu;

    const double d_ru = 2.0 * dr.dot(u) - u.dot(dRu);
    const double d_h3 = -d_ru + (2.0 * f * d_f * gc - f * f * d_gc) / (gc * gc);
    // 1'R^-1 C = 0, so the mean-shift term of dq vanishes.
    const double d_s2 = -w.dot(dR * w) / static_cast<double>(n);
    out.d_variance = d_s2 * h3 + s2 * d_h3;
    return out;
}

GpPrediction blup_predict(double theta, const Eigen::VectorXd& values, const Eigen::VectorXd& times,
                          double query_time, double jitter) {
    Series s;
    s.values = values;
    s.times = times;
    s.query_time = query_time;
    if (times.size() < 2) throw NumericalError("blup_predict: insufficient series (need at least 2 points)");
    if (values.size() != times.size()) throw NumericalError("blup_predict: values and times differ in length");
    if (!usable(s)) throw NumericalError("blup_predict: duplicate or non-finite times");
    const auto t = prediction_terms(theta, s, jitter, false);
    return {t.mean, std::max(t.variance, 0.0)};
}

double log_density(double x, double mean, double variance) {
    const double h = std::max(variance, kVarianceFloor);
    const double e = x - mean;
    return -0.5 * (std::log(2.0 * std::numbers::pi * h) + e * e / h);
}

PatientLoglik patient_loglik(double theta, const Series& s, double jitter) {
    const auto t = prediction_terms(theta, s, jitter, true);
    const double e = s.target - t.mean;
    PatientLoglik out;
    out.value = log_density(s.target, t.mean, t.variance);
    if (t.variance > kVarianceFloor) {
        const double h = t.variance;
        out.gradient = -t.d_variance / (2.0 * h) + e * t.d_mean / h + t.d_variance * e * e / (2.0 * h * h);
    } else {
        out.gradient = e * t.d_mean / kVarianceFloor;
    }
    return out;
}

LoglikGrad weighted_loglik_and_grad(double theta, std::span<const Series> series, const Eigen::VectorXd& weights,
                                    double jitter) {
    if (static_cast<Eigen::Index>(series.size()) != weights.size())
        throw NumericalError("weighted_loglik_and_grad: weight count mismatch");
    std::vector<PatientLoglik> terms(series.size());
    std::vector<unsigned char> used(series.size(), 0);
    kernels::gp_loglik_terms_parallel(theta, series, weights, jitter, terms, used);

    LoglikGrad out;
    bool any_usable = false;
    for (std::size_t i = 0; i < series.size(); ++i) {
        any_usable = any_usable || usable(series[i]);
        if (!used[i]) continue;
        out.value += terms[i].value;
        out.gradient += terms[i].gradient;
        ++out.used;
    }
    if (!any_usable) throw UntrainableError("gp: no patient has a usable series");
    return out;
}

ThetaFit optimize_theta(double theta_init, std::span<const Series> series, const Eigen::VectorXd& weights,
                        int max_iters) {
    constexpr double kGradTol = 1e-6;
    constexpr double kArmijo = 1e-4;
    constexpr double kMinStep = 1e-12;
    constexpr double kMaxMove = 1.0;  // largest change of ln(theta) per iteration
    const double lo = std::log(kThetaMin), hi = std::log(kThetaMax);

    const double wsum = weights.sum();
    const double scale = wsum > 0.0 ? 1.0 / wsum : 1.0;

    double s = std::clamp(std::log(theta_init), lo, hi);
    auto eval = [&](double log_theta) {
        const double theta = std::exp(log_theta);
        const auto lg = weighted_loglik_and_grad(theta, series, weights);
        return std::pair{lg.value, lg.gradient * theta};  // gradient in ln(theta)
    };

    auto [f, g] = eval(s);
    ThetaFit fit;
    fit.initial_objective = f;
    fit.trace.push_back(f);

    auto projected = [&](double grad) {
        if ((s <= lo && grad < 0.0) || (s >= hi && grad > 0.0)) return 0.0;
        return grad;
    };

    int it = 0;
    for (; it < max_iters; ++it) {
        const double pg = projected(g) * scale;
        if (std::abs(pg) < kGradTol) break;
        double step = 1.0;
        bool accepted = false;
        while (step >= kMinStep) {
            const double cand = std::clamp(s + std::clamp(step * pg, -kMaxMove, kMaxMove), lo, hi);
            const double moved = cand - s;
            if (moved == 0.0) break;
            auto [fc, gc] = eval(cand);
            if (std::isfinite(fc) && fc * scale >= f * scale + kArmijo * pg * moved) {
                s = cand;
                f = fc;
                g = gc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        fit.trace.push_back(f);
    }
    fit.iterations = it;
    fit.kernel.theta = std::clamp(fit.trace.size() > 1 ? std::exp(s) : theta_init, kThetaMin, kThetaMax);
    fit.objective = f;
    return fit;
}

}  // namespace mixmi::gp
