#include "mixmi/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace mixmi::gradcheck {

namespace {

using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using LVec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

long double patient_reference(long double theta, const gp::Series& s, long double jitter) {
    const Eigen::Index n = s.values.size();
    LMat R(n, n);
    LVec r(n), x(n), one = LVec::Ones(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x[i] = s.values[i];
        const long double dq = static_cast<long double>(s.times[i]) - s.query_time;
        r[i] = std::exp(-theta * dq * dq);
        for (Eigen::Index j = 0; j < n; ++j) {
            const long double d = static_cast<long double>(s.times[i]) - s.times[j];
            R(i, j) = std::exp(-theta * d * d);
        }
    }
    R.diagonal().array() += jitter;
    const LMat Ri = R.fullPivLu().inverse();

    const long double gc = one.dot(Ri * one);
    const long double fc = 1.0L - one.dot(Ri * r);
    const LVec coef = (fc / gc) * one + r;
    const long double mean = coef.dot(Ri * x);
    const LVec C = x - one * (one.dot(Ri * x) / gc);
    const long double s2 = C.dot(Ri * C) / static_cast<long double>(n);
    const long double h = s2 * (1.0L - r.dot(Ri * r) + fc * fc / gc);

    const long double var = std::max(h, static_cast<long double>(gp::kVarianceFloor));
    const long double e = static_cast<long double>(s.target) - mean;
    return -0.5L * std::log(2.0L * std::numbers::pi_v<long double> * var) - e * e / (2.0L * var);
}

}  // namespace

Instance random_instance(Rng& rng) {
    std::uniform_int_distribution<int> patients(1, 10), points(3, 8);
    std::uniform_real_distribution<double> log_theta(std::log(0.1), std::log(10.0));
    std::uniform_real_distribution<double> gap(0.5, 1.5), weight(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    Instance inst;
    inst.theta = std::exp(log_theta(rng));
    const int P = patients(rng);
    inst.weights.resize(P);
    for (int p = 0; p < P; ++p) {
        const int n = points(rng);
        // n series points plus one query time, query placed at a random slot.
        std::vector<double> t(static_cast<std::size_t>(n) + 1);
        t[0] = 0.0;
        for (std::size_t i = 1; i < t.size(); ++i) t[i] = t[i - 1] + gap(rng);
        std::uniform_int_distribution<std::size_t> slot(0, t.size() - 1);
        const std::size_t q = slot(rng);
        gp::Series s;
        s.values.resize(n);
        s.times.resize(n);
        Eigen::Index j = 0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (i == q) continue;
            s.times[j] = t[i];
            s.values[j] = normal(rng);
            ++j;
        }
        s.query_time = t[q];
        s.target = normal(rng);
        inst.series.push_back(std::move(s));
        inst.weights[p] = 1.0 - weight(rng);  // (0, 1]
    }
    return inst;
}

long double reference_loglik(double theta, const Instance& inst, double jitter) {
    long double total = 0.0L;
    for (std::size_t p = 0; p < inst.series.size(); ++p)
        total += static_cast<long double>(inst.weights[static_cast<Eigen::Index>(p)]) *
                 patient_reference(theta, inst.series[p], jitter);
    return total;
}

double relative_error(double analytic, double numeric) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / scale;
}

Summary run(const Options& options) {
    Summary summary;
    for (std::size_t i = 0; i < options.instances; ++i) {
        Rng rng = make_stream(options.seed, i, Stream::Gradcheck);
        const Instance inst = random_instance(rng);
        const auto g = gp::weighted_loglik_and_grad(inst.theta, inst.series, inst.weights);

        const long double lt = std::log(static_cast<long double>(inst.theta));
        const long double up = reference_loglik(static_cast<double>(std::exp(lt + options.step)), inst);
        const long double dn = reference_loglik(static_cast<double>(std::exp(lt - options.step)), inst);

        Result r;
        r.index = i;
        r.theta = inst.theta;
        r.patients = inst.series.size();
        r.analytic = g.gradient * inst.theta * (1.0 + options.perturb);
        r.numeric = static_cast<double>((up - dn) / (2.0L * options.step));
        r.rel_error = relative_error(r.analytic, r.numeric);
        r.pass = r.rel_error < options.tolerance;
        summary.max_rel_error = std::max(summary.max_rel_error, r.rel_error);
        summary.all_pass = summary.all_pass && r.pass;
        summary.results.push_back(r);
    }
    return summary;
}

}  // namespace mixmi::gradcheck
