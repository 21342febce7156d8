#include "mixmi/simdata.hpp"

#include "mixmi/error.hpp"
#include "mixmi/evaluation.hpp"
#include "mixmi/gp.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <random>

namespace mixmi::sim {

namespace {

constexpr double kSampleJitter = 1e-9;

void validate(const SimSpec& s) {
    if (s.patients < 1 || s.variables < 2 || s.times < 2) throw ConfigError("simulation needs P >= 1, V >= 2, B >= 2");
    if (!(s.missing_fraction >= 0.0 && s.missing_fraction < 1.0))
        throw ConfigError("missing fraction must be in [0, 1)");
    double total = 0.0;
    for (double p : s.pi) {
        if (!(p >= 0.0)) throw ConfigError("component probabilities must be non-negative");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("component probabilities must sum to 1");
    if (!(s.theta > 0.0) || !(s.noise >= 0.0) || !(std::abs(s.ar) < 1.0))
        throw ConfigError("invalid simulation parameters");
    if (!(s.gap_min > 0.0) || !(s.gap_max >= s.gap_min)) throw ConfigError("invalid time gaps");
}

Eigen::MatrixXd draw_loadings(std::size_t V, Rng& rng) {
    const std::size_t factors = V > 3 ? V - 2 : 1;
    std::uniform_real_distribution<double> mag(0.5, 1.5);
    std::bernoulli_distribution sign(0.5);
    Eigen::MatrixXd L(static_cast<Eigen::Index>(V), static_cast<Eigen::Index>(factors));
    for (Eigen::Index i = 0; i < L.rows(); ++i)
        for (Eigen::Index j = 0; j < L.cols(); ++j) L(i, j) = (sign(rng) ? -1.0 : 1.0) * mag(rng);
    return L;
}

}  // namespace

std::string to_string(GenerativeMode mode) {
    switch (mode) {
        case GenerativeMode::LinearCross: return "linear-cross";
        case GenerativeMode::GpTemporal: return "gp-temporal";
        case GenerativeMode::Mixed: return "mixed";
    }
    return "?";
}

GenerativeMode generative_mode_from_string(const std::string& name) {
    for (auto m : {GenerativeMode::LinearCross, GenerativeMode::GpTemporal, GenerativeMode::Mixed})
        if (to_string(m) == name) return m;
    throw ConfigError("unknown generative mode '" + name + "'");
}

SimData generate_simdata(const SimSpec& spec, Rng& rng) {
    validate(spec);
    const std::size_t P = spec.patients, V = spec.variables, B = spec.times;
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> gap(spec.gap_min, spec.gap_max);
    std::discrete_distribution<int> label(spec.pi.begin(), spec.pi.end());

    const Eigen::MatrixXd L = draw_loadings(V, rng);
    // Rows scaled so every variable has unit variance before noise.
    const Eigen::VectorXd row_norm = L.rowwise().norm();

    SimData out{MeasurementTensor(P, V, B), TimeTensor(P, V, B), MeasurementTensor(P, V, B), std::vector<int>(P, 0)};
    for (std::size_t p = 0; p < P; ++p) {
        int k = 0;
        switch (spec.mode) {
            case GenerativeMode::LinearCross: k = 0; break;
            case GenerativeMode::GpTemporal: k = 2; break;
            case GenerativeMode::Mixed: k = label(rng); break;
        }
        out.labels[p] = k;

        Eigen::VectorXd t(static_cast<Eigen::Index>(B));
        t[0] = 0.0;
        for (Eigen::Index b = 1; b < t.size(); ++b) t[b] = t[b - 1] + gap(rng);
        for (std::size_t v = 0; v < V; ++v)
            for (std::size_t b = 0; b < B; ++b) out.times.set(p, v, b, t[static_cast<Eigen::Index>(b)]);

        auto put = [&](std::size_t v, std::size_t b, double value) {
            out.truth.set_value(p, v, b, value);
            out.truth.set_observed(p, v, b, true);
        };
        if (k == 0) {
            for (std::size_t b = 0; b < B; ++b) {
                Eigen::VectorXd z(L.cols());
                for (auto& zi : z) zi = normal(rng);
                const Eigen::VectorXd x = (L * z).cwiseQuotient(row_norm);
                for (std::size_t v = 0; v < V; ++v) put(v, b, x[static_cast<Eigen::Index>(v)] + spec.noise * normal(rng));
            }
        } else if (k == 1) {
            const double innovation = std::sqrt(1.0 - spec.ar * spec.ar);
            for (std::size_t v = 0; v < V; ++v) {
                double x = normal(rng);
                for (std::size_t b = 0; b < B; ++b) {
                    if (b > 0) x = spec.ar * x + innovation * normal(rng);
                    put(v, b, x + spec.noise * normal(rng));
                }
            }
        } else {
            Eigen::MatrixXd R = gp::correlation_matrix(t, spec.theta);
            R.diagonal().array() += kSampleJitter;
            const Eigen::LLT<Eigen::MatrixXd> llt(R);
            if (llt.info() != Eigen::Success) throw NumericalError("GP sampling covariance is not positive definite");
            for (std::size_t v = 0; v < V; ++v) {
                Eigen::VectorXd e(t.size());
                for (auto& ei : e) ei = normal(rng);
                const Eigen::VectorXd x = llt.matrixL() * e;
                for (std::size_t b = 0; b < B; ++b) put(v, b, x[static_cast<Eigen::Index>(b)]);
            }
        }
    }

    const auto count =
        static_cast<std::size_t>(std::floor(spec.missing_fraction * static_cast<double>(out.truth.observed_count())));
    out.observed = out.truth;
    for (const auto& c : eval::sample_observed_cells(out.truth, count, rng))
        out.observed.set_missing(c.patient, c.variable, c.time_index);
    return out;
}

Dataset to_dataset(const MeasurementTensor& x, const TimeTensor& t) {
    Dataset d{x, t, {}, {}};
    for (std::size_t p = 0; p < x.patients(); ++p) d.patient_ids.push_back("p" + std::to_string(p));
    for (std::size_t v = 0; v < x.variables(); ++v) d.variable_names.push_back("v" + std::to_string(v));
    return d;
}

}  // namespace mixmi::sim
