#include "mixmi/mixture.hpp"

#include "mixmi/error.hpp"
#include "mixmi/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mixmi::mixture {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Normalizes each row of log-scores in place into probabilities. Rows with
// every score -inf become uniform; returns ln sum exp per row (-inf for those).
Eigen::VectorXd normalize_rows(Eigen::MatrixXd& scores) {
    Eigen::VectorXd lse(scores.rows());
    const auto k = scores.cols();
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        const double mx = scores.row(i).maxCoeff();
        if (!std::isfinite(mx)) {
            scores.row(i).setConstant(1.0 / static_cast<double>(k));
            lse[i] = kNegInf;
            continue;
        }
        double sum = 0.0;
        for (Eigen::Index j = 0; j < k; ++j) {
            scores(i, j) = std::exp(scores(i, j) - mx);
            sum += scores(i, j);
        }
        scores.row(i) /= sum;
        lse[i] = mx + std::log(sum);
    }
    return lse;
}

double log_or_neginf(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

Eigen::MatrixXd with_ridge(Eigen::MatrixXd cov, bool diagonal) {
    const auto d = cov.rows();
    if (diagonal) cov = Eigen::MatrixXd(cov.diagonal().asDiagonal());
    const double tr = cov.trace();
    const double ridge = tr > 0.0 ? kCovRidge * tr / static_cast<double>(d) : kCovRidge;
    cov.diagonal().array() += ridge;
    return cov;
}

bool use_diagonal(const EmSettings& s, std::size_t rows, std::size_t dim) {
    switch (s.covariance) {
        case CovarianceMode::Full: return false;
        case CovarianceMode::Diagonal: return true;
        case CovarianceMode::Auto: return rows < 2 * dim;
    }
    return false;
}

// Log-scores pi_k N(V_p | delta_k) for every row and component.
Eigen::MatrixXd input_log_scores(const MixtureParams& params, const Eigen::MatrixXd& rows) {
    const auto n = rows.rows();
    const auto K = static_cast<Eigen::Index>(params.size());
    Eigen::MatrixXd scores(n, K);
    std::vector<double> col(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < K; ++k) {
        const double lp = log_or_neginf(params.pi[k]);
        if (lp == kNegInf) {
            scores.col(k).setConstant(kNegInf);
            continue;
        }
        const auto& g = params.gauss[static_cast<std::size_t>(k)];
        const auto f = kernels::factorize(g.mean, g.cov);
        kernels::gaussian_logpdf_rows_parallel(rows, f, col);
        for (Eigen::Index i = 0; i < n; ++i) scores(i, k) = lp + col[static_cast<std::size_t>(i)];
    }
    return scores;
}

}  // namespace

std::vector<ComponentKind> components_of(ModelKind kind) {
    switch (kind) {
        case ModelKind::Full: return {ComponentKind::Cross, ComponentKind::Temporal, ComponentKind::Gp};
        case ModelKind::LinearLinear: return {ComponentKind::Cross, ComponentKind::Temporal};
        case ModelKind::CrossOnly: return {ComponentKind::Cross};
        case ModelKind::TemporalOnly: return {ComponentKind::Temporal};
        case ModelKind::GpOnly: return {ComponentKind::Gp};
    }
    return {};
}

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::Full: return "full";
        case ModelKind::LinearLinear: return "LL";
        case ModelKind::CrossOnly: return "cross";
        case ModelKind::TemporalOnly: return "temporal";
        case ModelKind::GpOnly: return "gp";
    }
    return "?";
}

ModelKind model_kind_from_string(const std::string& name) {
    for (auto k : {ModelKind::Full, ModelKind::LinearLinear, ModelKind::CrossOnly, ModelKind::TemporalOnly,
                   ModelKind::GpOnly})
        if (to_string(k) == name) return k;
    throw ConfigError("unknown model kind '" + name + "'");
}

bool MixtureParams::has(ComponentKind c) const {
    return std::find(components.begin(), components.end(), c) != components.end();
}

PreparedSlice prepare(FiberSlice slice) {
    PreparedSlice d;
    d.rows = slice.v_rows();
    const auto n = slice.rows();
    d.series.reserve(n);
    d.gp_usable.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        d.series.push_back(gp::make_series(slice.temporal_inputs.row(r).transpose(),
                                           slice.temporal_times.row(r).transpose(), slice.target_times[r],
                                           slice.target[r]));
        d.gp_usable[i] = gp::usable(d.series.back()) ? 1 : 0;
        d.any_gp_usable = d.any_gp_usable || d.gp_usable[i];
    }
    d.slice = std::move(slice);
    return d;
}

MixtureParams init_params(const PreparedSlice& data, ModelKind kind, const Eigen::VectorXd& pi0,
                          const EmSettings& settings) {
    const auto n = static_cast<Eigen::Index>(data.size());
    if (n == 0) throw UntrainableError("init_params: empty training slice");
    MixtureParams p;
    p.kind = kind;
    p.components = components_of(kind);
    if (pi0.size() != static_cast<Eigen::Index>(p.size()))
        throw ConfigError("init_params: pi0 has " + std::to_string(pi0.size()) + " entries, model needs " +
                          std::to_string(p.size()));
    if (p.has(ComponentKind::Gp) && !data.any_gp_usable)
        throw UntrainableError("init_params: no patient has a usable GP series");
    p.pi = pi0;
    p.diagonal = use_diagonal(settings, data.size(), data.slice.dim());

    const Eigen::VectorXd mean = data.rows.colwise().mean();
    const Eigen::MatrixXd centered = data.rows.rowwise() - mean.transpose();
    const Eigen::MatrixXd cov = with_ridge(centered.transpose() * centered / static_cast<double>(n), p.diagonal);
    p.gauss.assign(p.size(), GaussianParams{mean, cov});

    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const auto& s = data.slice;
    if (p.has(ComponentKind::Cross)) p.cross = linreg::fit_weighted(s.cross_inputs, s.target, ones);
    if (p.has(ComponentKind::Temporal)) p.temporal = linreg::fit_weighted(s.temporal_inputs, s.target, ones);
    p.kernel.theta = 1.0;
    return p;
}

Eigen::MatrixXd target_log_densities(const MixtureParams& params, const PreparedSlice& data) {
    const auto n = static_cast<Eigen::Index>(data.size());
    const auto K = static_cast<Eigen::Index>(params.size());
    const auto& s = data.slice;
    Eigen::MatrixXd out(n, K);
    for (Eigen::Index k = 0; k < K; ++k) {
        switch (params.components[static_cast<std::size_t>(k)]) {
            case ComponentKind::Cross: {
                const Eigen::VectorXd m = linreg::predict(params.cross, s.cross_inputs);
                for (Eigen::Index i = 0; i < n; ++i)
                    out(i, k) = gp::log_density(s.target[i], m[i], params.cross.sigma2);
                break;
            }
            case ComponentKind::Temporal: {
                const Eigen::VectorXd m = linreg::predict(params.temporal, s.temporal_inputs);
                for (Eigen::Index i = 0; i < n; ++i)
                    out(i, k) = gp::log_density(s.target[i], m[i], params.temporal.sigma2);
                break;
            }
            case ComponentKind::Gp: {
                std::vector<gp::GpPrediction> pred(data.size());
                kernels::gp_predict_parallel(params.kernel.theta, data.series, gp::kJitter, pred);
                for (Eigen::Index i = 0; i < n; ++i) {
                    const auto& pr = pred[static_cast<std::size_t>(i)];
                    out(i, k) = std::isnan(pr.mean) ? kNegInf : gp::log_density(s.target[i], pr.mean, pr.variance);
                }
                break;
            }
        }
    }
    return out;
}

Responsibilities e_step(const MixtureParams& params, const PreparedSlice& data) {
    Eigen::MatrixXd scores = input_log_scores(params, data.rows) + target_log_densities(params, data);
    Responsibilities r;
    const Eigen::VectorXd lse = normalize_rows(scores);
    for (Eigen::Index i = 0; i < lse.size(); ++i) {
        if (lse[i] == kNegInf)
            ++r.degenerate;
        else
            r.loglik += lse[i];
    }
    r.w = std::move(scores);
    return r;
}

MixtureParams m_step(const MixtureParams& params, const PreparedSlice& data, const Responsibilities& resp,
                     const EmSettings& settings) {
    const auto n = static_cast<Eigen::Index>(data.size());
    const auto K = static_cast<Eigen::Index>(params.size());
    if (resp.w.rows() != n || resp.w.cols() != K) throw NumericalError("m_step: responsibility shape mismatch");
    MixtureParams next = params;
    const auto& s = data.slice;
    for (Eigen::Index k = 0; k < K; ++k) {
        const Eigen::VectorXd w = resp.w.col(k);
        const double nk = w.sum();
        next.pi[k] = nk / static_cast<double>(n);
        if (nk < kEmptyComponent) continue;

        auto& g = next.gauss[static_cast<std::size_t>(k)];
        g.mean = (data.rows.transpose() * w) / nk;
        const Eigen::MatrixXd centered = data.rows.rowwise() - g.mean.transpose();
        const Eigen::MatrixXd wc = centered.array().colwise() * w.array();
        g.cov = with_ridge(centered.transpose() * wc / nk, params.diagonal);

        switch (params.components[static_cast<std::size_t>(k)]) {
            case ComponentKind::Cross: next.cross = linreg::fit_weighted(s.cross_inputs, s.target, w); break;
            case ComponentKind::Temporal:
                next.temporal = linreg::fit_weighted(s.temporal_inputs, s.target, w);
                break;
            case ComponentKind::Gp:
                next.kernel = gp::optimize_theta(params.kernel.theta, data.series, w, settings.theta_iters).kernel;
                break;
        }
    }
    return next;
}

FitResult fit_em(const PreparedSlice& data, ModelKind kind, const Eigen::VectorXd& pi0, const EmSettings& settings) {
    FitResult out;
    MixtureParams params = init_params(data, kind, pi0, settings);
    Responsibilities resp = e_step(params, data);
    out.params = params;
    out.loglik = resp.loglik;
    out.trace.push_back(resp.loglik);
    double prev = resp.loglik;
    for (int it = 0; it < settings.max_iters; ++it) {
        params = m_step(params, data, resp, settings);
        resp = e_step(params, data);
        out.trace.push_back(resp.loglik);
        out.iterations = it + 1;
        if (resp.loglik > out.loglik) {
            out.params = params;
            out.loglik = resp.loglik;
        }
        if (std::abs(resp.loglik - prev) / (std::abs(prev) + 1.0) < settings.rel_tol) break;
        prev = resp.loglik;
    }
    return out;
}

Eigen::MatrixXd individualized_weights(const MixtureParams& params, const Eigen::MatrixXd& rows) {
    Eigen::MatrixXd scores = input_log_scores(params, rows);
    normalize_rows(scores);
    return scores;
}

Eigen::MatrixXd component_means(const MixtureParams& params, const PreparedSlice& data) {
    const auto n = static_cast<Eigen::Index>(data.size());
    const auto K = static_cast<Eigen::Index>(params.size());
    Eigen::MatrixXd m(n, K);
    for (Eigen::Index k = 0; k < K; ++k) {
        switch (params.components[static_cast<std::size_t>(k)]) {
            case ComponentKind::Cross: m.col(k) = linreg::predict(params.cross, data.slice.cross_inputs); break;
            case ComponentKind::Temporal:
                m.col(k) = linreg::predict(params.temporal, data.slice.temporal_inputs);
                break;
            case ComponentKind::Gp: {
                std::vector<gp::GpPrediction> pred(data.size());
                kernels::gp_predict_parallel(params.kernel.theta, data.series, gp::kJitter, pred);
                for (Eigen::Index i = 0; i < n; ++i) m(i, k) = pred[static_cast<std::size_t>(i)].mean;
                break;
            }
        }
    }
    return m;
}

Imputation impute_fiber(const MixtureParams& params, const PreparedSlice& data, bool fixed_weights) {
    const auto n = static_cast<Eigen::Index>(data.size());
    const auto K = static_cast<Eigen::Index>(params.size());
    Imputation out;
    out.values.resize(n);
    out.weights = fixed_weights ? Eigen::MatrixXd(params.pi.transpose().replicate(n, 1))
                                : individualized_weights(params, data.rows);
    const Eigen::MatrixXd means = component_means(params, data);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto row = out.weights.row(i);
        double mass = 0.0;
        for (Eigen::Index k = 0; k < K; ++k) {
            if (std::isnan(means(i, k))) row[k] = 0.0;
            mass += row[k];
        }
        if (!(mass > 0.0)) {
            // Every usable component had zero weight: fall back to pi, then uniform.
            for (Eigen::Index k = 0; k < K; ++k) row[k] = std::isnan(means(i, k)) ? 0.0 : params.pi[k];
            mass = row.sum();
            if (!(mass > 0.0)) {
                for (Eigen::Index k = 0; k < K; ++k) row[k] = std::isnan(means(i, k)) ? 0.0 : 1.0;
                mass = row.sum();
            }
        }
        if (!(mass > 0.0)) throw NumericalError("impute_fiber: no component can predict this patient");
        row /= mass;
        double v = 0.0;
        for (Eigen::Index k = 0; k < K; ++k)
            if (row[k] > 0.0) v += row[k] * means(i, k);
        out.values[i] = v;
    }
    return out;
}

double training_abs_error(const MixtureParams& params, const PreparedSlice& data, bool fixed_weights) {
    const auto imp = impute_fiber(params, data, fixed_weights);
    return (imp.values - data.slice.target).cwiseAbs().mean();
}

const MixtureParams& select_model(const Candidate& full, const Candidate& ll) {
    return full.error < ll.error ? full.params : ll.params;
}

}  // namespace mixmi::mixture
