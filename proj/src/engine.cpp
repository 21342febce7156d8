#include "mixmi/engine.hpp"

#include "mixmi/error.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <random>

namespace mixmi::engine {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t slot_of(mixture::ComponentKind c) {
    switch (c) {
        case mixture::ComponentKind::Cross: return 0;
        case mixture::ComponentKind::Temporal: return 1;
        case mixture::ComponentKind::Gp: return 2;
    }
    return 0;
}

WeightTriple to_slots(const mixture::MixtureParams& p, const Eigen::Ref<const Eigen::RowVectorXd>& w) {
    WeightTriple out{0.0, 0.0, 0.0};
    for (std::size_t k = 0; k < p.size(); ++k) out[slot_of(p.components[k])] = w[static_cast<Eigen::Index>(k)];
    return out;
}

std::string fiber_name(std::size_t v, std::size_t b) {
    return "(" + std::to_string(v) + "," + std::to_string(b) + ")";
}

bool on_simplex(const Eigen::VectorXd& pi) {
    return (pi.array() >= 0.0).all() && std::abs(pi.sum() - 1.0) < 1e-9;
}

mixture::FitResult fit_kind(const mixture::PreparedSlice& data, mixture::ModelKind kind,
                            const ImputationConfig& config) {
    Eigen::VectorXd pi0;
    switch (kind) {
        case mixture::ModelKind::Full: pi0 = config.pi0_full; break;
        case mixture::ModelKind::LinearLinear: pi0 = config.pi0_ll; break;
        default: pi0 = Eigen::VectorXd::Ones(1); break;
    }
    return mixture::fit_em(data, kind, pi0, config.em);
}

}  // namespace

std::string to_string(Mode mode) {
    switch (mode) {
        case Mode::MixMI: return "mixmi";
        case Mode::MixMILL: return "mixmi-ll";
        case Mode::Full: return "full";
        case Mode::CrossOnly: return "cross";
        case Mode::TemporalOnly: return "temporal";
        case Mode::GpOnly: return "gp";
    }
    return "?";
}

Mode mode_from_string(const std::string& name) {
    for (auto m : {Mode::MixMI, Mode::MixMILL, Mode::Full, Mode::CrossOnly, Mode::TemporalOnly, Mode::GpOnly})
        if (to_string(m) == name) return m;
    throw ConfigError("unknown mode '" + name + "'");
}

void ImputationConfig::validate() const {
    if (chains < 1) throw ConfigError("chains must be at least 1");
    if (passes < 1) throw ConfigError("passes must be at least 1");
    if (pi0_full.size() != 3 || !on_simplex(pi0_full)) throw ConfigError("pi0 (full) must be 3 weights summing to 1");
    if (pi0_ll.size() != 2 || !on_simplex(pi0_ll)) throw ConfigError("pi0 (LL) must be 2 weights summing to 1");
    if (em.max_iters < 0) throw ConfigError("EM iteration limit must be non-negative");
    if (!(em.rel_tol > 0.0)) throw ConfigError("EM tolerance must be positive");
    if (em.theta_iters < 0) throw ConfigError("theta iteration limit must be non-negative");
    if (threads < 0) throw ConfigError("threads must be non-negative");
}

MeasurementTensor initial_impute(const MeasurementTensor& x, Rng& rng) {
    MeasurementTensor out = x;
    for (std::size_t v = 0; v < x.variables(); ++v) {
        std::vector<double> pool;
        for (std::size_t p = 0; p < x.patients(); ++p)
            for (std::size_t b = 0; b < x.times(); ++b)
                if (x.observed(p, v, b)) pool.push_back(x.value(p, v, b));
        bool needs = false;
        for (std::size_t p = 0; p < x.patients() && !needs; ++p)
            for (std::size_t b = 0; b < x.times() && !needs; ++b) needs = !x.observed(p, v, b);
        if (!needs) continue;
        if (pool.empty()) throw DataError("variable " + std::to_string(v) + " has no observed values");
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        for (std::size_t p = 0; p < x.patients(); ++p)
            for (std::size_t b = 0; b < x.times(); ++b)
                if (!x.observed(p, v, b)) out.set_value(p, v, b, pool[pick(rng)]);
    }
    return out;
}

std::vector<std::pair<double, double>> observed_bounds(const MeasurementTensor& x) {
    std::vector<std::pair<double, double>> out(x.variables(), {std::numeric_limits<double>::infinity(),
                                                              -std::numeric_limits<double>::infinity()});
    for (std::size_t p = 0; p < x.patients(); ++p)
        for (std::size_t v = 0; v < x.variables(); ++v)
            for (std::size_t b = 0; b < x.times(); ++b)
                if (x.observed(p, v, b)) {
                    out[v].first = std::min(out[v].first, x.value(p, v, b));
                    out[v].second = std::max(out[v].second, x.value(p, v, b));
                }
    return out;
}

ChainState start_chain(const MeasurementTensor& x, const ImputationConfig& config, std::size_t index) {
    ChainState chain;
    chain.bounds = observed_bounds(x);
    Rng fill = make_stream(config.seed, index, Stream::InitialFill);
    chain.working = initial_impute(x, fill);
    for (std::size_t v = 0; v < x.variables(); ++v)
        for (std::size_t b = 0; b < x.times(); ++b) chain.order.emplace_back(v, b);
    Rng order = make_stream(config.seed, index, Stream::VisitOrder);
    std::shuffle(chain.order.begin(), chain.order.end(), order);
    return chain;
}

mixture::MixtureParams fit_fiber(const mixture::PreparedSlice& training, const ImputationConfig& config,
                                 std::vector<std::string>* warnings) {
    using mixture::ModelKind;
    auto warn = [&](const std::string& msg) {
        if (warnings) warnings->push_back(msg);
    };
    const std::string where = fiber_name(training.slice.variable, training.slice.time_index);
    switch (config.mode) {
        case Mode::MixMILL: return fit_kind(training, ModelKind::LinearLinear, config).params;
        case Mode::CrossOnly: return fit_kind(training, ModelKind::CrossOnly, config).params;
        case Mode::TemporalOnly: return fit_kind(training, ModelKind::TemporalOnly, config).params;
        case Mode::GpOnly: return fit_kind(training, ModelKind::GpOnly, config).params;
        case Mode::Full:
            try {
                return fit_kind(training, ModelKind::Full, config).params;
            } catch (const UntrainableError& e) {
                warn("fiber " + where + ": full mixture untrainable (" + e.what() + "), using LL");
                return fit_kind(training, ModelKind::LinearLinear, config).params;
            }
        case Mode::MixMI: {
            auto ll = fit_kind(training, ModelKind::LinearLinear, config);
            const double ll_err = mixture::training_abs_error(ll.params, training, config.fixed_weights);
            if (!training.any_gp_usable) {
                warn("fiber " + where + ": no usable GP series, using LL");
                return ll.params;
            }
            auto full = fit_kind(training, ModelKind::Full, config);
            const double full_err = mixture::training_abs_error(full.params, training, config.fixed_weights);
            return mixture::select_model({full.params, full_err}, {ll.params, ll_err});
        }
    }
    throw ConfigError("unhandled mode");
}

void simple_pass(ChainState& chain, const TimeTensor& times, const ImputationConfig& config) {
    auto& x = chain.working;
    for (const auto& [v, b] : chain.order) {
        FiberSlice targets = missing_slice(x, times, v, b);
        if (targets.rows() == 0) continue;
        FiberFit record;
        try {
            auto training = mixture::prepare(training_slice(x, times, v, b));
            const auto params = fit_fiber(training, config, &chain.warnings);
            auto prepared = mixture::prepare(std::move(targets));
            const auto imp = mixture::impute_fiber(params, prepared, config.fixed_weights);
            for (std::size_t i = 0; i < prepared.size(); ++i) {
                const auto r = static_cast<Eigen::Index>(i);
                const auto [lo, hi] = chain.bounds[v];
                x.set_value(prepared.slice.patients[i], v, b, std::clamp(imp.values[r], lo, hi));
            }
            record.trained = true;
            record.kind = params.kind;
            record.pi = to_slots(params, params.pi.transpose());
            record.patients = prepared.slice.patients;
            for (Eigen::Index r = 0; r < imp.weights.rows(); ++r)
                record.weights.push_back(to_slots(params, imp.weights.row(r)));
        } catch (const UntrainableError& e) {
            chain.warnings.push_back("fiber " + fiber_name(v, b) + " untrainable, kept current values: " + e.what());
        }
        chain.last_fits[{v, b}] = std::move(record);
    }
}

namespace {

WeightsReport pool_weights(const MeasurementTensor& x, const std::vector<ChainState>& chains) {
    using mixture::ModelKind;
    WeightsReport report;
    for (std::size_t v = 0; v < x.variables(); ++v) {
        for (std::size_t b = 0; b < x.times(); ++b) {
            const FiberKey key{v, b};
            std::vector<const FiberFit*> fits;
            for (const auto& c : chains) {
                auto it = c.last_fits.find(key);
                if (it != c.last_fits.end()) fits.push_back(&it->second);
            }
            if (fits.empty()) continue;  // nothing to impute in this fiber

            std::map<ModelKind, int> votes;
            for (const auto* f : fits)
                if (f->trained) ++votes[f->kind];
            ModelWeightsRow row{v, b, "none", {kNaN, kNaN, kNaN}};
            if (!votes.empty()) {
                // Most chains wins; ties go to the two-linear variant, then enum order.
                auto best = votes.begin();
                for (auto it = votes.begin(); it != votes.end(); ++it) {
                    if (it->second > best->second ||
                        (it->second == best->second && it->first == ModelKind::LinearLinear))
                        best = it;
                }
                row.model_kind = mixture::to_string(best->first);
                WeightTriple sum{0.0, 0.0, 0.0};
                for (const auto* f : fits)
                    if (f->trained && f->kind == best->first)
                        for (std::size_t s = 0; s < 3; ++s) sum[s] += f->pi[s];
                for (std::size_t s = 0; s < 3; ++s) row.pi[s] = sum[s] / best->second;
            }
            report.models.push_back(row);

            std::vector<WeightTriple> sum(x.patients(), WeightTriple{0.0, 0.0, 0.0});
            std::vector<int> count(x.patients(), 0);
            for (const auto* f : fits) {
                if (!f->trained) continue;
                for (std::size_t i = 0; i < f->patients.size(); ++i) {
                    const auto p = f->patients[i];
                    for (std::size_t s = 0; s < 3; ++s) sum[p][s] += f->weights[i][s];
                    ++count[p];
                }
            }
            for (std::size_t p = 0; p < x.patients(); ++p) {
                if (x.observed(p, v, b)) continue;
                PatientWeightsRow pr{p, v, b, {kNaN, kNaN, kNaN}};
                if (count[p] > 0)
                    for (std::size_t s = 0; s < 3; ++s) pr.weights[s] = sum[p][s] / count[p];
                report.patients.push_back(pr);
            }
        }
    }
    return report;
}

// Restores the caller's OpenMP thread count on scope exit.
class ThreadBudget {
public:
    explicit ThreadBudget(int threads) : saved_(omp_get_max_threads()) {
        if (threads > 0) omp_set_num_threads(threads);
    }
    ~ThreadBudget() { omp_set_num_threads(saved_); }
    ThreadBudget(const ThreadBudget&) = delete;
    ThreadBudget& operator=(const ThreadBudget&) = delete;

private:
    int saved_;
};

}  // namespace

RunResult run(const MeasurementTensor& x, const TimeTensor& times, const ImputationConfig& config) {
    config.validate();
    if (x.variables() < 2 || x.times() < 2 || x.patients() < 1)
        throw DataError("tensor needs P >= 1, V >= 2, B >= 2");
    if (times.patients() != x.patients() || times.variables() != x.variables() || times.times() != x.times())
        throw DataError("time tensor shape differs from measurement tensor");

    RunResult result;
    result.standardization = fit_standardization(x);
    const MeasurementTensor z = standardize(x, result.standardization);

    const ThreadBudget budget(config.threads);
    const auto M = static_cast<std::ptrdiff_t>(config.chains);
    std::vector<ChainState> chains(config.chains);
    std::vector<std::exception_ptr> errors(config.chains);
#pragma omp parallel for schedule(static, 1)
    for (std::ptrdiff_t i = 0; i < M; ++i) {
        const auto c = static_cast<std::size_t>(i);
        try {
            chains[c] = start_chain(z, config, c);
            for (std::size_t k = 0; k < config.passes; ++k) simple_pass(chains[c], times, config);
        } catch (...) {
            errors[c] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    for (auto& c : chains) {
        MeasurementTensor out = destandardize(c.working, result.standardization);
        for (std::size_t p = 0; p < x.patients(); ++p)
            for (std::size_t v = 0; v < x.variables(); ++v)
                for (std::size_t b = 0; b < x.times(); ++b)
                    if (x.observed(p, v, b)) out.set_value(p, v, b, x.value(p, v, b));
        result.chain_outputs.push_back(std::move(out));
        for (auto& w : c.warnings) result.warnings.push_back(std::move(w));
    }

    result.imputed = x;
    for (std::size_t p = 0; p < x.patients(); ++p)
        for (std::size_t v = 0; v < x.variables(); ++v)
            for (std::size_t b = 0; b < x.times(); ++b) {
                if (x.observed(p, v, b)) continue;
                double sum = 0.0;
                for (const auto& c : result.chain_outputs) sum += c.value(p, v, b);
                result.imputed.set_value(p, v, b, sum / static_cast<double>(config.chains));
            }
    result.weights = pool_weights(x, chains);
    return result;
}

}  // namespace mixmi::engine
