#include "mixmi/evaluation.hpp"

#include "mixmi/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

namespace mixmi::eval {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::vector<MaskedCell> sample_observed_cells(const MeasurementTensor& x, std::size_t count, Rng& rng) {
    std::vector<MaskedCell> pool;
    for (std::size_t p = 0; p < x.patients(); ++p)
        for (std::size_t v = 0; v < x.variables(); ++v)
            for (std::size_t b = 0; b < x.times(); ++b)
                if (x.observed(p, v, b)) pool.push_back({p, v, b, x.value(p, v, b)});
    if (count > pool.size()) throw DataError("cannot hide more cells than are observed");
    std::shuffle(pool.begin(), pool.end(), rng);

    std::vector<std::size_t> remaining(x.patients() * x.variables(), 0);
    for (const auto& c : pool) ++remaining[c.patient * x.variables() + c.variable];

    std::vector<MaskedCell> chosen;
    chosen.reserve(count);
    for (const auto& c : pool) {
        if (chosen.size() == count) break;
        auto& left = remaining[c.patient * x.variables() + c.variable];
        if (left <= 1) continue;
        --left;
        chosen.push_back(c);
    }
    if (chosen.size() < count)
        throw DataError("cannot hide " + std::to_string(count) +
                        " cells without emptying a patient/variable series");
    return chosen;
}

MaskResult mask_random(const MeasurementTensor& x, double fraction, Rng& rng) {
    if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("mask fraction must be in [0, 1)");
    const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(x.observed_count())));
    MaskResult out;
    out.masked = x;
    out.plan.cells = sample_observed_cells(x, count, rng);
    for (const auto& c : out.plan.cells) out.masked.set_missing(c.patient, c.variable, c.time_index);
    return out;
}

EvaluationReport mase(const MaskPlan& plan, const MeasurementTensor& imputed, const MeasurementTensor& original) {
    const std::size_t V = original.variables();
    if (imputed.patients() != original.patients() || imputed.variables() != V || imputed.times() != original.times())
        throw DataError("imputed and original tensors differ in shape");

    // Scale per (p, v) that appears in the plan.
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> masked_per_pair;
    for (const auto& c : plan.cells) {
        if (!original.observed(c.patient, c.variable, c.time_index))
            throw DataError("mask plan refers to a cell that was never observed");
        ++masked_per_pair[{c.patient, c.variable}];
    }
    std::map<std::pair<std::size_t, std::size_t>, double> scale;
    EvaluationReport report;
    for (const auto& [key, n] : masked_per_pair) {
        const auto [p, v] = key;
        std::vector<double> y;
        for (std::size_t b = 0; b < original.times(); ++b)
            if (original.observed(p, v, b)) y.push_back(original.value(p, v, b));
        const auto J = y.size();
        if (J < 2) {
            report.excluded.push_back({p, v, n, "fewer than two observed values"});
            continue;
        }
        double s = 0.0;
        for (std::size_t j = 1; j < J; ++j) s += std::abs(y[j] - y[j - 1]);
        s *= static_cast<double>(J) / static_cast<double>(J - 1);
        if (!(s > 0.0)) {
            report.excluded.push_back({p, v, n, "constant observed series"});
            continue;
        }
        scale[key] = s;
    }

    std::vector<double> scaled_sum(V, 0.0), abs_sum(V, 0.0);
    report.variables.resize(V);
    for (std::size_t v = 0; v < V; ++v) report.variables[v].variable = v;
    for (const auto& c : plan.cells) {
        auto& vs = report.variables[c.variable];
        ++vs.masked;
        auto it = scale.find({c.patient, c.variable});
        if (it == scale.end()) continue;
        const double est = imputed.value(c.patient, c.variable, c.time_index);
        CellError e{c.patient, c.variable, c.time_index, c.truth, est, std::abs(est - c.truth), 0.0};
        e.scaled_error = e.abs_error / it->second;
        scaled_sum[c.variable] += e.scaled_error;
        abs_sum[c.variable] += e.abs_error;
        ++vs.scored;
        report.cells.push_back(e);
    }

    double num = 0.0;
    std::size_t den = 0;
    for (std::size_t v = 0; v < V; ++v) {
        auto& vs = report.variables[v];
        if (!vs.scorable()) {
            vs.mase = vs.mae = kNaN;
            continue;
        }
        vs.mase = scaled_sum[v] / static_cast<double>(vs.scored);
        vs.mae = abs_sum[v] / static_cast<double>(vs.scored);
        num += static_cast<double>(vs.scored) * vs.mase;
        den += vs.scored;
    }
    report.overall = den > 0 ? num / static_cast<double>(den) : kNaN;
    return report;
}

SynthesizedTimes synthesize_times(const MeasurementTensor& x, const TimeTensor& t, double d) {
    if (!(d >= 0.0 && d < 1.0)) throw ConfigError("d must be in [0, 1)");
    SynthesizedTimes out{t, {}};
    if (d == 0.0) return out;

    const std::size_t B = x.times();
    for (std::size_t p = 0; p < x.patients(); ++p) {
        for (std::size_t v = 0; v < x.variables(); ++v) {
            std::vector<std::size_t> idx;
            for (std::size_t b = 0; b < B; ++b)
                if (x.observed(p, v, b)) idx.push_back(b);
            if (idx.size() < 2) continue;

            double sx = 0.0, st = 0.0;
            for (std::size_t j = 1; j < idx.size(); ++j) {
                sx += std::abs(x.value(p, v, idx[j]) - x.value(p, v, idx[j - 1]));
                st += std::abs(t.at(p, v, idx[j]) - t.at(p, v, idx[j - 1]));
            }
            if (!(sx > 0.0) || !(st > 0.0)) continue;

            // Cumulative shift at each observed entry.
            std::vector<double> shift(idx.size(), 0.0);
            double acc = 0.0;
            for (std::size_t j = 1; j < idx.size(); ++j) {
                const double dx = std::abs(x.value(p, v, idx[j]) - x.value(p, v, idx[j - 1])) / sx;
                const double dt = std::abs(t.at(p, v, idx[j]) - t.at(p, v, idx[j - 1])) / st;
                acc += d * (dx - dt) * st;
                shift[j] = acc;
            }
            std::size_t next = 0;  // first observed position at or after b
            for (std::size_t b = 0; b < B; ++b) {
                while (next < idx.size() && idx[next] < b) ++next;
                double s = 0.0;
                if (next < idx.size() && idx[next] == b) {
                    s = shift[next];
                } else if (next == 0) {
                    s = shift.front();
                } else if (next == idx.size()) {
                    s = shift.back();
                } else {
                    const double ta = t.at(p, v, idx[next - 1]), tc = t.at(p, v, idx[next]);
                    const double w = tc > ta ? (t.at(p, v, b) - ta) / (tc - ta) : 0.0;
                    s = shift[next - 1] + w * (shift[next] - shift[next - 1]);
                }
                out.times.set(p, v, b, t.at(p, v, b) + s);
            }
            for (std::size_t b = 1; b < B; ++b)
                if (!(out.times.at(p, v, b) > out.times.at(p, v, b - 1))) {
                    out.non_monotone.emplace_back(p, v);
                    break;
                }
        }
    }
    return out;
}

double permutation_test(std::span<const double> a, std::span<const double> b, int replicates, Rng& rng,
                        Alternative alternative) {
    if (a.empty()) throw DataError("permutation test needs at least one pair");
    if (a.size() != b.size()) throw DataError("permutation test needs paired samples of equal length");
    if (replicates < 1) throw ConfigError("permutation test needs at least one replicate");
    const std::size_t n = a.size();
    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
    const double observed = std::accumulate(diff.begin(), diff.end(), 0.0) / static_cast<double>(n);

    std::bernoulli_distribution flip(0.5);
    int extreme = 0;
    for (int r = 0; r < replicates; ++r) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += flip(rng) ? -diff[i] : diff[i];
        const double stat = sum / static_cast<double>(n);
        const bool hit = alternative == Alternative::TwoSided ? std::abs(stat) >= std::abs(observed)
                                                              : stat >= observed;
        extreme += hit ? 1 : 0;
    }
    return (1.0 + extreme) / (replicates + 1.0);
}

MeasurementTensor mean_impute(const MeasurementTensor& x) {
    MeasurementTensor out = x;
    for (std::size_t v = 0; v < x.variables(); ++v) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t p = 0; p < x.patients(); ++p)
            for (std::size_t b = 0; b < x.times(); ++b)
                if (x.observed(p, v, b)) {
                    sum += x.value(p, v, b);
                    ++n;
                }
        const double mean = n > 0 ? sum / static_cast<double>(n) : 0.0;
        for (std::size_t p = 0; p < x.patients(); ++p)
            for (std::size_t b = 0; b < x.times(); ++b)
                if (!x.observed(p, v, b)) out.set_value(p, v, b, mean);
    }
    return out;
}

}  // namespace mixmi::eval
