#include "mixmi/tensor.hpp"

#include "mixmi/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <unordered_map>

namespace mixmi {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

MeasurementTensor::MeasurementTensor(std::size_t patients, std::size_t variables, std::size_t times)
    : P_(patients), V_(variables), B_(times), values_(patients * variables * times, kNaN),
      observed_(patients * variables * times, 0) {}

void MeasurementTensor::set_missing(std::size_t p, std::size_t v, std::size_t b) {
    const auto i = index(p, v, b);
    values_[i] = kNaN;
    observed_[i] = 0;
}

bool MeasurementTensor::filled(std::size_t p, std::size_t v, std::size_t b) const {
    return !std::isnan(value(p, v, b));
}

bool MeasurementTensor::is_filled() const {
    return std::none_of(values_.begin(), values_.end(), [](double x) { return std::isnan(x); });
}

std::size_t MeasurementTensor::observed_count() const {
    return static_cast<std::size_t>(std::count(observed_.begin(), observed_.end(), 1));
}

std::size_t MeasurementTensor::observed_count(std::size_t p, std::size_t v) const {
    std::size_t n = 0;
    for (std::size_t b = 0; b < B_; ++b) n += observed(p, v, b) ? 1 : 0;
    return n;
}

bool operator==(const MeasurementTensor& a, const MeasurementTensor& b) {
    if (a.P_ != b.P_ || a.V_ != b.V_ || a.B_ != b.B_ || a.observed_ != b.observed_) return false;
    for (std::size_t i = 0; i < a.values_.size(); ++i) {
        const double x = a.values_[i], y = b.values_[i];
        if (std::isnan(x) != std::isnan(y)) return false;
        if (!std::isnan(x) && x != y) return false;
    }
    return true;
}

TimeTensor::TimeTensor(std::size_t patients, std::size_t variables, std::size_t times)
    : P_(patients), V_(variables), B_(times), t_(patients * variables * times, 0.0) {}

void validate_shape(const Dataset& data) {
    const auto& x = data.values;
    if (x.patients() < 1) throw DataError("no patients");
    if (x.variables() < 2) throw DataError("need at least 2 variables");
    if (x.times() < 2) throw DataError("need at least 2 time indices");
    const auto& t = data.times;
    if (t.patients() != x.patients() || t.variables() != x.variables() || t.times() != x.times())
        throw DataError("time tensor shape differs from measurement tensor");
    if (data.patient_ids.size() != x.patients()) throw DataError("patient label count mismatch");
    if (data.variable_names.size() != x.variables()) throw DataError("variable label count mismatch");
    for (double v : t.raw())
        if (!std::isfinite(v)) throw DataError("non-finite time value");
}

StandardizationParams fit_standardization(const MeasurementTensor& x, const std::vector<std::string>& names) {
    StandardizationParams s;
    s.mean.assign(x.variables(), 0.0);
    s.stddev.assign(x.variables(), 0.0);
    auto name = [&](std::size_t v) { return v < names.size() ? names[v] : "#" + std::to_string(v); };
    for (std::size_t v = 0; v < x.variables(); ++v) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t p = 0; p < x.patients(); ++p)
            for (std::size_t b = 0; b < x.times(); ++b)
                if (x.observed(p, v, b)) {
                    sum += x.value(p, v, b);
                    ++n;
                }
        if (n == 0) throw DataError("variable '" + name(v) + "' has no observed values");
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t p = 0; p < x.patients(); ++p)
            for (std::size_t b = 0; b < x.times(); ++b)
                if (x.observed(p, v, b)) {
                    const double d = x.value(p, v, b) - mean;
                    ss += d * d;
                }
        const double sd = std::sqrt(ss / static_cast<double>(n));
        if (!(sd > 0.0)) throw DataError("variable '" + name(v) + "' is constant (zero variance)");
        s.mean[v] = mean;
        s.stddev[v] = sd;
    }
    return s;
}

MeasurementTensor standardize(const MeasurementTensor& x, const StandardizationParams& s) {
    MeasurementTensor out = x;
    for (std::size_t p = 0; p < x.patients(); ++p)
        for (std::size_t v = 0; v < x.variables(); ++v)
            for (std::size_t b = 0; b < x.times(); ++b)
                out.set_value(p, v, b, (x.value(p, v, b) - s.mean[v]) / s.stddev[v]);
    return out;
}

MeasurementTensor destandardize(const MeasurementTensor& x, const StandardizationParams& s) {
    MeasurementTensor out = x;
    for (std::size_t p = 0; p < x.patients(); ++p)
        for (std::size_t v = 0; v < x.variables(); ++v)
            for (std::size_t b = 0; b < x.times(); ++b)
                out.set_value(p, v, b, x.value(p, v, b) * s.stddev[v] + s.mean[v]);
    return out;
}

namespace {

struct PatientRows {
    std::string id;
    std::vector<double> times;
    // time index -> variable -> value
    std::vector<std::map<std::string, std::optional<double>>> cells;
};

}  // namespace

IngestResult tensorize(const std::vector<LongRecord>& records, std::optional<std::size_t> target_times) {
    if (records.empty()) throw DataError("empty input");

    std::vector<PatientRows> patients;
    std::unordered_map<std::string, std::size_t> seen;
    std::map<std::string, std::size_t> variables;
    for (const auto& r : records) {
        if (!std::isfinite(r.time)) throw DataError("non-finite time for patient '" + r.patient_id + "'");
        if (r.value && !std::isfinite(*r.value))
            throw DataError("non-finite value for patient '" + r.patient_id + "'");
        variables.emplace(r.variable, 0);
        if (patients.empty() || patients.back().id != r.patient_id) {
            if (seen.count(r.patient_id))
                throw DataError("records of patient '" + r.patient_id + "' are not contiguous");
            seen.emplace(r.patient_id, patients.size());
            patients.push_back({r.patient_id, {}, {}});
        }
        auto& pr = patients.back();
        if (pr.times.empty() || r.time > pr.times.back()) {
            pr.times.push_back(r.time);
            pr.cells.emplace_back();
        } else if (r.time < pr.times.back()) {
            throw DataError("non-monotone times for patient '" + r.patient_id + "'");
        }
        auto [it, inserted] = pr.cells.back().emplace(r.variable, r.value);
        if (!inserted) {
            if (it->second && r.value)
                throw DataError("duplicate measurement of '" + r.variable + "' for patient '" + r.patient_id + "'");
            if (r.value) it->second = r.value;
        }
    }
    // Rows with nothing observed carry no information and would not exist in
    // the source data; drop them before counting time points.
    for (auto& pr : patients) {
        std::vector<double> times;
        std::vector<std::map<std::string, std::optional<double>>> cells;
        for (std::size_t i = 0; i < pr.times.size(); ++i) {
            bool any = false;
            for (const auto& [_, val] : pr.cells[i]) any = any || val.has_value();
            if (any) {
                times.push_back(pr.times[i]);
                cells.push_back(std::move(pr.cells[i]));
            }
        }
        pr.times = std::move(times);
        pr.cells = std::move(cells);
    }

    std::size_t B = 0;
    if (target_times) {
        B = *target_times;
    } else {
        std::size_t total = 0;
        for (const auto& pr : patients) total += pr.times.size();
        B = total / patients.size();
    }
    if (B < 2) throw DataError("target number of time points must be at least 2");

    std::size_t vi = 0;
    for (auto& [_, idx] : variables) idx = vi++;
    const std::size_t V = variables.size();
    if (V < 2) throw DataError("need at least 2 variables");

    IngestResult out;
    out.target_times = B;
    std::vector<const PatientRows*> kept;
    for (const auto& pr : patients) {
        if (pr.times.size() < B) {
            out.excluded_patients.push_back(pr.id);
            continue;
        }
        bool ok = true;
        for (const auto& [name, _] : variables) {
            bool any = false;
            for (std::size_t b = 0; b < B && !any; ++b) {
                auto it = pr.cells[b].find(name);
                any = it != pr.cells[b].end() && it->second.has_value();
            }
            ok = ok && any;
        }
        if (!ok) {
            out.excluded_patients.push_back(pr.id);
            continue;
        }
        kept.push_back(&pr);
    }
    if (kept.empty()) throw DataError("no patient survives the length and completeness filters");

    Dataset& d = out.data;
    d.values = MeasurementTensor(kept.size(), V, B);
    d.times = TimeTensor(kept.size(), V, B);
    for (const auto& [name, _] : variables) d.variable_names.push_back(name);
    for (std::size_t p = 0; p < kept.size(); ++p) {
        d.patient_ids.push_back(kept[p]->id);
        for (std::size_t b = 0; b < B; ++b) {
            for (const auto& [name, v] : variables) {
                d.times.set(p, v, b, kept[p]->times[b]);
                auto it = kept[p]->cells[b].find(name);
                if (it != kept[p]->cells[b].end() && it->second) {
                    d.values.set_value(p, v, b, *it->second);
                    d.values.set_observed(p, v, b, true);
                }
            }
        }
    }
    out.standardization = fit_standardization(d.values, d.variable_names);
    return out;
}

Eigen::VectorXd assemble_row(const MeasurementTensor& x, std::size_t p, std::size_t v, std::size_t b) {
    const std::size_t V = x.variables(), B = x.times();
    Eigen::VectorXd row((V - 1) + (B - 1));
    Eigen::Index k = 0;
    auto take = [&](std::size_t vv, std::size_t bb) {
        if (!x.filled(p, vv, bb)) throw std::logic_error("assemble_row: unfilled input cell");
        row[k++] = x.value(p, vv, bb);
    };
    for (std::size_t u = 0; u < V; ++u)
        if (u != v) take(u, b);
    for (std::size_t c = 0; c < B; ++c)
        if (c != b) take(v, c);
    return row;
}

namespace {

FiberSlice build_slice(const MeasurementTensor& x, const TimeTensor& t, std::size_t v, std::size_t b,
                       bool want_observed) {
    FiberSlice s;
    s.variable = v;
    s.time_index = b;
    for (std::size_t p = 0; p < x.patients(); ++p)
        if (x.observed(p, v, b) == want_observed) s.patients.push_back(p);
    const auto n = static_cast<Eigen::Index>(s.patients.size());
    const auto V = static_cast<Eigen::Index>(x.variables());
    const auto B = static_cast<Eigen::Index>(x.times());
    s.target.resize(n);
    s.cross_inputs.resize(n, V - 1);
    s.temporal_inputs.resize(n, B - 1);
    s.temporal_times.resize(n, B - 1);
    s.target_times.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t p = s.patients[static_cast<std::size_t>(i)];
        s.target[i] = want_observed ? x.value(p, v, b) : std::numeric_limits<double>::quiet_NaN();
        s.target_times[i] = t.at(p, v, b);
        Eigen::Index k = 0;
        for (std::size_t u = 0; u < x.variables(); ++u) {
            if (u == v) continue;
            if (!x.filled(p, u, b)) throw std::logic_error("fiber slice: unfilled input cell");
            s.cross_inputs(i, k++) = x.value(p, u, b);
        }
        k = 0;
        for (std::size_t c = 0; c < x.times(); ++c) {
            if (c == b) continue;
            if (!x.filled(p, v, c)) throw std::logic_error("fiber slice: unfilled input cell");
            s.temporal_inputs(i, k) = x.value(p, v, c);
            s.temporal_times(i, k) = t.at(p, v, c);
            ++k;
        }
    }
    return s;
}

}  // namespace

Eigen::MatrixXd FiberSlice::v_rows() const {
    Eigen::MatrixXd m(cross_inputs.rows(), cross_inputs.cols() + temporal_inputs.cols());
    m << cross_inputs, temporal_inputs;
    return m;
}

Eigen::VectorXd FiberSlice::v_row(std::size_t i) const {
    const auto r = static_cast<Eigen::Index>(i);
    Eigen::VectorXd row(cross_inputs.cols() + temporal_inputs.cols());
    row << cross_inputs.row(r).transpose(), temporal_inputs.row(r).transpose();
    return row;
}

TrainingSlice training_slice(const MeasurementTensor& x, const TimeTensor& t, std::size_t v, std::size_t b) {
    auto s = build_slice(x, t, v, b, true);
    if (s.rows() == 0)
        throw UntrainableError("fiber (" + std::to_string(v) + "," + std::to_string(b) + ") has no observed target");
    return s;
}

FiberSlice missing_slice(const MeasurementTensor& x, const TimeTensor& t, std::size_t v, std::size_t b) {
    return build_slice(x, t, v, b, false);
}

}  // namespace mixmi
