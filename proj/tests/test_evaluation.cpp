#include "helpers.hpp"

#include "mixmi/error.hpp"
#include "mixmi/evaluation.hpp"
#include "mixmi/simdata.hpp"

#include <doctest.h>

#include <cmath>

using namespace mixmi;
using namespace mixmi::eval;

namespace {

MeasurementTensor row_tensor(std::initializer_list<double> values) {
    MeasurementTensor x(1, 2, values.size());
    std::size_t b = 0;
    for (double v : values) {
        x.set_value(0, 0, b, v);
        x.set_observed(0, 0, b, true);
        x.set_value(0, 1, b, static_cast<double>(b));
        x.set_observed(0, 1, b, true);
        ++b;
    }
    return x;
}

TimeTensor row_times(std::initializer_list<double> times) {
    TimeTensor t(1, 2, times.size());
    std::size_t b = 0;
    for (double v : times) {
        t.set(0, 0, b, v);
        t.set(0, 1, b, v);
        ++b;
    }
    return t;
}

}  // namespace

TEST_SUITE("data_eval") {

TEST_CASE("masking counts, determinism and the non-empty fiber rule") {
    MeasurementTensor x(1, 2, 5);
    for (std::size_t v = 0; v < 2; ++v)
        for (std::size_t b = 0; b < 5; ++b) {
            x.set_value(0, v, b, static_cast<double>(b));
            x.set_observed(0, v, b, true);
        }
    Rng a = make_stream(1, 0, Stream::Mask), b = make_stream(1, 0, Stream::Mask);
    const auto m = mask_random(x, 0.2, a);
    CHECK(m.plan.cells.size() == 2);
    CHECK(m.masked.observed_count() == 8);
    for (const auto& c : m.plan.cells) {
        CHECK(x.observed(c.patient, c.variable, c.time_index));
        CHECK_FALSE(m.masked.observed(c.patient, c.variable, c.time_index));
        CHECK(c.truth == x.value(c.patient, c.variable, c.time_index));
    }
    const auto again = mask_random(x, 0.2, b);
    CHECK(again.masked == m.masked);

    const auto none = mask_random(x, 0.0, a);
    CHECK(none.plan.cells.empty());
    CHECK(none.masked == x);

    const auto most = mask_random(x, 0.8, a);
    for (std::size_t v = 0; v < 2; ++v) CHECK(most.masked.observed_count(0, v) == 1);
    CHECK_THROWS_AS(mask_random(x, 0.9, a), DataError);
    CHECK_THROWS_AS(mask_random(x, 1.0, a), ConfigError);
    CHECK_THROWS_AS(mask_random(x, -0.1, a), ConfigError);
}

TEST_CASE("MASE worked examples") {
    const auto original = row_tensor({1.0, 2.0, 4.0});
    MaskPlan plan{{{0, 0, 1, 2.0}}};
    auto imputed = original;
    imputed.set_value(0, 0, 1, 3.0);
    const auto r = mase(plan, imputed, original);
    CHECK(std::abs(r.variables[0].mase - 1.0 / (1.5 * 3.0)) <= 1e-10);
    CHECK(std::abs(r.overall - 2.0 / 9.0) <= 1e-10);
    CHECK_FALSE(r.variables[1].scorable());
    CHECK(std::isnan(r.variables[1].mase));

    CHECK(mase(plan, original, original).overall == 0.0);

    // Two variables, 3 masked cells scoring 0.1 and 1 scoring 0.2.
    MeasurementTensor x(1, 2, 4);
    for (std::size_t b = 0; b < 4; ++b) {
        x.set_value(0, 0, b, static_cast<double>(b));  // scale (4/3) * 3 = 4
        x.set_value(0, 1, b, static_cast<double>(b));
        x.set_observed(0, 0, b, true);
        x.set_observed(0, 1, b, true);
    }
    MaskPlan two{{{0, 0, 0, 0.0}, {0, 0, 1, 1.0}, {0, 0, 2, 2.0}, {0, 1, 3, 3.0}}};
    auto y = x;
    for (std::size_t b = 0; b < 3; ++b) y.set_value(0, 0, b, x.value(0, 0, b) + 0.4);
    y.set_value(0, 1, 3, 3.0 - 0.8);
    const auto rr = mase(two, y, x);
    CHECK(rr.variables[0].mase == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(rr.variables[1].mase == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(std::abs(rr.overall - 0.125) < 1e-12);
}

TEST_CASE("MASE excludes constant and single-value series") {
    MeasurementTensor x(2, 2, 3);
    for (std::size_t b = 0; b < 3; ++b) {
        x.set_value(0, 0, b, 5.0);
        x.set_observed(0, 0, b, true);
        x.set_value(1, 0, b, static_cast<double>(b));
        x.set_observed(1, 0, b, true);
        x.set_value(0, 1, b, static_cast<double>(b));
        x.set_observed(0, 1, b, b == 0);
    }
    MaskPlan plan{{{0, 0, 1, 5.0}, {1, 0, 1, 1.0}, {0, 1, 0, 0.0}}};
    auto imp = x;
    imp.set_value(1, 0, 1, 2.0);
    const auto r = mase(plan, imp, x);
    CHECK(r.excluded.size() == 2);
    CHECK(r.variables[0].masked == 2);
    CHECK(r.variables[0].scored == 1);
    CHECK(r.cells.size() == 1);
    CHECK_FALSE(r.variables[1].scorable());
}

TEST_CASE("MASE is unchanged by an affine change of units") {
    Rng rng = make_stream(3, 0, Stream::Simulation);
    const auto x = testing::random_tensor(10, 3, 5, rng);
    Rng mr = make_stream(3, 0, Stream::Mask);
    const auto m = mask_random(x, 0.3, mr);
    auto imp = m.masked;
    std::normal_distribution<double> n(0.0, 1.0);
    for (const auto& c : m.plan.cells) imp.set_value(c.patient, c.variable, c.time_index, n(rng));
    const auto base = mase(m.plan, imp, x);

    auto xs = x, is = imp;
    MaskPlan ps = m.plan;
    auto f = [](double v) { return 37.5 * v - 12.0; };
    for (std::size_t p = 0; p < 10; ++p)
        for (std::size_t b = 0; b < 5; ++b) {
            xs.set_value(p, 1, b, f(x.value(p, 1, b)));
            is.set_value(p, 1, b, f(imp.value(p, 1, b)));
        }
    for (auto& c : ps.cells)
        if (c.variable == 1) c.truth = f(c.truth);
    const auto scaled = mase(ps, is, xs);
    for (std::size_t v = 0; v < 3; ++v) CHECK(std::abs(scaled.variables[v].mase - base.variables[v].mase) < 1e-10);
}

TEST_CASE("synthetic times worked example and identities") {
    const auto x = row_tensor({0.0, 1.0, 3.0});
    const auto t = row_times({0.0, 2.0, 3.0});
    const auto s = synthesize_times(x, t, 0.5);
    CHECK(std::abs(s.times.at(0, 0, 0) - 0.0) <= 1e-10);
    CHECK(std::abs(s.times.at(0, 0, 1) - 1.5) <= 1e-10);
    CHECK(std::abs(s.times.at(0, 0, 2) - 3.0) <= 1e-10);
    CHECK(s.non_monotone.empty());

    CHECK(synthesize_times(x, t, 0.0).times == t);
    CHECK_THROWS_AS(synthesize_times(x, t, 1.0), ConfigError);
    CHECK_THROWS_AS(synthesize_times(x, t, -0.1), ConfigError);

    // Variable 1 has value gaps proportional to its time gaps.
    const auto prop = synthesize_times(row_tensor({0.0, 1.0, 3.0}), row_times({0.0, 1.0, 3.0}), 0.7);
    for (std::size_t b = 0; b < 3; ++b) CHECK(prop.times.at(0, 0, b) == doctest::Approx(row_times({0.0, 1.0, 3.0}).at(0, 0, b)));
}

TEST_CASE("synthetic times: missing entries interpolate, ends clamp, last shift is the closed form") {
    Rng rng = make_stream(4, 0, Stream::Simulation);
    auto x = testing::random_tensor(20, 2, 6, rng);
    const auto t = testing::random_times(20, 2, 6, rng);
    for (std::size_t p = 0; p < 20; ++p) {
        x.set_missing(p, 0, 0);
        x.set_missing(p, 0, 3);
    }
    const double d = 0.6;
    const auto s = synthesize_times(x, t, d);
    for (std::size_t p = 0; p < 20; ++p) {
        const std::vector<std::size_t> idx{1, 2, 4, 5};
        double sx = 0.0, st = 0.0;
        for (std::size_t j = 1; j < idx.size(); ++j) {
            sx += std::abs(x.value(p, 0, idx[j]) - x.value(p, 0, idx[j - 1]));
            st += std::abs(t.at(p, 0, idx[j]) - t.at(p, 0, idx[j - 1]));
        }
        double total = 0.0;
        for (std::size_t j = 1; j < idx.size(); ++j)
            total += std::abs(x.value(p, 0, idx[j]) - x.value(p, 0, idx[j - 1])) / sx -
                     std::abs(t.at(p, 0, idx[j]) - t.at(p, 0, idx[j - 1])) / st;
        CHECK(s.times.at(p, 0, 1) == t.at(p, 0, 1));
        CHECK(s.times.at(p, 0, 0) == t.at(p, 0, 0));
        CHECK(std::abs((s.times.at(p, 0, 5) - t.at(p, 0, 5)) - d * st * total) < 1e-12);
        const double sh2 = s.times.at(p, 0, 2) - t.at(p, 0, 2), sh4 = s.times.at(p, 0, 4) - t.at(p, 0, 4);
        const double w = (t.at(p, 0, 3) - t.at(p, 0, 2)) / (t.at(p, 0, 4) - t.at(p, 0, 2));
        CHECK(std::abs((s.times.at(p, 0, 3) - t.at(p, 0, 3)) - (sh2 + w * (sh4 - sh2))) < 1e-12);
    }
}

TEST_CASE("permutation test") {
    Rng rng = make_stream(5, 0, Stream::Permutation);
    std::vector<double> a(1000), b(1000);
    std::normal_distribution<double> n(0.0, 0.3);
    for (std::size_t i = 0; i < 1000; ++i) {
        b[i] = 5.0 + n(rng);
        a[i] = b[i] - 1.0;
    }
    CHECK(permutation_test(a, a, 1000, rng) == 1.0);
    Rng r1 = make_stream(5, 1, Stream::Permutation), r2 = make_stream(5, 1, Stream::Permutation);
    const double p = permutation_test(a, b, 1000, r1);
    CHECK(p <= 0.01);
    CHECK(p > 0.0);
    CHECK(permutation_test(b, a, 1000, r2) == p);
    Rng r3 = make_stream(5, 1, Stream::Permutation);
    CHECK(permutation_test(a, b, 1000, r3) == p);
    Rng r4 = make_stream(5, 2, Stream::Permutation);
    CHECK(permutation_test(a, b, 1000, r4, Alternative::Greater) > 0.99);
    CHECK_THROWS_AS(permutation_test({}, {}, 10, rng), DataError);
}

TEST_CASE("mean imputation") {
    auto x = row_tensor({1.0, 2.0, 6.0});
    x.set_missing(0, 0, 1);
    const auto m = mean_impute(x);
    CHECK(m.value(0, 0, 1) == 3.5);
    CHECK(m.value(0, 0, 0) == 1.0);
}

TEST_CASE("simulated data") {
    sim::SimSpec spec;
    spec.patients = 20;
    spec.missing_fraction = 0.0;
    Rng a = make_stream(1, 0, Stream::Simulation), b = make_stream(1, 0, Stream::Simulation);
    const auto d = sim::generate_simdata(spec, a);
    CHECK(d.observed.observed_count() == d.observed.size());
    CHECK(d.observed == d.truth);
    const auto e = sim::generate_simdata(spec, b);
    CHECK(e.truth == d.truth);
    CHECK(e.times == d.times);

    spec.missing_fraction = 0.25;
    Rng c = make_stream(1, 0, Stream::Simulation);
    const auto m = sim::generate_simdata(spec, c);
    CHECK(m.observed.observed_count() == d.observed.size() - d.observed.size() / 4);
    for (std::size_t p = 0; p < 20; ++p)
        for (std::size_t v = 0; v < spec.variables; ++v) {
            CHECK(m.observed.observed_count(p, v) >= 1);
            for (std::size_t b2 = 1; b2 < spec.times; ++b2) {
                CHECK(m.times.at(p, v, b2) > m.times.at(p, v, b2 - 1));
                CHECK(m.times.at(p, v, b2) == m.times.at(p, 0, b2));
            }
        }
    spec.pi = {0.5, 0.5, 0.5};
    CHECK_THROWS_AS(sim::generate_simdata(spec, c), ConfigError);
}

TEST_CASE("GP series decay like the generating kernel") {
    sim::SimSpec spec;
    spec.patients = 125;
    spec.variables = 4;
    spec.times = 10;
    spec.missing_fraction = 0.0;
    spec.mode = sim::GenerativeMode::GpTemporal;
    Rng rng = make_stream(2, 0, Stream::Simulation);
    const auto d = sim::generate_simdata(spec, rng);
    const double half = std::sqrt(std::log(2.0) / spec.theta);  // exp(-theta dt^2) = 0.5
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    std::size_t pairs = 0;
    for (std::size_t p = 0; p < spec.patients; ++p)
        for (std::size_t v = 0; v < spec.variables; ++v)
            for (std::size_t i = 0; i < spec.times; ++i)
                for (std::size_t j = i + 1; j < spec.times; ++j) {
                    const double dt = d.times.at(p, v, j) - d.times.at(p, v, i);
                    if (std::abs(dt - half) > 0.03) continue;
                    const double a = d.truth.value(p, v, i), b = d.truth.value(p, v, j);
                    sxy += a * b;
                    sxx += a * a;
                    syy += b * b;
                    ++pairs;
                }
    REQUIRE(pairs > 200);
    const double corr = sxy / std::sqrt(sxx * syy);
    CHECK(std::abs(corr - 0.5) < 0.1);
}

}  // TEST_SUITE
