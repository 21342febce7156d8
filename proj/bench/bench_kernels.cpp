// Serial reference versus OpenMP kernels on synthetic patients.
// Argument: number of patients (rows or series).

#include "mixmi/gp.hpp"
#include "mixmi/kernels.hpp"
#include "mixmi/rng.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

using namespace mixmi;

namespace {

constexpr std::size_t kSeriesLength = 8;
constexpr double kJitter = 1e-8;

std::vector<gp::Series> make_series(std::size_t count) {
    Rng rng = make_stream(1, 0, Stream::Simulation);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> gap(0.2, 1.0);
    std::vector<gp::Series> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Eigen::VectorXd t(kSeriesLength), x(kSeriesLength);
        double now = 0.0;
        for (std::size_t j = 0; j < kSeriesLength; ++j) {
            now += gap(rng);
            t[static_cast<Eigen::Index>(j)] = now;
            x[static_cast<Eigen::Index>(j)] = z(rng);
        }
        out.push_back(gp::make_series(x, t, now + gap(rng), z(rng)));
    }
    return out;
}

struct GaussianCase {
    Eigen::MatrixXd rows;
    kernels::GaussianFactor factor;
};

GaussianCase make_gaussian(std::size_t count) {
    constexpr Eigen::Index dim = 12;
    Rng rng = make_stream(2, 0, Stream::Simulation);
    std::normal_distribution<double> z;
    GaussianCase c;
    c.rows = Eigen::MatrixXd::NullaryExpr(static_cast<Eigen::Index>(count), dim, [&] { return z(rng); });
    const Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(dim, dim, [&] { return z(rng); });
    const Eigen::MatrixXd cov = a * a.transpose() / dim + Eigen::MatrixXd::Identity(dim, dim);
    c.factor = kernels::factorize(Eigen::VectorXd::Zero(dim), cov);
    return c;
}

template <bool Parallel>
void BM_GaussianRows(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto c = make_gaussian(n);
    std::vector<double> out(n);
    for (auto _ : state) {
        if constexpr (Parallel)
            kernels::gaussian_logpdf_rows_parallel(c.rows, c.factor, out);
        else
            kernels::gaussian_logpdf_rows_serial(c.rows, c.factor, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

template <bool Parallel>
void BM_GpLoglik(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto series = make_series(n);
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 0.5);
    std::vector<gp::PatientLoglik> out(n);
    std::vector<unsigned char> used(n);
    for (auto _ : state) {
        if constexpr (Parallel)
            kernels::gp_loglik_terms_parallel(2.0, series, w, kJitter, out, used);
        else
            kernels::gp_loglik_terms_serial(2.0, series, w, kJitter, out, used);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

template <bool Parallel>
void BM_GpPredict(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto series = make_series(n);
    std::vector<gp::GpPrediction> out(n);
    for (auto _ : state) {
        if constexpr (Parallel)
            kernels::gp_predict_parallel(2.0, series, kJitter, out);
        else
            kernels::gp_predict_serial(2.0, series, kJitter, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

}  // namespace

BENCHMARK(BM_GaussianRows<false>)->Name("gaussian_logpdf_rows/serial")->RangeMultiplier(8)->Range(64, 32768);
BENCHMARK(BM_GaussianRows<true>)->Name("gaussian_logpdf_rows/parallel")->RangeMultiplier(8)->Range(64, 32768);
BENCHMARK(BM_GpLoglik<false>)->Name("gp_loglik_terms/serial")->RangeMultiplier(8)->Range(64, 4096);
BENCHMARK(BM_GpLoglik<true>)->Name("gp_loglik_terms/parallel")->RangeMultiplier(8)->Range(64, 4096);
BENCHMARK(BM_GpPredict<false>)->Name("gp_predict/serial")->RangeMultiplier(8)->Range(64, 4096);
BENCHMARK(BM_GpPredict<true>)->Name("gp_predict/parallel")->RangeMultiplier(8)->Range(64, 4096);

BENCHMARK_MAIN();
