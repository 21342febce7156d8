#pragma once

#include "mixmi/rng.hpp"
#include "mixmi/tensor.hpp"

#include <Eigen/Dense>

#include <random>

namespace testing {

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, mixmi::Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
    return m;
}

inline Eigen::VectorXd random_vector(Eigen::Index n, mixmi::Rng& rng) { return random_matrix(n, 1, rng).col(0); }

/// Fully observed tensor with N(0,1) values and per-patient increasing times.
inline mixmi::MeasurementTensor random_tensor(std::size_t P, std::size_t V, std::size_t B, mixmi::Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    mixmi::MeasurementTensor x(P, V, B);
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t v = 0; v < V; ++v)
            for (std::size_t b = 0; b < B; ++b) {
                x.set_value(p, v, b, n(rng));
                x.set_observed(p, v, b, true);
            }
    return x;
}

inline mixmi::TimeTensor random_times(std::size_t P, std::size_t V, std::size_t B, mixmi::Rng& rng) {
    std::uniform_real_distribution<double> gap(0.2, 1.0);
    mixmi::TimeTensor t(P, V, B);
    for (std::size_t p = 0; p < P; ++p) {
        double now = 0.0;
        for (std::size_t b = 0; b < B; ++b) {
            if (b > 0) now += gap(rng);
            for (std::size_t v = 0; v < V; ++v) t.set(p, v, b, now);
        }
    }
    return t;
}

}  // namespace testing
