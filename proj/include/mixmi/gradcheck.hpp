#pragma once

#include "mixmi/gp.hpp"
#include "mixmi/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace mixmi::gradcheck {

/// A weighted GP likelihood problem: theta plus one series per patient.
struct Instance {
    double theta = 1.0;
    std::vector<gp::Series> series;
    Eigen::VectorXd weights;
};

/// Random problem: 1 to 10 patients, 3 to 8 points each, log-uniform theta in
/// [0.1, 10], uniform weights in (0, 1], time gaps uniform on [0.5, 1.5].
Instance random_instance(Rng& rng);

/// sum_p w_p ln N(x_p | g_p, h_p) evaluated in long double from explicit
/// inverses of the jittered correlation matrices. Shares no code with the
/// production likelihood.
long double reference_loglik(double theta, const Instance& inst, double jitter = gp::kJitter);

struct Result {
    std::size_t index = 0;
    double theta = 0.0;
    std::size_t patients = 0;
    double analytic = 0.0;  ///< d L / d ln theta from the production gradient
    double numeric = 0.0;   ///< central difference of reference_loglik in ln theta
    double rel_error = 0.0;
    bool pass = false;
};

struct Options {
    std::uint64_t seed = 0;
    std::size_t instances = 100;
    double tolerance = 1e-5;
    double step = 1e-5;
    /// Test hook: analytic gradient is multiplied by (1 + perturb).
    double perturb = 0.0;
};

struct Summary {
    std::vector<Result> results;
    double max_rel_error = 0.0;
    bool all_pass = true;
};

/// |a - n| / max(|a|, |n|, 1e-8).
double relative_error(double analytic, double numeric);

Summary run(const Options& options);

}  // namespace mixmi::gradcheck
