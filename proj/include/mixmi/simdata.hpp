#pragma once

#include "mixmi/rng.hpp"
#include "mixmi/tensor.hpp"

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace mixmi::sim {

/// Generative process for synthetic tensors.
///   LinearCross: at every time index the variables share a low-rank Gaussian
///                factor, so each one is a noisy linear function of the others.
///   GpTemporal:  every (p, v) series is an independent zero-mean unit-variance
///                GP draw with correlation exp(-theta dt^2) on the raw times.
///   Mixed:       each patient is labeled cross (factor model), temporal
///                (AR(1) over time indices) or GP, with probabilities `pi`.
enum class GenerativeMode { LinearCross, GpTemporal, Mixed };

std::string to_string(GenerativeMode mode);
GenerativeMode generative_mode_from_string(const std::string& name);

struct SimSpec {
    std::size_t patients = 200;
    std::size_t variables = 4;
    std::size_t times = 6;
    double missing_fraction = 0.25;
    GenerativeMode mode = GenerativeMode::Mixed;
    std::array<double, 3> pi{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    double theta = 4.0;
    double noise = 0.1;  ///< observation noise sd for the linear processes
    double ar = 0.9;     ///< AR(1) coefficient of temporal patients
    /// Gaps between consecutive times are uniform on [gap_min, gap_max].
    double gap_min = 0.1;
    double gap_max = 0.5;
};

struct SimData {
    MeasurementTensor observed;  ///< with cells removed completely at random
    TimeTensor times;            ///< shared across the variables of a patient
    MeasurementTensor truth;     ///< every cell observed
    std::vector<int> labels;     ///< per patient: 0 cross, 1 temporal, 2 GP
};

/// Throws ConfigError for an invalid spec and DataError when the missing
/// fraction cannot be met without emptying a (p, v) series.
SimData generate_simdata(const SimSpec& spec, Rng& rng);

/// Dataset wrapper with generated labels ("p0", "v0", ...).
Dataset to_dataset(const MeasurementTensor& x, const TimeTensor& t);

}  // namespace mixmi::sim
