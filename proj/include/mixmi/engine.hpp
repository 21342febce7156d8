#pragma once

#include "mixmi/mixture.hpp"
#include "mixmi/rng.hpp"
#include "mixmi/tensor.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace mixmi::engine {

/// How each (v, b) fiber is modeled. `MixMI` trains the full and the
/// two-linear mixture and keeps the one with lower training error; the
/// single-component modes are ablations assembled from the same parts.
enum class Mode { MixMI, MixMILL, Full, CrossOnly, TemporalOnly, GpOnly };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& name);

struct ImputationConfig {
    std::size_t chains = 5;  ///< M
    std::size_t passes = 3;  ///< K
    Eigen::VectorXd pi0_full = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
    Eigen::VectorXd pi0_ll = Eigen::VectorXd::Constant(2, 0.5);
    std::uint64_t seed = 0;
    mixture::EmSettings em;
    Mode mode = Mode::MixMI;
    /// Impute with the fitted pi instead of the per-patient weights.
    bool fixed_weights = false;
    /// 0 means the OpenMP default.
    int threads = 0;

    /// Throws ConfigError on out-of-range settings.
    void validate() const;
};

/// Weight slots in reports: cross, temporal, GP. Absent components are 0.
using WeightTriple = std::array<double, 3>;

/// What one fiber fit produced during a pass.
struct FiberFit {
    bool trained = false;
    mixture::ModelKind kind = mixture::ModelKind::LinearLinear;
    WeightTriple pi{};
    std::vector<std::size_t> patients;  ///< imputed patients, in row order
    std::vector<WeightTriple> weights;  ///< per imputed patient
};

using FiberKey = std::pair<std::size_t, std::size_t>;  ///< (variable, time index)

/// One chain: a working copy of the tensor whose unobserved cells carry the
/// current estimates, the chain's visit order, and its random streams.
struct ChainState {
    MeasurementTensor working;
    std::vector<FiberKey> order;
    std::map<FiberKey, FiberFit> last_fits;
    std::vector<std::string> warnings;
    /// Per-variable [min, max] of the observed values; imputations are clamped to it.
    std::vector<std::pair<double, double>> bounds;
};

/// Fills every unobserved cell of variable v with a uniform draw from the
/// observed values of v pooled over patients and times. Observed cells are
/// copied untouched.
MeasurementTensor initial_impute(const MeasurementTensor& x, Rng& rng);

/// Observed range of each variable.
std::vector<std::pair<double, double>> observed_bounds(const MeasurementTensor& x);

/// Initial fill plus a uniformly shuffled (v, b) visit order for chain `index`.
ChainState start_chain(const MeasurementTensor& x, const ImputationConfig& config, std::size_t index);

/// One sweep over the chain's visit order. Each fiber is trained on the
/// current working values and its unobserved cells are overwritten at once, so
/// later fibers see the update. Imputed values are clamped to the variable's
/// observed range so one wild prediction cannot propagate through the chain.
/// Fibers with nothing observed keep their values and add a warning.
void simple_pass(ChainState& chain, const TimeTensor& times, const ImputationConfig& config);

/// Fits the configured model(s) for one fiber and returns what would be used
/// for imputation. Throws UntrainableError when nothing can be fitted.
mixture::MixtureParams fit_fiber(const mixture::PreparedSlice& training, const ImputationConfig& config,
                                 std::vector<std::string>* warnings = nullptr);

struct ModelWeightsRow {
    std::size_t variable = 0;
    std::size_t time_index = 0;
    std::string model_kind;
    WeightTriple pi{};
};

struct PatientWeightsRow {
    std::size_t patient = 0;
    std::size_t variable = 0;
    std::size_t time_index = 0;
    WeightTriple weights{};  ///< NaN when no chain could fit the fiber
};

/// Fitted weights from the final pass, pooled over chains.
struct WeightsReport {
    std::vector<ModelWeightsRow> models;
    std::vector<PatientWeightsRow> patients;
};

struct RunResult {
    MeasurementTensor imputed;  ///< input units; observed cells copied verbatim
    WeightsReport weights;
    std::vector<MeasurementTensor> chain_outputs;  ///< input units, one per chain
    StandardizationParams standardization;
    std::vector<std::string> warnings;
};

/// M independent chains of K simple passes on the z-scored tensor; the final
/// estimate of each unobserved cell is the mean over chains, in input units.
RunResult run(const MeasurementTensor& x, const TimeTensor& times, const ImputationConfig& config);

}  // namespace mixmi::engine
