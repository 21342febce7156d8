#pragma once

#include "mixmi/rng.hpp"
#include "mixmi/tensor.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mixmi::eval {

struct MaskedCell {
    std::size_t patient = 0;
    std::size_t variable = 0;
    std::size_t time_index = 0;
    double truth = 0.0;
};

/// Cells hidden for scoring, with their ground truth.
struct MaskPlan {
    std::vector<MaskedCell> cells;
};

struct MaskResult {
    MeasurementTensor masked;
    MaskPlan plan;
};

/// Draws `count` observed cells uniformly without replacement, skipping any
/// draw that would leave its (p, v) fiber with no observed value. Cells come
/// back in draw order. Throws DataError when the constraint makes `count`
/// unreachable.
std::vector<MaskedCell> sample_observed_cells(const MeasurementTensor& x, std::size_t count, Rng& rng);

/// Hides floor(fraction * #observed) cells chosen by sample_observed_cells.
/// `fraction` must lie in [0, 1).
MaskResult mask_random(const MeasurementTensor& x, double fraction, Rng& rng);

struct CellError {
    std::size_t patient = 0;
    std::size_t variable = 0;
    std::size_t time_index = 0;
    double truth = 0.0;
    double imputed = 0.0;
    double abs_error = 0.0;
    double scaled_error = 0.0;  ///< abs_error over the (p, v) scale
};

struct VariableScore {
    std::size_t variable = 0;
    std::size_t masked = 0;  ///< cells of this variable in the plan
    std::size_t scored = 0;  ///< cells left after excluding zero-scale pairs
    double mase = 0.0;       ///< NaN when not scorable
    double mae = 0.0;        ///< NaN when not scorable
    bool scorable() const { return scored > 0; }
};

struct ExcludedPair {
    std::size_t patient = 0;
    std::size_t variable = 0;
    std::size_t masked = 0;
    std::string reason;
};

struct EvaluationReport {
    std::vector<VariableScore> variables;
    double overall = 0.0;  ///< masked-count weighted mean of the scorable variables; NaN if none
    std::vector<CellError> cells;
    std::vector<ExcludedPair> excluded;
};

/// Mean absolute scaled error per variable and overall.
///
/// The scale of a (p, v) pair is (J/(J-1)) * sum |Y_j - Y_{j-1}| over the J
/// values observed in `original` (masked truth included), in time order.
/// Pairs with J < 2 or a zero scale are dropped from numerator and count and
/// listed in `excluded`. Both tensors must be in the same (raw) units.
EvaluationReport mase(const MaskPlan& plan, const MeasurementTensor& imputed, const MeasurementTensor& original);

struct SynthesizedTimes {
    TimeTensor times;
    /// (patient, variable) series whose new times are not strictly increasing.
    std::vector<std::pair<std::size_t, std::size_t>> non_monotone;
};

/// Warps times so that relative time gaps move toward relative value changes.
///
/// Per (p, v) series, over its observed entries:
///   t'_1 = t_1,  t'_i = t_i + d S sum_{j=2..i} (dx_j - dt_j),  S = sum |t_j - t_{j-1}|
/// with dx, dt the gaps normalized to sum to one. Unobserved entries take the
/// shift interpolated linearly (in real time) between neighbouring observed
/// entries, or the nearest observed entry's shift beyond either end. Series
/// with fewer than two observed values, or with no variation in value, are
/// left unchanged. d = 0 returns the input exactly. Throws ConfigError unless
/// 0 <= d < 1.
SynthesizedTimes synthesize_times(const MeasurementTensor& x, const TimeTensor& t, double d);

enum class Alternative { TwoSided, Greater };

/// Paired sign-flip permutation test on mean(a - b).
///
/// p = (1 + #{perm stat >= observed}) / (replicates + 1), comparing absolute
/// values for the two-sided test. `Greater` tests mean(a - b) > 0.
double permutation_test(std::span<const double> a, std::span<const double> b, int replicates, Rng& rng,
                        Alternative alternative = Alternative::TwoSided);

/// Replaces every unobserved cell with its variable's observed mean.
MeasurementTensor mean_impute(const MeasurementTensor& x);

}  // namespace mixmi::eval
