#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace mixmi {

/// Patient x variable x time-index cube of measurements.
///
/// Cells are addressed as (p, v, b). A cell whose value is NaN is unfilled;
/// once initial imputation has run every cell holds a number and the
/// `observed` flag alone tells originally-measured cells apart.
class MeasurementTensor {
public:
    MeasurementTensor() = default;
    MeasurementTensor(std::size_t patients, std::size_t variables, std::size_t times);

    std::size_t patients() const { return P_; }
    std::size_t variables() const { return V_; }
    std::size_t times() const { return B_; }
    std::size_t size() const { return values_.size(); }

    std::size_t index(std::size_t p, std::size_t v, std::size_t b) const { return (p * V_ + v) * B_ + b; }

    double value(std::size_t p, std::size_t v, std::size_t b) const { return values_[index(p, v, b)]; }
    void set_value(std::size_t p, std::size_t v, std::size_t b, double x) { values_[index(p, v, b)] = x; }
    bool observed(std::size_t p, std::size_t v, std::size_t b) const { return observed_[index(p, v, b)] != 0; }
    void set_observed(std::size_t p, std::size_t v, std::size_t b, bool obs) { observed_[index(p, v, b)] = obs ? 1 : 0; }

    /// Marks a cell missing and clears its working value.
    void set_missing(std::size_t p, std::size_t v, std::size_t b);

    bool filled(std::size_t p, std::size_t v, std::size_t b) const;
    bool is_filled() const;

    std::size_t observed_count() const;
    std::size_t observed_count(std::size_t p, std::size_t v) const;

    const std::vector<double>& raw_values() const { return values_; }
    const std::vector<unsigned char>& raw_mask() const { return observed_; }

    friend bool operator==(const MeasurementTensor&, const MeasurementTensor&);

private:
    std::size_t P_ = 0, V_ = 0, B_ = 0;
    std::vector<double> values_;
    std::vector<unsigned char> observed_;
};

/// Measurement times, one per (p, v, b). Always complete.
class TimeTensor {
public:
    TimeTensor() = default;
    TimeTensor(std::size_t patients, std::size_t variables, std::size_t times);

    std::size_t patients() const { return P_; }
    std::size_t variables() const { return V_; }
    std::size_t times() const { return B_; }

    double at(std::size_t p, std::size_t v, std::size_t b) const { return t_[(p * V_ + v) * B_ + b]; }
    void set(std::size_t p, std::size_t v, std::size_t b, double t) { t_[(p * V_ + v) * B_ + b] = t; }

    const std::vector<double>& raw() const { return t_; }

    friend bool operator==(const TimeTensor&, const TimeTensor&) = default;

private:
    std::size_t P_ = 0, V_ = 0, B_ = 0;
    std::vector<double> t_;
};

/// Measurements plus times plus the labels needed to write them back out.
struct Dataset {
    MeasurementTensor values;
    TimeTensor times;
    std::vector<std::string> patient_ids;
    std::vector<std::string> variable_names;
};

/// Throws DataError unless P >= 1, V >= 2, B >= 2, shapes agree and labels match.
void validate_shape(const Dataset& data);

/// Per-variable z-score parameters, estimated over observed cells only.
struct StandardizationParams {
    std::vector<double> mean;
    std::vector<double> stddev;
};

/// Population mean/stddev per variable. Throws DataError naming the variable
/// when one has zero variance or no observed cell.
StandardizationParams fit_standardization(const MeasurementTensor& x,
                                          const std::vector<std::string>& variable_names = {});
MeasurementTensor standardize(const MeasurementTensor& x, const StandardizationParams& s);
MeasurementTensor destandardize(const MeasurementTensor& x, const StandardizationParams& s);

/// One row of a long-format file. An empty `value` is a missing measurement.
struct LongRecord {
    std::string patient_id;
    double time = 0.0;
    std::string variable;
    std::optional<double> value;
};

struct IngestResult {
    Dataset data;  ///< raw units
    StandardizationParams standardization;
    std::size_t target_times = 0;
    std::vector<std::string> excluded_patients;
};

/// Pivots long records into aligned tensors.
///
/// Records of one patient must be contiguous and their times non-decreasing;
/// rows sharing a time form one time index. Patients with fewer than
/// `target_times` indices are dropped, longer ones truncated, and any patient
/// left with a variable that was never observed is dropped too. Without
/// `target_times` the floor of the mean index count over all patients is used.
/// Variables are ordered by name, patients by first appearance.
IngestResult tensorize(const std::vector<LongRecord>& records, std::optional<std::size_t> target_times);

/// V-space row for one patient: x_{p,-v,b} followed by x_{p,v,-b}.
Eigen::VectorXd assemble_row(const MeasurementTensor& x, std::size_t p, std::size_t v, std::size_t b);

/// Rows of one (v, b) fiber, laid out for the three base models.
struct FiberSlice {
    std::size_t variable = 0;
    std::size_t time_index = 0;
    std::vector<std::size_t> patients;
    Eigen::VectorXd target;           ///< x_{p,v,b}; NaN for rows that are imputation targets
    Eigen::MatrixXd cross_inputs;     ///< x_{p,-v,b}, |rows| x (V-1)
    Eigen::MatrixXd temporal_inputs;  ///< x_{p,v,-b}, |rows| x (B-1)
    Eigen::MatrixXd temporal_times;   ///< t_{p,v,-b}
    Eigen::VectorXd target_times;     ///< t_{p,v,b}

    std::size_t rows() const { return patients.size(); }
    std::size_t dim() const { return static_cast<std::size_t>(cross_inputs.cols() + temporal_inputs.cols()); }
    /// Stacked V-space rows, cross-sectional block first.
    Eigen::MatrixXd v_rows() const;
    Eigen::VectorXd v_row(std::size_t i) const;
};

using TrainingSlice = FiberSlice;

/// Patients whose target cell is observed. Throws UntrainableError when none is.
TrainingSlice training_slice(const MeasurementTensor& x, const TimeTensor& t, std::size_t v, std::size_t b);

/// Patients whose target cell is not observed (the cells an imputation writes).
FiberSlice missing_slice(const MeasurementTensor& x, const TimeTensor& t, std::size_t v, std::size_t b);

}  // namespace mixmi
