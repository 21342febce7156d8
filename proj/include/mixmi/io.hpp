#pragma once

#include "mixmi/engine.hpp"
#include "mixmi/evaluation.hpp"
#include "mixmi/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <tuple>
#include <vector>

namespace mixmi::io {

/// Shortest decimal that round-trips; "" for NaN.
std::string format_double(double x);

/// Splits one CSV line. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_csv_line(const std::string& line);

enum class InputFormat { Long, Dense };

/// Decides by header: `patient_id,time,variable,value` is long,
/// `patient,variable,time_index,value,time[,...]` is dense.
InputFormat detect_format(const std::filesystem::path& path);

/// Throws DataError with the offending line number on malformed input.
std::vector<LongRecord> read_long_csv(const std::filesystem::path& path);

/// Reads a complete dense grid. Patients and variables keep first-appearance
/// order; time indices must cover 0..B-1 for every (patient, variable).
/// Columns after `time` are ignored.
Dataset read_dense_csv(const std::filesystem::path& path);

/// Columns patient,variable,time_index,value,time. With `imputed_from`, every
/// cell is written and an `imputed` column (0/1) flags cells unobserved in
/// that tensor.
void write_dense_csv(const std::filesystem::path& path, const Dataset& data,
                     const MeasurementTensor* imputed_from = nullptr);

void write_weights_model(const std::filesystem::path& path, const engine::WeightsReport& report,
                         const std::vector<std::string>& variable_names);
void write_weights_patient(const std::filesystem::path& path, const engine::WeightsReport& report,
                           const std::vector<std::string>& patient_ids,
                           const std::vector<std::string>& variable_names);

void write_mask_plan(const std::filesystem::path& path, const eval::MaskPlan& plan, const Dataset& labels);
/// variable,masked,scored,mase,mae with a final `overall` row.
void write_report(const std::filesystem::path& path, const eval::EvaluationReport& report, const Dataset& labels);
/// Per-cell errors: patient,variable,time_index,truth,imputed,abs_error,scaled_error.
void write_errors(const std::filesystem::path& path, const eval::EvaluationReport& report, const Dataset& labels);
void write_excluded(const std::filesystem::path& path, const eval::EvaluationReport& report, const Dataset& labels);

using CellKey = std::tuple<std::string, std::string, long long>;
/// Reads the scaled_error column of an errors file keyed by cell.
std::map<CellKey, double> read_scaled_errors(const std::filesystem::path& path);

/// Human-readable per-variable table.
std::string summary_table(const eval::EvaluationReport& report, const Dataset& labels);

/// 64-bit FNV-1a of the file's bytes, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

}  // namespace mixmi::io
