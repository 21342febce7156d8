#include "mixmi/io.hpp"

#include "mixmi/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>
#include <unordered_map>

namespace mixmi::io {

namespace fs = std::filesystem;

namespace {

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    return in;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    return out;
}

bool next_line(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

std::string where(const fs::path& path, std::size_t line) {
    return path.filename().string() + ":" + std::to_string(line);
}

double parse_double(const std::string& s, const fs::path& path, std::size_t line, const char* what) {
    double x = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    while (first < last && *first == ' ') ++first;
    while (last > first && last[-1] == ' ') --last;
    if (first < last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, x);
    if (ec != std::errc() || ptr != last || !std::isfinite(x))
        throw DataError(where(path, line) + ": invalid " + what + " '" + s + "'");
    return x;
}

long long parse_index(const std::string& s, const fs::path& path, std::size_t line) {
    long long x = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc() || ptr != s.data() + s.size() || x < 0)
        throw DataError(where(path, line) + ": invalid time_index '" + s + "'");
    return x;
}

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> header_of(const fs::path& path) {
    auto in = open_in(path);
    std::string line;
    if (!next_line(in, line)) throw DataError("'" + path.string() + "' is empty");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    return split_csv_line(line);
}

const std::vector<std::string> kLongHeader{"patient_id", "time", "variable", "value"};
const std::vector<std::string> kDenseHeader{"patient", "variable", "time_index", "value", "time"};

}  // namespace

std::string format_double(double x) {
    if (std::isnan(x)) return "";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    (void)ec;
    return std::string(buf, ptr);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else {
            fields.back() += c;
        }
    }
    return fields;
}

InputFormat detect_format(const fs::path& path) {
    const auto h = header_of(path);
    if (h == kLongHeader) return InputFormat::Long;
    if (h.size() >= kDenseHeader.size() && std::equal(kDenseHeader.begin(), kDenseHeader.end(), h.begin()))
        return InputFormat::Dense;
    throw DataError("unrecognized header in '" + path.string() + "'");
}

std::vector<LongRecord> read_long_csv(const fs::path& path) {
    if (header_of(path) != kLongHeader) throw DataError(where(path, 1) + ": expected header patient_id,time,variable,value");
    auto in = open_in(path);
    std::string line;
    next_line(in, line);
    std::vector<LongRecord> out;
    for (std::size_t n = 2; next_line(in, line); ++n) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 4) throw DataError(where(path, n) + ": expected 4 fields, got " + std::to_string(f.size()));
        if (f[0].empty() || f[2].empty()) throw DataError(where(path, n) + ": empty patient or variable");
        LongRecord r{f[0], parse_double(f[1], path, n, "time"), f[2], std::nullopt};
        if (!f[3].empty()) r.value = parse_double(f[3], path, n, "value");
        out.push_back(std::move(r));
    }
    return out;
}

Dataset read_dense_csv(const fs::path& path) {
    const auto h = header_of(path);
    if (h.size() < kDenseHeader.size() || !std::equal(kDenseHeader.begin(), kDenseHeader.end(), h.begin()))
        throw DataError(where(path, 1) + ": expected header patient,variable,time_index,value,time");
    auto in = open_in(path);
    std::string line;
    next_line(in, line);

    struct Cell {
        std::size_t p, v;
        long long b;
        std::optional<double> value;
        double time;
        std::size_t line;
    };
    std::vector<Cell> cells;
    std::vector<std::string> patients, variables;
    std::unordered_map<std::string, std::size_t> pidx, vidx;
    long long max_b = -1;
    for (std::size_t n = 2; next_line(in, line); ++n) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != h.size())
            throw DataError(where(path, n) + ": expected " + std::to_string(h.size()) + " fields");
        auto intern = [](auto& names, auto& index, const std::string& s) {
            auto [it, fresh] = index.emplace(s, names.size());
            if (fresh) names.push_back(s);
            return it->second;
        };
        Cell c{intern(patients, pidx, f[0]), intern(variables, vidx, f[1]), parse_index(f[2], path, n), std::nullopt,
               parse_double(f[4], path, n, "time"), n};
        if (!f[3].empty()) c.value = parse_double(f[3], path, n, "value");
        max_b = std::max(max_b, c.b);
        cells.push_back(c);
    }
    if (cells.empty()) throw DataError("'" + path.string() + "' has no data rows");
    const std::size_t P = patients.size(), V = variables.size(), B = static_cast<std::size_t>(max_b + 1);
    Dataset d{MeasurementTensor(P, V, B), TimeTensor(P, V, B), patients, variables};
    std::vector<unsigned char> seen(P * V * B, 0);
    for (const auto& c : cells) {
        const auto b = static_cast<std::size_t>(c.b);
        auto& s = seen[(c.p * V + c.v) * B + b];
        if (s) throw DataError(where(path, c.line) + ": duplicate cell");
        s = 1;
        d.times.set(c.p, c.v, b, c.time);
        if (c.value) {
            d.values.set_value(c.p, c.v, b, *c.value);
            d.values.set_observed(c.p, c.v, b, true);
        }
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i]) {
            const std::size_t b = i % B, v = (i / B) % V, p = i / (B * V);
            throw DataError("dense input is missing cell (" + patients[p] + ", " + variables[v] + ", " +
                            std::to_string(b) + ")");
        }
    validate_shape(d);
    return d;
}

void write_dense_csv(const fs::path& path, const Dataset& data, const MeasurementTensor* imputed_from) {
    auto out = open_out(path);
    out << "patient,variable,time_index,value,time" << (imputed_from ? ",imputed" : "") << '\n';
    const auto& x = data.values;
    for (std::size_t p = 0; p < x.patients(); ++p)
        for (std::size_t v = 0; v < x.variables(); ++v)
            for (std::size_t b = 0; b < x.times(); ++b) {
                const bool show = imputed_from || x.observed(p, v, b);
                out << quote(data.patient_ids[p]) << ',' << quote(data.variable_names[v]) << ',' << b << ','
                    << (show ? format_double(x.value(p, v, b)) : "") << ',' << format_double(data.times.at(p, v, b));
                if (imputed_from) out << ',' << (imputed_from->observed(p, v, b) ? 0 : 1);
                out << '\n';
            }
}

void write_weights_model(const fs::path& path, const engine::WeightsReport& report,
                         const std::vector<std::string>& variable_names) {
    auto out = open_out(path);
    out << "variable,time_index,model_kind,pi1,pi2,pi3\n";
    for (const auto& r : report.models)
        out << quote(variable_names[r.variable]) << ',' << r.time_index << ',' << r.model_kind << ','
            << format_double(r.pi[0]) << ',' << format_double(r.pi[1]) << ',' << format_double(r.pi[2]) << '\n';
}

void write_weights_patient(const fs::path& path, const engine::WeightsReport& report,
                           const std::vector<std::string>& patient_ids,
                           const std::vector<std::string>& variable_names) {
    auto out = open_out(path);
    out << "patient,variable,time_index,Pi1,Pi2,Pi3\n";
    for (const auto& r : report.patients)
        out << quote(patient_ids[r.patient]) << ',' << quote(variable_names[r.variable]) << ',' << r.time_index << ','
            << format_double(r.weights[0]) << ',' << format_double(r.weights[1]) << ','
            << format_double(r.weights[2]) << '\n';
}

void write_mask_plan(const fs::path& path, const eval::MaskPlan& plan, const Dataset& labels) {
    auto out = open_out(path);
    out << "patient,variable,time_index,truth\n";
    for (const auto& c : plan.cells)
        out << quote(labels.patient_ids[c.patient]) << ',' << quote(labels.variable_names[c.variable]) << ','
            << c.time_index << ',' << format_double(c.truth) << '\n';
}

void write_report(const fs::path& path, const eval::EvaluationReport& report, const Dataset& labels) {
    auto out = open_out(path);
    out << "variable,masked,scored,mase,mae\n";
    std::size_t masked = 0, scored = 0;
    double mae_num = 0.0;
    for (const auto& v : report.variables) {
        out << quote(labels.variable_names[v.variable]) << ',' << v.masked << ',' << v.scored << ','
            << format_double(v.mase) << ',' << format_double(v.mae) << '\n';
        masked += v.masked;
        scored += v.scored;
        if (v.scorable()) mae_num += v.mae * static_cast<double>(v.scored);
    }
    const double mae = scored > 0 ? mae_num / static_cast<double>(scored) : std::nan("");
    out << "overall," << masked << ',' << scored << ',' << format_double(report.overall) << ','
        << format_double(mae) << '\n';
}

void write_errors(const fs::path& path, const eval::EvaluationReport& report, const Dataset& labels) {
    auto out = open_out(path);
    out << "patient,variable,time_index,truth,imputed,abs_error,scaled_error\n";
    for (const auto& c : report.cells)
        out << quote(labels.patient_ids[c.patient]) << ',' << quote(labels.variable_names[c.variable]) << ','
            << c.time_index << ',' << format_double(c.truth) << ',' << format_double(c.imputed) << ','
            << format_double(c.abs_error) << ',' << format_double(c.scaled_error) << '\n';
}

void write_excluded(const fs::path& path, const eval::EvaluationReport& report, const Dataset& labels) {
    auto out = open_out(path);
    out << "patient,variable,masked,reason\n";
    for (const auto& e : report.excluded)
        out << quote(labels.patient_ids[e.patient]) << ',' << quote(labels.variable_names[e.variable]) << ','
            << e.masked << ',' << quote(e.reason) << '\n';
}

std::map<CellKey, double> read_scaled_errors(const fs::path& path) {
    const auto h = header_of(path);
    const std::vector<std::string> expected{"patient", "variable", "time_index", "truth",
                                            "imputed", "abs_error", "scaled_error"};
    if (h != expected) throw DataError(where(path, 1) + ": not an errors file");
    auto in = open_in(path);
    std::string line;
    next_line(in, line);
    std::map<CellKey, double> out;
    for (std::size_t n = 2; next_line(in, line); ++n) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != expected.size()) throw DataError(where(path, n) + ": wrong field count");
        out[{f[0], f[1], parse_index(f[2], path, n)}] = parse_double(f[6], path, n, "scaled_error");
    }
    return out;
}

std::string summary_table(const eval::EvaluationReport& report, const Dataset& labels) {
    std::ostringstream s;
    s << std::left << std::setw(16) << "variable" << std::right << std::setw(8) << "masked" << std::setw(8)
      << "scored" << std::setw(12) << "MASE" << std::setw(12) << "MAE" << '\n';
    s << std::fixed << std::setprecision(5);
    for (const auto& v : report.variables) {
        s << std::left << std::setw(16) << labels.variable_names[v.variable] << std::right << std::setw(8)
          << v.masked << std::setw(8) << v.scored;
        if (v.scorable())
            s << std::setw(12) << v.mase << std::setw(12) << v.mae;
        else
            s << std::setw(12) << "n/a" << std::setw(12) << "n/a";
        s << '\n';
    }
    s << std::left << std::setw(32) << "overall" << std::right << std::setw(12) << report.overall << '\n';
    return s.str();
}

std::string file_digest(const fs::path& path) {
    auto in = open_in(path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto it = std::istreambuf_iterator<char>(in); it != std::istreambuf_iterator<char>(); ++it) {
        h ^= static_cast<unsigned char>(*it);
        h *= 0x100000001b3ULL;
    }
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << h;
    return s.str();
}

}  // namespace mixmi::io
