// Command-line front end: impute, evaluate, synthesize, gradcheck.

#include "mixmi/engine.hpp"
#include "mixmi/error.hpp"
#include "mixmi/evaluation.hpp"
#include "mixmi/gradcheck.hpp"
#include "mixmi/io.hpp"
#include "mixmi/rng.hpp"
#include "mixmi/tensor.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#ifndef MIXMI_VERSION
#define MIXMI_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace mixmi;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct InputOptions {
    std::string input;
    bool times_in_input = true;
    std::size_t b = 0;  // 0: floor of the mean per-patient index count
};

struct EngineOptions {
    std::string mode = "mixmi";
    std::size_t chains = 5;
    std::size_t passes = 3;
    std::vector<double> pi0;
    std::uint64_t seed = 0;
    int threads = 0;
    int em_iters = 100;
    double em_tol = 1e-6;
    int theta_iters = 5;
    bool fixed_weights = false;
};

struct Loaded {
    Dataset data;
    std::string format;
    std::vector<std::string> excluded;
};

std::string one_line(std::string s) {
    for (auto& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

Loaded load(const InputOptions& in) {
    if (in.input.empty()) throw ConfigError("--input is required");
    Loaded out;
    if (io::detect_format(in.input) == io::InputFormat::Long) {
        auto ingest = tensorize(io::read_long_csv(in.input),
                                in.b > 0 ? std::optional<std::size_t>(in.b) : std::nullopt);
        out.data = std::move(ingest.data);
        out.excluded = std::move(ingest.excluded_patients);
        out.format = "long";
    } else {
        out.data = io::read_dense_csv(in.input);
        out.format = "dense";
        if (in.b > 0 && in.b != out.data.values.times())
            throw ConfigError("--b " + std::to_string(in.b) + " differs from the dense input's " +
                              std::to_string(out.data.values.times()) + " time indices");
    }
    if (!in.times_in_input) {
        auto& t = out.data.times;
        for (std::size_t p = 0; p < t.patients(); ++p)
            for (std::size_t v = 0; v < t.variables(); ++v)
                for (std::size_t b = 0; b < t.times(); ++b) t.set(p, v, b, static_cast<double>(b));
    }
    return out;
}

engine::ImputationConfig make_config(const EngineOptions& o) {
    engine::ImputationConfig c;
    c.mode = engine::mode_from_string(o.mode);
    c.chains = o.chains;
    c.passes = o.passes;
    c.seed = o.seed;
    c.threads = o.threads;
    c.fixed_weights = o.fixed_weights;
    c.em.max_iters = o.em_iters;
    c.em.rel_tol = o.em_tol;
    c.em.theta_iters = o.theta_iters;
    if (!o.pi0.empty()) {
        Eigen::VectorXd pi = Eigen::Map<const Eigen::VectorXd>(o.pi0.data(), static_cast<Eigen::Index>(o.pi0.size()));
        if (pi.size() == 3)
            c.pi0_full = pi;
        else if (pi.size() == 2)
            c.pi0_ll = pi;
        else
            throw ConfigError("--pi0 takes 3 weights (full mixture) or 2 weights (two-linear mixture)");
    }
    c.validate();
    return c;
}

json config_json(const InputOptions& in, const EngineOptions& o, const engine::ImputationConfig& c) {
    json j;
    j["input"] = in.input;
    j["times_in_input"] = in.times_in_input;
    j["b"] = in.b;
    j["mode"] = engine::to_string(c.mode);
    j["chains"] = c.chains;
    j["passes"] = c.passes;
    j["pi0_full"] = std::vector<double>(c.pi0_full.begin(), c.pi0_full.end());
    j["pi0_ll"] = std::vector<double>(c.pi0_ll.begin(), c.pi0_ll.end());
    j["seed"] = c.seed;
    j["threads"] = o.threads;
    j["em_iters"] = c.em.max_iters;
    j["em_tol"] = c.em.rel_tol;
    j["theta_iters"] = c.em.theta_iters;
    j["fixed_weights"] = c.fixed_weights;
    return j;
}

class Manifest {
public:
    explicit Manifest(std::string command) : start_(std::chrono::steady_clock::now()) {
        j_["command"] = std::move(command);
        j_["version"] = MIXMI_VERSION;
        j_["inputs"] = json::array();
        j_["outputs"] = json::array();
        j_["warnings"] = json::array();
    }
    json& operator[](const char* key) { return j_[key]; }
    void input(const fs::path& p) { j_["inputs"].push_back({{"path", p.string()}, {"fnv1a64", io::file_digest(p)}}); }
    void output(const fs::path& p) { j_["outputs"].push_back(p.filename().string()); }
    void warn(const std::string& w) { j_["warnings"].push_back(w); }
    void write(const fs::path& dir) {
        j_["threads_available"] = omp_get_max_threads();
        j_["wall_clock_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        std::ofstream out(dir / "manifest.json");
        if (!out) throw ConfigError("cannot write manifest in '" + dir.string() + "'");
        out << j_.dump(2) << '\n';
    }

private:
    json j_;
    std::chrono::steady_clock::time_point start_;
};

fs::path prepare_dir(const std::string& dir) {
    if (dir.empty()) throw ConfigError("--out-dir is required");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create '" + dir + "': " + ec.message());
    return dir;
}

void record_fits(Manifest& m, const engine::WeightsReport& w, const Dataset& d) {
    json kinds = json::array();
    for (const auto& r : w.models)
        kinds.push_back({{"variable", d.variable_names[r.variable]}, {"time_index", r.time_index}, {"model_kind", r.model_kind}});
    m["model_kinds"] = std::move(kinds);
}

void write_weights(Manifest& m, const fs::path& dir, const engine::WeightsReport& w, const Dataset& d) {
    io::write_weights_model(dir / "weights_model.csv", w, d.variable_names);
    io::write_weights_patient(dir / "weights_patient.csv", w, d.patient_ids, d.variable_names);
    m.output(dir / "weights_model.csv");
    m.output(dir / "weights_patient.csv");
    record_fits(m, w, d);
}

void add_input_options(CLI::App* app, InputOptions& in) {
    app->add_option("--input", in.input, "Long-format or dense CSV")->required();
    app->add_flag("--times-in-input,!--no-times-in-input", in.times_in_input,
                  "Use the file's times for the GP (otherwise the time index)")
        ->default_str("true");
    app->add_option("--b", in.b, "Time indices per patient for long input (0: floor of the mean)");
}

void add_engine_options(CLI::App* app, EngineOptions& o) {
    app->add_option("--mode", o.mode, "mixmi, mixmi-ll, full (ablations: cross, temporal, gp)")
        ->check(CLI::IsMember({"mixmi", "mixmi-ll", "full", "cross", "temporal", "gp"}))
        ->capture_default_str();
    app->add_option("--chains", o.chains, "Independent imputation chains (M)")->capture_default_str();
    app->add_option("--passes", o.passes, "Simple passes per chain (K)")->capture_default_str();
    app->add_option("--pi0", o.pi0, "Initial mixing weights, 3 for the full mixture or 2 for the two-linear one")
        ->delimiter(',');
    app->add_option("--seed", o.seed, "Seed for every random stream")->capture_default_str();
    app->add_option("--threads", o.threads, "Worker threads (0: all logical cores)")->capture_default_str();
    app->add_option("--em-iters", o.em_iters, "EM iteration limit")->capture_default_str();
    app->add_option("--em-tol", o.em_tol, "EM relative log-likelihood tolerance")->capture_default_str();
    app->add_option("--theta-iters", o.theta_iters, "Kernel ascent steps per M-step")->capture_default_str();
    app->add_flag("--fixed-weights", o.fixed_weights, "Impute with the fitted pi instead of per-patient weights");
}

int cmd_impute(const InputOptions& in, const EngineOptions& eo, const std::string& out_dir) {
    Manifest m("impute");
    const auto config = make_config(eo);
    const auto dir = prepare_dir(out_dir);
    const auto loaded = load(in);
    m["config"] = config_json(in, eo, config);
    m["input_format"] = loaded.format;
    m.input(in.input);
    for (const auto& p : loaded.excluded) m.warn("excluded patient " + p);

    const auto result = engine::run(loaded.data.values, loaded.data.times, config);
    for (const auto& w : result.warnings) m.warn(w);

    Dataset out = loaded.data;
    out.values = result.imputed;
    io::write_dense_csv(dir / "imputed.csv", out, &loaded.data.values);
    m.output(dir / "imputed.csv");
    write_weights(m, dir, result.weights, loaded.data);
    m.write(dir);
    return kOk;
}

int cmd_evaluate(const InputOptions& in, const EngineOptions& eo, const std::string& out_dir, double fraction,
                 const std::string& impute_with, const std::string& compare) {
    Manifest m("evaluate");
    const auto config = make_config(eo);
    const auto dir = prepare_dir(out_dir);
    const auto loaded = load(in);
    m["config"] = config_json(in, eo, config);
    m["fraction"] = fraction;
    m["impute_with"] = impute_with;
    m["input_format"] = loaded.format;
    m.input(in.input);
    for (const auto& p : loaded.excluded) m.warn("excluded patient " + p);

    const auto& original = loaded.data.values;
    Rng mask_rng = make_stream(config.seed, 0, Stream::Mask);
    const auto masked = eval::mask_random(original, fraction, mask_rng);

    MeasurementTensor imputed;
    if (impute_with == "mixmi") {
        auto result = engine::run(masked.masked, loaded.data.times, config);
        for (const auto& w : result.warnings) m.warn(w);
        write_weights(m, dir, result.weights, loaded.data);
        imputed = std::move(result.imputed);
    } else if (impute_with == "mean") {
        imputed = eval::mean_impute(masked.masked);
    } else {
        imputed = original;  // copy-truth
    }

    const auto report = eval::mase(masked.plan, imputed, original);
    Dataset out = loaded.data;
    out.values = imputed;
    io::write_dense_csv(dir / "imputed.csv", out, &masked.masked);
    io::write_mask_plan(dir / "mask.csv", masked.plan, loaded.data);
    io::write_report(dir / "report.csv", report, loaded.data);
    io::write_errors(dir / "errors.csv", report, loaded.data);
    io::write_excluded(dir / "excluded.csv", report, loaded.data);
    for (const char* f : {"imputed.csv", "mask.csv", "report.csv", "errors.csv", "excluded.csv"}) m.output(dir / f);
    m["masked_cells"] = masked.plan.cells.size();
    m["scored_cells"] = report.cells.size();
    m["overall_mase"] = std::isnan(report.overall) ? json(nullptr) : json(report.overall);

    std::cout << io::summary_table(report, loaded.data);
    if (!report.excluded.empty())
        std::cout << report.excluded.size() << " patient/variable pairs excluded (see excluded.csv)\n";

    if (!compare.empty()) {
        const auto theirs = io::read_scaled_errors(compare);
        std::vector<double> a, b;
        for (const auto& c : report.cells) {
            const io::CellKey key{loaded.data.patient_ids[c.patient], loaded.data.variable_names[c.variable],
                                  static_cast<long long>(c.time_index)};
            auto it = theirs.find(key);
            if (it == theirs.end()) continue;
            a.push_back(c.scaled_error);
            b.push_back(it->second);
        }
        if (a.empty()) throw DataError("no cells in common with '" + compare + "'");
        Rng perm = make_stream(config.seed, 0, Stream::Permutation);
        const double p = eval::permutation_test(a, b, 1000, perm);
        std::cout << "permutation_p=" << io::format_double(p) << " pairs=" << a.size() << " replicates=1000\n";
        m.input(compare);
        m["permutation"] = {{"compare", compare}, {"pairs", a.size()}, {"replicates", 1000}, {"p_value", p}};
    }
    m.write(dir);
    return kOk;
}

int cmd_synthesize(const InputOptions& in, const std::string& out_dir, double d) {
    Manifest m("synthesize");
    if (!(d >= 0.0 && d < 1.0)) throw ConfigError("--d must be in [0, 1)");
    const auto dir = prepare_dir(out_dir);
    const auto loaded = load(in);
    m["config"] = {{"input", in.input}, {"times_in_input", in.times_in_input}, {"b", in.b}, {"d", d}};
    m["input_format"] = loaded.format;
    m.input(in.input);
    for (const auto& p : loaded.excluded) m.warn("excluded patient " + p);

    const auto synth = eval::synthesize_times(loaded.data.values, loaded.data.times, d);
    for (const auto& [p, v] : synth.non_monotone) {
        const std::string w = "synthetic times not strictly increasing for patient " + loaded.data.patient_ids[p] +
                              ", variable " + loaded.data.variable_names[v];
        m.warn(w);
        std::cerr << "warning: " << w << '\n';
    }
    Dataset out = loaded.data;
    out.times = synth.times;
    io::write_dense_csv(dir / "synthetic.csv", out);
    m.output(dir / "synthetic.csv");
    m.write(dir);
    return kOk;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t instances, double perturb, const std::string& out_dir) {
    Manifest m("gradcheck");
    gradcheck::Options opt;
    opt.seed = seed;
    opt.instances = instances;
    opt.perturb = perturb;
    m["config"] = {{"seed", seed}, {"instances", instances}, {"tolerance", opt.tolerance}, {"step", opt.step},
                   {"perturb_gradient", perturb}};
    const auto summary = gradcheck::run(opt);

    std::ostringstream table;
    table << "instance,theta,patients,analytic,numeric,rel_error,status\n";
    for (const auto& r : summary.results)
        table << r.index << ',' << io::format_double(r.theta) << ',' << r.patients << ','
              << io::format_double(r.analytic) << ',' << io::format_double(r.numeric) << ','
              << io::format_double(r.rel_error) << ',' << (r.pass ? "pass" : "fail") << '\n';
    std::cout << table.str();
    if (instances == 0) {
        m.warn("no instances requested; vacuous pass");
        std::cerr << "warning: no instances requested; vacuous pass\n";
    }
    const auto failures = static_cast<std::size_t>(
        std::count_if(summary.results.begin(), summary.results.end(), [](const auto& r) { return !r.pass; }));
    std::cout << "gradcheck: " << summary.results.size() - failures << "/" << summary.results.size()
              << " passed, max_rel_error=" << io::format_double(summary.max_rel_error) << '\n';
    m["failures"] = failures;
    m["max_rel_error"] = summary.max_rel_error;
    if (!out_dir.empty()) {
        const auto dir = prepare_dir(out_dir);
        std::ofstream(dir / "gradcheck.csv") << table.str();
        m.output(dir / "gradcheck.csv");
        m.write(dir);
    }
    if (failures > 0) {
        std::cerr << "error=numerical reason=\"" << failures << " gradient check(s) at or above tolerance "
                  << io::format_double(opt.tolerance) << "\"\n";
        return kNumerical;
    }
    return kOk;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// Splices `key=value` lines of a --config file into the argument list as
// --key=value right after the subcommand name, skipping keys the command line
// already sets, so flags always win.
std::vector<std::string> expand_config(int argc, char** argv, const std::vector<std::string>& subcommands) {
    std::vector<std::string> args(argv, argv + argc);
    std::string path;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    }
    if (path.empty()) return args;

    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    auto given = [&](const std::string& key) {
        for (const auto& a : args)
            if (a == "--" + key || a.rfind("--" + key + "=", 0) == 0) return true;
        return false;
    };
    std::vector<std::string> extra;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(n) + ": expected key=value");
        std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        if (key.rfind("--", 0) == 0) key = key.substr(2);
        if (key.empty() || key == "config") throw ConfigError(path + ":" + std::to_string(n) + ": invalid key");
        if (!given(key)) extra.push_back("--" + key + "=" + value);
    }
    auto at = std::find_first_of(args.begin() + 1, args.end(), subcommands.begin(), subcommands.end());
    if (at == args.end()) return args;
    args.insert(at + 1, extra.begin(), extra.end());
    return args;
}

int fail(const char* kind, int code, const std::string& reason) {
    std::string r = one_line(reason);
    for (std::size_t i = 0; (i = r.find('"', i)) != std::string::npos; i += 2) r.insert(i, "\\");
    std::cerr << "error=" << kind << " reason=\"" << r << "\"\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mixture-based multiple imputation for multivariable time series"};
    app.set_version_flag("--version", MIXMI_VERSION);
    app.require_subcommand(1);
    app.footer(
        "Each subcommand accepts --config FILE with key=value lines named after the long flags\n"
        "(e.g. chains=5, pi0=0.5,0.25,0.25). Flags given on the command line override the file.\n"
        "Exit status: 0 success, 1 usage/config, 2 data error, 3 numerical failure.");

    InputOptions in;
    EngineOptions eo;
    std::string out_dir;
    double fraction = 0.2, d = 0.0, perturb = 0.0;
    std::string impute_with = "mixmi", compare;
    std::size_t instances = 100;

    auto* impute = app.add_subcommand("impute", "Impute every missing cell");
    auto* evaluate = app.add_subcommand("evaluate", "Mask observed cells, impute, and score with MASE");
    auto* synthesize = app.add_subcommand("synthesize", "Warp times toward value changes");
    auto* gradcheck = app.add_subcommand("gradcheck", "Check the kernel gradient against finite differences");

    std::string config_path;
    for (auto* sub : {impute, evaluate, synthesize, gradcheck}) {
        sub->add_option("--config", config_path, "key=value configuration file");
        sub->add_option("--out-dir", out_dir, "Output directory")->required(sub != gradcheck);
    }
    for (auto* sub : {impute, evaluate, synthesize}) add_input_options(sub, in);
    for (auto* sub : {impute, evaluate}) add_engine_options(sub, eo);

    evaluate->add_option("--fraction", fraction, "Share of observed cells to mask")->capture_default_str();
    evaluate->add_option("--impute-with", impute_with, "Imputer to score")
        ->check(CLI::IsMember({"mixmi", "mean", "copy-truth"}))
        ->capture_default_str();
    evaluate->add_option("--compare", compare, "errors.csv of another run; prints a paired permutation p-value");
    synthesize->add_option("--d", d, "Warp strength in [0, 1)")->required();
    gradcheck->add_option("--seed", eo.seed, "Seed")->capture_default_str();
    gradcheck->add_option("--instances", instances, "Random instances")->capture_default_str();
    gradcheck->add_option("--perturb-gradient", perturb, "Test hook: scale the analytic gradient by (1 + x)")
        ->capture_default_str();

    try {
        auto args = expand_config(argc, argv, {"impute", "evaluate", "synthesize", "gradcheck"});
        std::vector<char*> raw;
        for (auto& a : args) raw.push_back(a.data());
        app.parse(static_cast<int>(raw.size()), raw.data());
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", kUsage, e.what());
    } catch (const ConfigError& e) {
        return fail("config", kUsage, e.what());
    }

    try {
        if (*impute) return cmd_impute(in, eo, out_dir);
        if (*evaluate) return cmd_evaluate(in, eo, out_dir, fraction, impute_with, compare);
        if (*synthesize) return cmd_synthesize(in, out_dir, d);
        if (*gradcheck) return cmd_gradcheck(eo.seed, instances, perturb, out_dir);
    } catch (const ConfigError& e) {
        return fail("config", kUsage, e.what());
    } catch (const DataError& e) {
        return fail("data", kData, e.what());
    } catch (const NumericalError& e) {
        return fail("numerical", kNumerical, e.what());
    } catch (const std::exception& e) {
        return fail("internal", kNumerical, e.what());
    }
    return kUsage;
}
