#pragma once

// Experiment drivers behind the command-line tool. Each run_* function
// computes in memory and returns a result struct; the matching write_*
// function emits the plot data and tables. Configuration is a flat JSON
// object whose keys mirror ExperimentConfig; unknown keys are rejected.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "tikreg/bregman.hpp"
#include "tikreg/io.hpp"
#include "tikreg/problems.hpp"
#include "tikreg/rules.hpp"
#include "tikreg/solver.hpp"

namespace tikreg {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// How the first grid point is chosen:
///   norm_squared  alpha0 = ||K||^2
///   delta_scaled  alpha0 = min(alpha0_factor * delta, ||K||^2)
///   fixed         alpha0 as given
///   log_range     alpha0 = alpha_max, q chosen so the last point is alpha_min
enum class AlphaPolicy { norm_squared, delta_scaled, fixed, log_range };

inline const char* to_string(AlphaPolicy p) {
    switch (p) {
    case AlphaPolicy::norm_squared: return "norm_squared";
    case AlphaPolicy::delta_scaled: return "delta_scaled";
    case AlphaPolicy::fixed: return "fixed";
    case AlphaPolicy::log_range: return "log_range";
    }
    return "unknown";
}

struct ExperimentConfig {
    int experiment = 0;
    std::string problem = "deconvolution";
    // deconvolution
    std::size_t n = 512;
    double p = 1.2;
    double width = 0.2;
    double w_scale = WSpec{}.scale;
    // blur
    std::size_t N = 50;
    std::size_t band = 5;
    double sigma = 1.2;
    double eta = 1e-3;
    // noise: single level, or a geometric sweep when delta_count > 0
    double delta = 0.02;
    double delta_min = 1e-4;
    double delta_max = 1e-1;
    std::size_t delta_count = 0;
    // grid
    AlphaPolicy alpha_policy = AlphaPolicy::norm_squared;
    double alpha0 = 1.0;
    double alpha0_factor = 100.0;
    double alpha_min = 1e-4;
    double alpha_max = 1.0;
    double q = 0.8;
    std::size_t count = 60;
    std::size_t k0 = 1;
    // rules and solver
    double tau = 1.0;
    double tol = 1e-8;
    double estimate_slack = 1e-6;
    std::uint64_t seed = 1;
    std::string out = "out";
    int threads = 1;
};

inline ExperimentConfig default_config(int experiment) {
    ExperimentConfig c;
    c.experiment = experiment;
    switch (experiment) {
    case 1:
        c.delta = 0.02;
        c.alpha_policy = AlphaPolicy::log_range;
        c.alpha_min = 1e-4;
        c.alpha_max = 1.0;
        c.count = 41;
        break;
    case 2:
    case 3:
        c.n = 128;
        c.delta_count = 12;
        c.alpha_policy = experiment == 2 ? AlphaPolicy::norm_squared : AlphaPolicy::delta_scaled;
        c.q = 0.8;
        // the quasi-optimality grid spans four decades below alpha0
        c.count = experiment == 2 ? 60 : 42;
        break;
    case 4:
        c.problem = "blur";
        c.delta = 0.1;
        c.alpha_policy = AlphaPolicy::norm_squared;
        c.count = 50;
        break;
    default: break;
    }
    return c;
}

inline nlohmann::ordered_json to_json(const ExperimentConfig& c) {
    nlohmann::ordered_json j;
    j["experiment"] = c.experiment;
    j["problem"] = c.problem;
    j["n"] = c.n;
    j["p"] = c.p;
    j["width"] = c.width;
    j["w_scale"] = c.w_scale;
    j["N"] = c.N;
    j["band"] = c.band;
    j["sigma"] = c.sigma;
    j["eta"] = c.eta;
    j["delta"] = c.delta;
    j["delta_min"] = c.delta_min;
    j["delta_max"] = c.delta_max;
    j["delta_count"] = c.delta_count;
    j["alpha_policy"] = to_string(c.alpha_policy);
    j["alpha0"] = c.alpha0;
    j["alpha0_factor"] = c.alpha0_factor;
    j["alpha_min"] = c.alpha_min;
    j["alpha_max"] = c.alpha_max;
    j["q"] = c.q;
    j["count"] = c.count;
    j["k0"] = c.k0;
    j["tau"] = c.tau;
    j["tol"] = c.tol;
    j["estimate_slack"] = c.estimate_slack;
    j["seed"] = c.seed;
    j["out"] = c.out;
    j["threads"] = c.threads;
    return j;
}

namespace detail {

template <class T>
void read_field(const nlohmann::json& value, const std::string& key, T& target) {
    try {
        if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t> || std::is_same_v<T, int>) {
            if (!value.is_number_integer()) throw ConfigError("expected an integer");
            if constexpr (!std::is_same_v<T, int>)
                if (!value.is_number_unsigned() && value.get<long long>() < 0)
                    throw ConfigError("expected a nonnegative integer");
        } else if constexpr (std::is_same_v<T, double>) {
            if (!value.is_number()) throw ConfigError("expected a number");
        } else {
            if (!value.is_string()) throw ConfigError("expected a string");
        }
        target = value.get<T>();
    } catch (const std::exception& e) {
        throw ConfigError("config field '" + key + "': " + e.what());
    }
}

} // namespace detail

/// Overlays the keys of a JSON object onto `base`.
inline ExperimentConfig apply_json(ExperimentConfig c, const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "experiment") {
            int id = 0;
            detail::read_field(value, key, id);
            if (c.experiment != 0 && id != c.experiment)
                throw ConfigError("config field 'experiment': file is for experiment " + std::to_string(id) +
                                  " but experiment" + std::to_string(c.experiment) + " was requested");
        } else if (key == "problem") detail::read_field(value, key, c.problem);
        else if (key == "n") detail::read_field(value, key, c.n);
        else if (key == "p") detail::read_field(value, key, c.p);
        else if (key == "width") detail::read_field(value, key, c.width);
        else if (key == "w_scale") detail::read_field(value, key, c.w_scale);
        else if (key == "N") detail::read_field(value, key, c.N);
        else if (key == "band") detail::read_field(value, key, c.band);
        else if (key == "sigma") detail::read_field(value, key, c.sigma);
        else if (key == "eta") detail::read_field(value, key, c.eta);
        else if (key == "delta") detail::read_field(value, key, c.delta);
        else if (key == "delta_min") detail::read_field(value, key, c.delta_min);
        else if (key == "delta_max") detail::read_field(value, key, c.delta_max);
        else if (key == "delta_count") detail::read_field(value, key, c.delta_count);
        else if (key == "alpha_policy") {
            std::string name;
            detail::read_field(value, key, name);
            if (name == "norm_squared") c.alpha_policy = AlphaPolicy::norm_squared;
            else if (name == "delta_scaled") c.alpha_policy = AlphaPolicy::delta_scaled;
            else if (name == "fixed") c.alpha_policy = AlphaPolicy::fixed;
            else if (name == "log_range") c.alpha_policy = AlphaPolicy::log_range;
            else throw ConfigError("config field 'alpha_policy': unknown policy '" + name + "'");
        } else if (key == "alpha0") detail::read_field(value, key, c.alpha0);
        else if (key == "alpha0_factor") detail::read_field(value, key, c.alpha0_factor);
        else if (key == "alpha_min") detail::read_field(value, key, c.alpha_min);
        else if (key == "alpha_max") detail::read_field(value, key, c.alpha_max);
        else if (key == "q") detail::read_field(value, key, c.q);
        else if (key == "count") detail::read_field(value, key, c.count);
        else if (key == "k0") detail::read_field(value, key, c.k0);
        else if (key == "tau") detail::read_field(value, key, c.tau);
        else if (key == "tol") detail::read_field(value, key, c.tol);
        else if (key == "estimate_slack") detail::read_field(value, key, c.estimate_slack);
        else if (key == "seed") detail::read_field(value, key, c.seed);
        else if (key == "out") detail::read_field(value, key, c.out);
        else if (key == "threads") detail::read_field(value, key, c.threads);
        else throw ConfigError("config: unknown field '" + key + "'");
    }
    return c;
}

inline ExperimentConfig load_config_file(ExperimentConfig base, const std::filesystem::path& file) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text(file));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + file.string() + ": " + e.what());
    } catch (const FormatError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return apply_json(std::move(base), j);
}

inline void validate(const ExperimentConfig& c) {
    auto fail = [](const std::string& field, const std::string& why) {
        throw ConfigError("config field '" + field + "' " + why);
    };
    if (c.problem != "deconvolution" && c.problem != "blur") fail("problem", "must be 'deconvolution' or 'blur'");
    if (c.problem == "deconvolution") {
        if (!is_power_of_two(c.n) || c.n < 2) fail("n", "must be a power of two >= 2");
        if (!(c.p > 1.0 && c.p <= 2.0)) fail("p", "must lie in (1, 2]");
        if (!(c.width > 0.0 && c.width < 1.0)) fail("width", "must lie in (0, 1)");
        if (std::lround(c.width * static_cast<double>(c.n)) < 1) fail("width", "is too small for the grid size n");
        if (!(c.w_scale > 0.0 && std::isfinite(c.w_scale))) fail("w_scale", "must be positive");
    } else {
        if (c.N < 1) fail("N", "must be >= 1");
        if (c.band < 1 || c.band > c.N) fail("band", "must lie in [1, N]");
        if (!(c.sigma > 0.0)) fail("sigma", "must be positive");
        if (!(c.eta >= 0.0)) fail("eta", "must be nonnegative");
    }
    if (c.delta_count > 0) {
        if (!(c.delta_min > 0.0)) fail("delta_min", "must be positive");
        if (!(c.delta_max >= c.delta_min)) fail("delta_max", "must be >= delta_min");
    } else if (!(c.delta >= 0.0 && std::isfinite(c.delta))) {
        fail("delta", "must be nonnegative");
    }
    if (!(c.q > 0.0 && c.q < 1.0)) fail("q", "must lie in (0, 1)");
    if (c.count < 3) fail("count", "must be >= 3");
    if (c.k0 < 1 || c.k0 + 2 > c.count) fail("k0", "must satisfy 1 <= k0 <= count - 2");
    if (c.alpha_policy == AlphaPolicy::fixed && !(c.alpha0 > 0.0)) fail("alpha0", "must be positive");
    if (c.alpha_policy == AlphaPolicy::delta_scaled && !(c.alpha0_factor > 0.0))
        fail("alpha0_factor", "must be positive");
    if (c.alpha_policy == AlphaPolicy::log_range && !(c.alpha_min > 0.0 && c.alpha_max > c.alpha_min))
        fail("alpha_min", "must satisfy 0 < alpha_min < alpha_max");
    if (!(c.tau >= 1.0)) fail("tau", "must be >= 1");
    if (!(c.tol > 0.0)) fail("tol", "must be positive");
    if (!(c.estimate_slack >= 0.0)) fail("estimate_slack", "must be nonnegative");
    if (c.threads < 1) fail("threads", "must be >= 1");
    if (c.out.empty()) fail("out", "must be a nonempty path");
}

struct GridChoice {
    double alpha0;
    double q;
};

inline GridChoice grid_for(const ExperimentConfig& c, double K_norm, double delta) {
    switch (c.alpha_policy) {
    case AlphaPolicy::norm_squared: return {K_norm * K_norm, c.q};
    case AlphaPolicy::delta_scaled:
        if (!(delta > 0.0)) throw ConfigError("config field 'alpha_policy': delta_scaled needs delta > 0");
        return {std::min(c.alpha0_factor * delta, K_norm * K_norm), c.q};
    case AlphaPolicy::fixed: return {c.alpha0, c.q};
    case AlphaPolicy::log_range:
        return {c.alpha_max, std::pow(c.alpha_min / c.alpha_max, 1.0 / static_cast<double>(c.count - 1))};
    }
    return {c.alpha0, c.q};
}

inline std::vector<double> delta_levels(const ExperimentConfig& c) {
    if (c.delta_count == 0) return {c.delta};
    if (c.delta_count == 1) return {c.delta_min};
    std::vector<double> out(c.delta_count);
    const double ratio = std::log(c.delta_max / c.delta_min) / static_cast<double>(c.delta_count - 1);
    for (std::size_t i = 0; i < c.delta_count; ++i) out[i] = c.delta_min * std::exp(ratio * static_cast<double>(i));
    out.back() = c.delta_max;
    return out;
}

inline ProblemInstance make_problem(const ExperimentConfig& c, double delta, std::uint64_t seed) {
    if (c.problem == "blur") return blur_problem(c.N, c.band, c.sigma, c.eta, delta, seed);
    WSpec spec;
    spec.scale = c.w_scale;
    return deconvolution_problem(c.n, c.p, spec, delta, seed, c.width);
}

inline LinearOperator make_operator(const ExperimentConfig& c) {
    return c.problem == "blur" ? make_blur(c.N, c.band, c.sigma) : deconvolution_operator(c.n, c.width);
}

inline SolverOptions solver_options(const ExperimentConfig& c, double K_norm) {
    SolverOptions o;
    o.tol = c.tol;
    o.lipschitz = 1.01 * K_norm * K_norm;
    return o;
}

/// Runs body(i) for i in [0, count) on up to `threads` workers. Results must
/// be written to per-index slots; the first exception is rethrown.
template <class Body>
void parallel_for(std::size_t count, int threads, Body body) {
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, threads)), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

// ---- experiment 1: error estimates along a path -----------------------------

struct Experiment1Result {
    ProblemInstance instance;
    ErrorReport report;
    std::vector<Violation> violations;
};

inline Experiment1Result run_experiment1(const ExperimentConfig& c) {
    validate(c);
    if (c.problem != "deconvolution") throw ConfigError("config field 'problem': experiment 1 needs deconvolution");
    Experiment1Result r{make_problem(c, c.delta, c.seed), {}, {}};
    const double K_norm = operator_norm(r.instance.K, 1e-8);
    const auto grid = grid_for(c, K_norm, c.delta);
    const auto opts = solver_options(c, K_norm);
    const auto& inst = r.instance;
    const auto noisy = solve_path(inst.K, inst.y_delta, inst.R, grid.alpha0, grid.q, c.count, opts);
    const auto exact = solve_path(inst.K, inst.y_dagger, inst.R, grid.alpha0, grid.q, c.count, opts);
    r.report = build_error_report(inst.K, inst.R, noisy, exact, inst.x_dagger, inst.w, inst.delta);
    r.violations = check_estimates(r.report, c.estimate_slack);
    return r;
}

inline void write_experiment1(const ExperimentConfig& c, const Experiment1Result& r) {
    const std::filesystem::path out = c.out;
    Curve total, data, approx, phi, bound;
    for (const auto& row : r.report.rows) {
        total.emplace_back(row.alpha, row.total_error);
        data.emplace_back(row.alpha, row.data_error);
        approx.emplace_back(row.alpha, row.approx_error);
        phi.emplace_back(row.alpha, row.phi);
        bound.emplace_back(row.alpha, row.total_bound);
    }
    write_dat(out / "total_error.dat", total);
    write_dat(out / "data_error.dat", data);
    write_dat(out / "approx_error.dat", approx);
    write_dat(out / "phi.dat", phi);
    write_dat(out / "total_bound.dat", bound);
    error_report_table(r.report).write(out / "error_report.csv");
    violations_table(r.violations).write(out / "violations.csv");
    nlohmann::ordered_json summary;
    summary["config"] = to_json(c);
    summary["w_norm"] = r.report.w_norm;
    summary["epsilon_hat"] = number_or_null(r.instance.epsilon_hat);
    summary["violations"] = r.violations.size();
    write_text(out / "summary.json", summary.dump(2) + "\n");
}

// ---- experiments 2 and 3: rule versus oracle over a delta sweep -------------

struct SweepRow {
    double delta = 0.0;
    std::uint64_t seed = 0;
    double epsilon_hat = 0.0;
    double alpha0 = 0.0;
    RuleSelection rule;
    RuleSelection oracle;
    double rule_error = 0.0;
    double rule_norm_error = 0.0;
    double oracle_error = 0.0;
    double max_gap = 0.0;
};

struct SweepResult {
    Rule rule = Rule::hanke_raus;
    std::vector<SweepRow> rows;
};

inline SweepResult run_sweep(const ExperimentConfig& c, Rule rule) {
    validate(c);
    if (rule != Rule::hanke_raus && rule != Rule::quasi_optimality)
        throw ConfigError("sweep: rule must be hanke_raus or quasi_optimality");
    const std::vector<double> deltas = delta_levels(c);
    for (double d : deltas)
        if (!(d > 0.0)) throw ConfigError("config field 'delta': sweeps need positive noise levels");
    // The operator does not depend on delta; its norm is computed once.
    const double K_norm = operator_norm(make_operator(c), 1e-8);
    const auto opts = solver_options(c, K_norm);
    SweepResult result{rule, std::vector<SweepRow>(deltas.size())};
    parallel_for(deltas.size(), c.threads, [&](std::size_t i) {
        SweepRow& row = result.rows[i];
        row.delta = deltas[i];
        row.seed = c.seed + i;
        const ProblemInstance inst = make_problem(c, row.delta, row.seed);
        row.epsilon_hat = inst.epsilon_hat;
        const auto grid = grid_for(c, K_norm, row.delta);
        row.alpha0 = grid.alpha0;
        const auto path = solve_path(inst.K, inst.y_delta, inst.R, grid.alpha0, grid.q, c.count, opts);
        row.rule = rule == Rule::hanke_raus ? hanke_raus(path, K_norm) : quasi_optimality(path, c.k0);
        row.oracle = oracle_best(path, inst.x_dagger, inst.xi_dagger, OracleMetric::bregman);
        const Vector& x = path.solutions[row.rule.index].x;
        row.rule_error = bregman_divergence(inst.R, x, inst.x_dagger, inst.xi_dagger);
        row.rule_norm_error = (x - inst.x_dagger).norm();
        row.oracle_error = row.oracle.criterion;
        for (const auto& s : path.solutions) row.max_gap = std::max(row.max_gap, s.optimality_gap);
    });
    return result;
}

inline void write_sweep(const ExperimentConfig& c, const SweepResult& r) {
    const std::filesystem::path out = c.out;
    Curve alpha_rule, alpha_oracle, error_rule, error_oracle;
    CsvTable table({"delta", "seed", "epsilon_hat", "alpha0", "alpha_rule", "error_rule", "norm_error_rule",
                    "alpha_oracle", "error_oracle", "delta_star", "warnings"});
    for (const auto& row : r.rows) {
        alpha_rule.emplace_back(row.delta, row.rule.alpha_selected);
        alpha_oracle.emplace_back(row.delta, row.oracle.alpha_selected);
        error_rule.emplace_back(row.delta, row.rule_error);
        error_oracle.emplace_back(row.delta, row.oracle_error);
        table.add_row({format_double(row.delta), std::to_string(row.seed), format_double(row.epsilon_hat),
                       format_double(row.alpha0), format_double(row.rule.alpha_selected),
                       format_double(row.rule_error), format_double(row.rule_norm_error),
                       format_double(row.oracle.alpha_selected), format_double(row.oracle_error),
                       format_double(row.rule.delta_star), std::to_string(row.rule.warnings.size())});
    }
    const std::string name = r.rule == Rule::hanke_raus ? "hanke_raus" : "quasi_optimality";
    write_dat(out / ("alpha_" + name + ".dat"), alpha_rule);
    write_dat(out / "alpha_oracle_bregman.dat", alpha_oracle);
    write_dat(out / ("error_" + name + ".dat"), error_rule);
    write_dat(out / "error_oracle_bregman.dat", error_oracle);
    table.write(out / "sweep.csv");
    nlohmann::ordered_json summary;
    summary["config"] = to_json(c);
    summary["rule"] = name;
    write_text(out / "summary.json", summary.dump(2) + "\n");
}

// ---- experiment 4: deblurring table ------------------------------------------

struct TableRow {
    Rule rule;
    double alpha;
    double bregman_error;
    double norm_error;
    Vector x;
    std::vector<std::string> warnings;
};

struct Experiment4Result {
    ProblemInstance instance;
    std::vector<TableRow> rows;  // oracle_bregman, oracle_norm, hanke_raus, quasi_optimality, discrepancy
    RuleSelection hr;
    RuleSelection qo;
    RuleSelection discrepancy;
    double max_gap = 0.0;
};

inline Experiment4Result run_experiment4(const ExperimentConfig& c) {
    validate(c);
    if (!(c.delta > 0.0)) throw ConfigError("config field 'delta': experiment 4 needs delta > 0");
    Experiment4Result r{make_problem(c, c.delta, c.seed), {}, {}, {}, {}};
    const auto& inst = r.instance;
    const double K_norm = operator_norm(inst.K, 1e-8);
    const auto grid = grid_for(c, K_norm, c.delta);
    const auto opts = solver_options(c, K_norm);
    const auto path = solve_path(inst.K, inst.y_delta, inst.R, grid.alpha0, grid.q, c.count, opts);
    for (const auto& s : path.solutions) r.max_gap = std::max(r.max_gap, s.optimality_gap);

    auto row_for = [&](const RuleSelection& sel, const Vector& x) {
        return TableRow{sel.rule, sel.alpha_selected, bregman_divergence(inst.R, x, inst.x_dagger, inst.xi_dagger),
                        (x - inst.x_dagger).norm(), x, sel.warnings};
    };
    const auto ob = oracle_best(path, inst.x_dagger, inst.xi_dagger, OracleMetric::bregman);
    const auto on = oracle_best(path, inst.x_dagger, inst.xi_dagger, OracleMetric::norm);
    r.hr = hanke_raus(path, K_norm);
    r.qo = quasi_optimality(path, c.k0);
    auto dp = discrepancy_principle(inst.K, inst.y_delta, inst.R, inst.delta, c.tau, path.alphas.back(),
                                    path.alphas.front(), opts);
    r.discrepancy = dp.selection;
    r.rows.push_back(row_for(ob, path.solutions[ob.index].x));
    r.rows.push_back(row_for(on, path.solutions[on.index].x));
    r.rows.push_back(row_for(r.hr, path.solutions[r.hr.index].x));
    r.rows.push_back(row_for(r.qo, path.solutions[r.qo.index].x));
    r.rows.push_back(row_for(dp.selection, dp.solution.x));
    return r;
}

inline void write_experiment4(const ExperimentConfig& c, const Experiment4Result& r) {
    const std::filesystem::path out = c.out;
    CsvTable table({"rule", "alpha", "bregman_distance", "norm_error"});
    for (const auto& row : r.rows)
        table.add_row({to_string(row.rule), format_double(row.alpha), format_double(row.bregman_error),
                       format_double(row.norm_error)});
    table.write(out / "table.csv");
    write_dat(out / "hanke_raus_phi.dat", diagnostics_curve(r.hr));
    write_dat(out / "quasi_optimality_mu.dat", diagnostics_curve(r.qo));
    write_dat(out / "discrepancy_residual.dat", diagnostics_curve(r.discrepancy));

    const std::filesystem::path images = out / "images";
    nlohmann::ordered_json manifest;
    manifest["rows"] = c.N;
    manifest["cols"] = c.N;
    manifest["layout"] = "column-major float64 little-endian";
    nlohmann::ordered_json files = nlohmann::ordered_json::array();
    auto image = [&](const std::string& name, const Vector& v) {
        write_f64(images / (name + ".f64"), v);
        files.push_back(name + ".f64");
    };
    image("x_dagger", r.instance.x_dagger);
    image("y_dagger", r.instance.y_dagger);
    image("y_delta", r.instance.y_delta);
    for (const auto& row : r.rows) image(to_string(row.rule), row.x);
    manifest["files"] = files;
    write_text(images / "manifest.json", manifest.dump(2) + "\n");

    nlohmann::ordered_json summary;
    summary["config"] = to_json(c);
    summary["epsilon_hat"] = number_or_null(r.instance.epsilon_hat);
    nlohmann::ordered_json warnings;
    for (const auto& row : r.rows) warnings[to_string(row.rule)] = row.warnings;
    summary["warnings"] = warnings;
    write_text(out / "summary.json", summary.dump(2) + "\n");
}

// ---- ad-hoc commands on saved problems ----------------------------------------

struct PathRequest {
    double K_norm;
    GridChoice grid;
    RegularizationPath path;
};

inline PathRequest solve_problem_path(const ExperimentConfig& c, const ProblemInstance& inst, const Vector& data) {
    const double K_norm = operator_norm(inst.K, 1e-8);
    const auto grid = grid_for(c, K_norm, inst.delta);
    auto path = solve_path(inst.K, data, inst.R, grid.alpha0, grid.q, c.count, solver_options(c, K_norm));
    return {K_norm, grid, std::move(path)};
}

inline CsvTable path_table(const RegularizationPath& path) {
    CsvTable t({"alpha", "residual", "penalty", "objective", "iterations", "optimality_gap"});
    for (const auto& s : path.solutions)
        t.add_numeric_row({s.alpha, s.residual_norm, s.penalty_value, s.objective, static_cast<double>(s.iterations),
                           s.optimality_gap});
    return t;
}

struct SelectOutcome {
    RuleSelection selection;
    GridChoice grid;
};

inline SelectOutcome select_on_problem(const ExperimentConfig& c, const ProblemInstance& inst, Rule rule) {
    validate(c);
    auto req = solve_problem_path(c, inst, inst.y_delta);
    const auto& path = req.path;
    switch (rule) {
    case Rule::hanke_raus: return {hanke_raus(path, req.K_norm), req.grid};
    case Rule::quasi_optimality: return {quasi_optimality(path, c.k0), req.grid};
    case Rule::oracle_bregman:
    case Rule::oracle_norm: {
        const Vector xi = inst.xi_dagger.size() ? inst.xi_dagger : subgradient(inst.R, inst.x_dagger);
        return {oracle_best(path, inst.x_dagger, xi,
                            rule == Rule::oracle_bregman ? OracleMetric::bregman : OracleMetric::norm),
                req.grid};
    }
    case Rule::discrepancy: {
        if (!(inst.delta > 0.0)) throw ConfigError("select: the discrepancy principle needs delta > 0");
        auto dp = discrepancy_principle(inst.K, inst.y_delta, inst.R, inst.delta, c.tau, path.alphas.back(),
                                        path.alphas.front(), solver_options(c, req.K_norm));
        return {dp.selection, req.grid};
    }
    }
    throw ConfigError("select: unsupported rule");
}

struct ReportOutcome {
    ErrorReport report;
    std::vector<Violation> violations;
};

inline ReportOutcome report_on_problem(const ExperimentConfig& c, const ProblemInstance& inst) {
    validate(c);
    if (!inst.has_source_condition())
        throw ConfigError("report: the problem has no source element w; the estimates need one");
    const auto noisy = solve_problem_path(c, inst, inst.y_delta);
    const auto exact = solve_problem_path(c, inst, inst.y_dagger);
    ReportOutcome out;
    out.report = build_error_report(inst.K, inst.R, noisy.path, exact.path, inst.x_dagger, inst.w, inst.delta);
    out.violations = check_estimates(out.report, c.estimate_slack);
    return out;
}

} // namespace tikreg
