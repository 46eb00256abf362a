// Command-line front end: experiments 1-4 plus synthesize, solve-path,
// select and report on saved problem directories.
//
// Exit codes: 0 success, 1 numerical failure (solver, bracket or estimate
// violation), 2 usage or configuration error.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tikreg/experiments.hpp"

namespace {

using namespace tikreg;

constexpr int kOk = 0;
constexpr int kNumerical = 1;
constexpr int kUsage = 2;

struct GlobalFlags {
    std::string config_file;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> threads;
    std::vector<std::string> sets;
};

struct GridFlags {
    std::optional<double> q;
    std::optional<std::size_t> count;
    std::optional<double> alpha0;
    std::optional<std::size_t> k0;
    std::optional<double> tau;
};

nlohmann::json parse_set_value(const std::string& text) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception&) {
        return nlohmann::json(text);
    }
}

ExperimentConfig build_config(ExperimentConfig c, const GlobalFlags& g, const GridFlags& grid = {}) {
    if (!g.config_file.empty()) c = load_config_file(c, g.config_file);
    nlohmann::json overrides = nlohmann::json::object();
    for (const auto& s : g.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
        overrides[s.substr(0, eq)] = parse_set_value(s.substr(eq + 1));
    }
    c = apply_json(c, overrides);
    if (g.seed) c.seed = *g.seed;
    if (g.out) c.out = *g.out;
    if (g.threads) c.threads = *g.threads;
    if (grid.q) c.q = *grid.q;
    if (grid.count) c.count = *grid.count;
    if (grid.alpha0) {
        c.alpha0 = *grid.alpha0;
        c.alpha_policy = AlphaPolicy::fixed;
    }
    if (grid.k0) c.k0 = *grid.k0;
    if (grid.tau) c.tau = *grid.tau;
    validate(c);
    return c;
}

void add_grid_flags(CLI::App* cmd, GridFlags& grid) {
    cmd->add_option("--q", grid.q, "grid ratio in (0, 1)");
    cmd->add_option("--count", grid.count, "number of grid points");
    cmd->add_option("--alpha0", grid.alpha0, "first grid point (default ||K||^2)");
}

int run_guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const PathSolveError& e) {
        std::cerr << "numerical failure: " << e.what() << " (alpha=" << format_double(e.alpha()) << ")\n";
        return kNumerical;
    } catch (const NonConvergenceError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const BracketError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << '\n';
        return kNumerical;
    }
}

int report_violations(const std::vector<Violation>& violations) {
    for (const auto& v : violations)
        std::cerr << "violation: " << v.inequality << " at alpha=" << format_double(v.alpha)
                  << " lhs=" << format_double(v.lhs) << " rhs=" << format_double(v.rhs) << '\n';
    return violations.empty() ? kOk : kNumerical;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tikhonov regularization with heuristic parameter choice"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalFlags g;
    app.add_option("--config", g.config_file, "JSON configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "noise seed (u64)");
    app.add_option("--out", g.out, "output directory");
    app.add_option("--threads", g.threads, "worker threads for sweeps");
    app.add_option("--set", g.sets, "override a config field, key=value (repeatable)");

    std::function<int()> action;

    for (int id = 1; id <= 4; ++id) {
        auto* cmd = app.add_subcommand("experiment" + std::to_string(id), "reproduce experiment " + std::to_string(id));
        cmd->callback([&, id] {
            action = [&, id] {
                const ExperimentConfig c = build_config(default_config(id), g);
                std::cout << "experiment" << id << ": writing to " << c.out << '\n';
                switch (id) {
                case 1: {
                    const auto r = run_experiment1(c);
                    write_experiment1(c, r);
                    std::cout << "violations: " << r.violations.size() << '\n';
                    return report_violations(r.violations);
                }
                case 2:
                case 3: {
                    const auto r = run_sweep(c, id == 2 ? Rule::hanke_raus : Rule::quasi_optimality);
                    write_sweep(c, r);
                    for (const auto& row : r.rows)
                        std::cout << "delta=" << format_double(row.delta)
                                  << " alpha=" << format_double(row.rule.alpha_selected)
                                  << " error=" << format_double(row.rule_error)
                                  << " oracle=" << format_double(row.oracle_error) << '\n';
                    return kOk;
                }
                default: {
                    const auto r = run_experiment4(c);
                    write_experiment4(c, r);
                    for (const auto& row : r.rows)
                        std::cout << to_string(row.rule) << " alpha=" << format_double(row.alpha)
                                  << " bregman=" << format_double(row.bregman_error)
                                  << " norm=" << format_double(row.norm_error) << '\n';
                    return kOk;
                }
                }
            };
        });
    }

    std::optional<std::string> problem_type;
    std::optional<double> synth_delta;
    auto* synth = app.add_subcommand("synthesize", "generate a test problem and save it to --out");
    synth->add_option("--problem", problem_type, "deconvolution or blur");
    synth->add_option("--delta", synth_delta, "noise level");
    synth->callback([&] {
        action = [&] {
            // Blur defaults (delta = 0.1) apply when --problem blur is given.
            ExperimentConfig base = default_config(0);
            if (problem_type == "blur") {
                base = default_config(4);
                base.experiment = 0;
            } else if (problem_type && *problem_type != "deconvolution") {
                throw ConfigError("--problem must be 'deconvolution' or 'blur'");
            }
            ExperimentConfig c = build_config(base, g);
            if (synth_delta) c.delta = *synth_delta;
            validate(c);
            const ProblemInstance inst = make_problem(c, c.delta, c.seed);
            save_problem(inst, c.out);
            std::cout << "saved " << to_string(inst.type) << " problem to " << c.out
                      << " (epsilon_hat=" << format_double(inst.epsilon_hat) << ")\n";
            return kOk;
        };
    });

    std::string problem_dir;
    GridFlags path_grid;
    auto* solve = app.add_subcommand("solve-path", "solve along a geometric alpha grid for a saved problem");
    solve->add_option("problem_dir", problem_dir, "problem directory")->required();
    add_grid_flags(solve, path_grid);
    solve->callback([&] {
        action = [&] {
            const ExperimentConfig c = build_config(default_config(0), g, path_grid);
            const ProblemInstance inst = load_problem(problem_dir);
            const auto req = solve_problem_path(c, inst, inst.y_delta);
            const std::filesystem::path out = c.out;
            path_table(req.path).write(out / "path.csv");
            Curve residual, phi;
            for (const auto& s : req.path.solutions) {
                residual.emplace_back(s.alpha, s.residual_norm);
                phi.emplace_back(s.alpha, s.residual_norm * s.residual_norm / s.alpha);
            }
            write_dat(out / "residual.dat", residual);
            write_dat(out / "phi.dat", phi);
            std::cout << "solved " << req.path.size() << " points, alpha0=" << format_double(req.grid.alpha0)
                      << " q=" << format_double(req.grid.q) << '\n';
            return kOk;
        };
    });

    std::string rule_name;
    GridFlags select_grid;
    auto* select = app.add_subcommand("select", "choose alpha on a saved problem and print the selection as CSV");
    select->add_option("problem_dir", problem_dir, "problem directory")->required();
    select->add_option("--rule", rule_name,
                       "hanke_raus | quasi_optimality | discrepancy | oracle_bregman | oracle_norm")
        ->required();
    add_grid_flags(select, select_grid);
    select->add_option("--k0", select_grid.k0, "first index for quasi-optimality");
    select->add_option("--tau", select_grid.tau, "discrepancy factor >= 1");
    select->callback([&] {
        action = [&] {
            const auto rule = parse_rule(rule_name);
            if (!rule) {
                std::cerr << "error: unknown rule '" << rule_name << "'\n\n" << select->help();
                return kUsage;
            }
            const ExperimentConfig c = build_config(default_config(0), g, select_grid);
            const ProblemInstance inst = load_problem(problem_dir);
            const auto outcome = select_on_problem(c, inst, *rule);
            std::vector<std::string> header = {"q", "count", "alpha0"};
            std::vector<std::string> cells = {format_double(outcome.grid.q), std::to_string(c.count),
                                              format_double(outcome.grid.alpha0)};
            for (const auto& h : selection_header()) header.push_back(h);
            for (const auto& v : selection_cells(outcome.selection)) cells.push_back(v);
            CsvTable table(header);
            table.add_row(cells);
            std::cout << table.str();
            if (g.out) write_dat(std::filesystem::path(c.out) / (rule_name + "_diagnostics.dat"),
                                 diagnostics_curve(outcome.selection));
            return kOk;
        };
    });

    GridFlags report_grid;
    auto* report = app.add_subcommand("report", "error estimates and their violations for a saved problem");
    report->add_option("problem_dir", problem_dir, "problem directory")->required();
    add_grid_flags(report, report_grid);
    report->callback([&] {
        action = [&] {
            const ExperimentConfig c = build_config(default_config(0), g, report_grid);
            const ProblemInstance inst = load_problem(problem_dir);
            const auto outcome = report_on_problem(c, inst);
            const std::filesystem::path out = c.out;
            error_report_table(outcome.report).write(out / "error_report.csv");
            violations_table(outcome.violations).write(out / "violations.csv");
            std::cout << "rows: " << outcome.report.rows.size() << " violations: " << outcome.violations.size()
                      << '\n';
            return report_violations(outcome.violations);
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }
    if (!action) {
        std::cerr << app.help();
        return kUsage;
    }
    return run_guarded(action);
}
