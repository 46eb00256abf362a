#pragma once

// Plain-text and binary output: locale-independent decimal formatting with
// 17 significant digits, two-column .dat curves, CSV tables, and a directory
// format for ProblemInstance (JSON manifest + raw little-endian float64).

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tikreg/bregman.hpp"
#include "tikreg/problems.hpp"
#include "tikreg/rules.hpp"

namespace tikreg {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline void write_text(const std::filesystem::path& file, const std::string& content) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + file.string() + " for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed for " + file.string());
}

inline std::string read_text(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw FormatError("cannot open " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

using Curve = std::vector<std::pair<double, double>>;

inline std::string dat_string(const Curve& curve) {
    std::string s;
    for (const auto& [x, y] : curve) s += format_double(x) + ' ' + format_double(y) + '\n';
    return s;
}

inline void write_dat(const std::filesystem::path& file, const Curve& curve) { write_text(file, dat_string(curve)); }

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_row(const std::vector<std::string>& cells) {
        if (cells.size() != header_.size()) throw std::invalid_argument("CsvTable: row width does not match header");
        rows_.push_back(cells);
    }
    void add_numeric_row(const std::vector<double>& values) {
        std::vector<std::string> cells;
        cells.reserve(values.size());
        for (double v : values) cells.push_back(format_double(v));
        add_row(cells);
    }

    std::string str() const {
        std::string s = join(header_);
        for (const auto& r : rows_) s += join(r);
        return s;
    }
    void write(const std::filesystem::path& file) const { write_text(file, str()); }

    static std::string escape(const std::string& cell) {
        if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
        std::string out = "\"";
        for (char c : cell) {
            if (c == '"') out += '"';
            out += c;
        }
        return out + '"';
    }

private:
    static std::string join(const std::vector<std::string>& cells) {
        std::string s;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) s += ',';
            s += escape(cells[i]);
        }
        return s + '\n';
    }

    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

inline CsvTable error_report_table(const ErrorReport& report) {
    CsvTable t({"alpha", "phi", "approx_error", "data_error", "total_error", "approx_bound", "data_bound",
                "total_bound", "approx_discrepancy", "data_discrepancy", "residual", "approx_discrepancy_bound",
                "data_discrepancy_bound", "residual_bound", "splitting_defect", "splitting_bound",
                "two_param_distance", "two_param_bound", "two_param_discrepancy", "two_param_discrepancy_bound",
                "gap_exact", "gap_noisy"});
    for (const auto& r : report.rows)
        t.add_numeric_row({r.alpha, r.phi, r.approx_error, r.data_error, r.total_error, r.approx_bound, r.data_bound,
                           r.total_bound, r.approx_discrepancy, r.data_discrepancy, r.residual,
                           r.approx_discrepancy_bound, r.data_discrepancy_bound, r.residual_bound,
                           r.splitting_defect, r.splitting_bound, r.two_param_distance, r.two_param_bound,
                           r.two_param_discrepancy, r.two_param_discrepancy_bound, r.gap_exact, r.gap_noisy});
    return t;
}

inline CsvTable violations_table(const std::vector<Violation>& violations) {
    CsvTable t({"inequality", "alpha", "lhs", "rhs"});
    for (const auto& v : violations)
        t.add_row({v.inequality, format_double(v.alpha), format_double(v.lhs), format_double(v.rhs)});
    return t;
}

inline std::vector<std::string> selection_header() {
    return {"rule", "alpha", "index", "criterion", "delta_star", "warnings"};
}

inline std::vector<std::string> selection_cells(const RuleSelection& s) {
    std::string warnings;
    for (std::size_t i = 0; i < s.warnings.size(); ++i) warnings += (i ? "; " : "") + s.warnings[i];
    return {to_string(s.rule), format_double(s.alpha_selected), std::to_string(s.index), format_double(s.criterion),
            format_double(s.delta_star), warnings};
}

inline Curve diagnostics_curve(const RuleSelection& s) {
    Curve c;
    c.reserve(s.diagnostics.size());
    for (const auto& d : s.diagnostics) c.emplace_back(d.abscissa, d.value);
    return c;
}

// ---- raw float64 vectors -------------------------------------------------

inline void write_f64(const std::filesystem::path& file, const Vector& v) {
    std::string bytes(static_cast<std::size_t>(v.size()) * 8, '\0');
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        auto bits = std::bit_cast<std::uint64_t>(v[i]);
        for (int b = 0; b < 8; ++b) bytes[static_cast<std::size_t>(i) * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    }
    write_text(file, bytes);
}

inline Vector read_f64(const std::filesystem::path& file, std::size_t expected) {
    const std::string bytes = read_text(file);
    if (bytes.size() != expected * 8)
        throw FormatError(file.string() + ": expected " + std::to_string(expected) + " float64 values, found " +
                          std::to_string(bytes.size()) + " bytes");
    Vector v(static_cast<Eigen::Index>(expected));
    for (std::size_t i = 0; i < expected; ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b)
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i * 8 + b])) << (8 * b);
        v[static_cast<Eigen::Index>(i)] = std::bit_cast<double>(bits);
    }
    return v;
}

// ---- ProblemInstance directories ------------------------------------------

inline constexpr const char* kManifestName = "manifest.json";

inline nlohmann::ordered_json number_or_null(double v) {
    return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

inline void save_problem(const ProblemInstance& inst, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::ordered_json m;
    m["format"] = "tikreg-problem";
    m["version"] = 1;
    m["type"] = to_string(inst.type);
    m["domain_dim"] = inst.K.domain_dim();
    m["range_dim"] = inst.K.range_dim();
    m["params"] = inst.params;
    m["seed"] = inst.seed;
    m["delta"] = inst.delta;
    m["epsilon_hat"] = number_or_null(inst.epsilon_hat);
    m["notes"] = inst.notes;
    nlohmann::ordered_json files;
    auto put = [&](const char* name, const Vector& v) {
        if (v.size() == 0) return;
        const std::string file = std::string(name) + ".f64";
        write_f64(dir / file, v);
        files[name] = file;
    };
    put("x_dagger", inst.x_dagger);
    put("xi_dagger", inst.xi_dagger);
    put("w", inst.w);
    put("y_dagger", inst.y_dagger);
    put("y_delta", inst.y_delta);
    m["files"] = files;
    write_text(dir / kManifestName, m.dump(2) + "\n");
}

inline ProblemInstance load_problem(const std::filesystem::path& dir) {
    nlohmann::json m;
    try {
        m = nlohmann::json::parse(read_text(dir / kManifestName));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest " + (dir / kManifestName).string() + ": " + e.what());
    }
    try {
        if (m.at("format").get<std::string>() != "tikreg-problem") throw FormatError("manifest: unknown format");
        const auto type = m.at("type").get<std::string>();
        const auto params = m.at("params").get<std::map<std::string, double>>();
        auto param = [&](const char* key) {
            const auto it = params.find(key);
            if (it == params.end()) throw FormatError(std::string("manifest: params.") + key + " missing");
            return it->second;
        };
        auto build = [&]() -> ProblemInstance {
            if (type == "deconvolution")
                return {ProblemType::deconvolution,
                        deconvolution_operator(static_cast<std::size_t>(param("n")), param("width")),
                        Penalty::lp_power(param("p"))};
            if (type == "blur")
                return {ProblemType::blur,
                        make_blur(static_cast<std::size_t>(param("N")), static_cast<std::size_t>(param("band")),
                                  param("sigma")),
                        Penalty::elastic_net(param("eta"))};
            throw FormatError("manifest: unknown problem type '" + type + "'");
        };
        ProblemInstance inst = build();
        if (m.at("domain_dim").get<std::size_t>() != inst.K.domain_dim() ||
            m.at("range_dim").get<std::size_t>() != inst.K.range_dim())
            throw FormatError("manifest: dimensions do not match the operator parameters");
        inst.params = params;
        inst.seed = m.at("seed").get<std::uint64_t>();
        inst.delta = m.at("delta").get<double>();
        if (!m.at("epsilon_hat").is_null()) inst.epsilon_hat = m.at("epsilon_hat").get<double>();
        inst.notes = m.at("notes").get<std::vector<std::string>>();
        const auto& files = m.at("files");
        auto get = [&](const char* name, std::size_t dim, bool required) -> Vector {
            if (!files.contains(name)) {
                if (required) throw FormatError(std::string("manifest: files.") + name + " missing");
                return Vector();
            }
            return read_f64(dir / files.at(name).get<std::string>(), dim);
        };
        inst.x_dagger = get("x_dagger", inst.K.domain_dim(), true);
        inst.xi_dagger = get("xi_dagger", inst.K.domain_dim(), false);
        inst.w = get("w", inst.K.range_dim(), false);
        inst.y_dagger = get("y_dagger", inst.K.range_dim(), true);
        inst.y_delta = get("y_delta", inst.K.range_dim(), true);
        return inst;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest " + (dir / kManifestName).string() + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw FormatError("manifest " + (dir / kManifestName).string() + ": " + e.what());
    }
}

} // namespace tikreg
