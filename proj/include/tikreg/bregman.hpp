#pragma once

// Bregman distances D_xi(x', x) = R(x') - R(x) - <xi, x' - x> and the error
// decomposition of Tikhonov minimizers into approximation, data and total
// error, together with a checker for the a priori estimates they satisfy
// under the source condition xi = K*w in dR(x_dagger):
//
//   approx       D_xi(x_a, x+)            <= ||w||^2 a / 2
//   approx_disc  ||K x_a - y+||           <= 2 ||w|| a
//   data         D_xi_a(x_a^d, x_a)       <= d^2 / (2a)
//   data_disc    ||K(x_a^d - x_a)||       <= 2 d
//   total        D_xi(x_a^d, x+)          <= (d / sqrt(a) + sqrt(a) ||w||)^2 / 2
//   residual     ||K x_a^d - y^d||        <= d + 2 a ||w||
//   two_param    D(x_qa^d, x_a^d)         <= (1-q)^2 ||K x_a^d - y^d||^2 / (2 a q)
//   two_param_dc ||K(x_qa^d - x_a^d)||    <= 2 (1-q) (d + 2 a ||w||)
//   split        |total - (approx + data)| <= 6 ||w|| d
//
// Subgradients: xi = K*w at x+, xi_a = -K*(K x_a - y+)/a at exact-data
// solutions, xi_a^d = -K*(K x_a^d - y^d)/a at noisy-data solutions.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "tikreg/linops.hpp"
#include "tikreg/penalty.hpp"
#include "tikreg/solver.hpp"

namespace tikreg {

class InvalidSubgradientError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// R(x_to) - R(x_from) - <xi, x_to - x_from> with no sign check.
inline double bregman_divergence(const Penalty& R, const Vector& x_to, const Vector& x_from, const Vector& xi) {
    if (x_to.size() != x_from.size() || xi.size() != x_from.size())
        throw DimensionError("bregman_distance: size mismatch");
    return value(R, x_to) - value(R, x_from) - xi.dot(x_to - x_from);
}

inline constexpr double kBregmanNegativeSlack = 1e-10;

/// Bregman distance for xi in dR(x_from). A value below -slack (relative to
/// the magnitudes involved) means xi is not a subgradient and is reported.
inline double bregman_distance(const Penalty& R, const Vector& x_to, const Vector& x_from, const Vector& xi,
                               double slack = kBregmanNegativeSlack) {
    const double r_to = value(R, x_to);
    const double r_from = value(R, x_from);
    const double linear = xi.dot(x_to - x_from);
    const double d = r_to - r_from - linear;
    const double scale = 1.0 + std::abs(r_to) + std::abs(r_from) + std::abs(linear);
    if (d < -slack * scale)
        throw InvalidSubgradientError("bregman_distance: negative value " + std::to_string(d) +
                                      "; xi is not a subgradient at x_from");
    return d;
}

/// -K*(Kx - y) / alpha; a subgradient of R at x when x minimizes J_alpha.
inline Vector canonical_xi(const LinearOperator& K, const Vector& y, double alpha, const Vector& x) {
    if (!(alpha > 0.0)) throw std::invalid_argument("canonical_xi: alpha must be positive");
    return -K.apply_adjoint(K.apply(x) - y) / alpha;
}

/// |D_xi(x', x+) - D_zeta(x', x) - D_xi(x, x+) - <xi - zeta, x - x'>|.
inline double splitting_identity_check(const Penalty& R, const Vector& x_dagger, const Vector& xi_dagger,
                                       const Vector& x_mid, const Vector& xi_mid, const Vector& x_to) {
    const double lhs = bregman_divergence(R, x_to, x_dagger, xi_dagger);
    const double rhs = bregman_divergence(R, x_to, x_mid, xi_mid) + bregman_divergence(R, x_mid, x_dagger, xi_dagger) +
                       (xi_dagger - xi_mid).dot(x_mid - x_to);
    return std::abs(lhs - rhs);
}

struct ErrorRow {
    double alpha = 0.0;
    double phi = 0.0;

    double approx_error = 0.0;
    double data_error = 0.0;
    double total_error = 0.0;
    double approx_bound = 0.0;
    double data_bound = 0.0;
    double total_bound = 0.0;

    double approx_discrepancy = 0.0;
    double data_discrepancy = 0.0;
    double residual = 0.0;
    double approx_discrepancy_bound = 0.0;
    double data_discrepancy_bound = 0.0;
    double residual_bound = 0.0;

    /// total - (approx + data), signed.
    double splitting_defect = 0.0;
    double splitting_bound = 0.0;

    // Against the next grid point q*alpha; NaN on the last row.
    double two_param_distance = std::numeric_limits<double>::quiet_NaN();
    double two_param_bound = std::numeric_limits<double>::quiet_NaN();
    double two_param_discrepancy = std::numeric_limits<double>::quiet_NaN();
    double two_param_discrepancy_bound = std::numeric_limits<double>::quiet_NaN();

    // Solver inexactness and distances used for slack inflation.
    double gap_exact = 0.0;
    double gap_noisy = 0.0;
    double gap_next = std::numeric_limits<double>::quiet_NaN();
    double dist_exact_truth = 0.0;
    double dist_noisy_exact = 0.0;
    double dist_noisy_truth = 0.0;
    double dist_next = std::numeric_limits<double>::quiet_NaN();
};

struct ErrorReport {
    double delta = 0.0;
    double w_norm = 0.0;
    double q = 0.0;
    std::vector<ErrorRow> rows;
};

inline bool same_grid(const RegularizationPath& a, const RegularizationPath& b) {
    if (a.alphas.size() != b.alphas.size()) return false;
    for (std::size_t k = 0; k < a.alphas.size(); ++k)
        if (std::abs(a.alphas[k] - b.alphas[k]) > 1e-12 * std::abs(a.alphas[k])) return false;
    return true;
}

inline ErrorReport build_error_report(const LinearOperator& K, const Penalty& R, const RegularizationPath& path_noisy,
                                      const RegularizationPath& path_exact, const Vector& x_dagger, const Vector& w,
                                      double delta) {
    if (!same_grid(path_noisy, path_exact))
        throw std::invalid_argument("build_error_report: noisy and exact paths use different alpha grids");
    ErrorReport report;
    report.delta = delta;
    report.w_norm = w.norm();
    report.q = path_noisy.q;
    const double wn = report.w_norm;
    const Vector xi = K.apply_adjoint(w);
    const Vector& y_dagger = path_exact.data;
    const Vector& y_delta = path_noisy.data;

    const std::size_t count = path_noisy.size();
    report.rows.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const auto& noisy = path_noisy.solutions[k];
        const auto& exact = path_exact.solutions[k];
        const double a = path_noisy.alphas[k];
        ErrorRow row;
        row.alpha = a;
        row.phi = noisy.residual_norm * noisy.residual_norm / a;

        const Vector xi_exact = canonical_xi(K, y_dagger, a, exact.x);
        row.approx_error = bregman_divergence(R, exact.x, x_dagger, xi);
        row.data_error = bregman_divergence(R, noisy.x, exact.x, xi_exact);
        row.total_error = bregman_divergence(R, noisy.x, x_dagger, xi);
        row.approx_bound = 0.5 * wn * wn * a;
        row.data_bound = delta * delta / (2.0 * a);
        const double root = delta / std::sqrt(a) + std::sqrt(a) * wn;
        row.total_bound = 0.5 * root * root;

        row.approx_discrepancy = (K.apply(exact.x) - y_dagger).norm();
        row.data_discrepancy = K.apply(noisy.x - exact.x).norm();
        row.residual = (K.apply(noisy.x) - y_delta).norm();
        row.approx_discrepancy_bound = 2.0 * wn * a;
        row.data_discrepancy_bound = 2.0 * delta;
        row.residual_bound = delta + 2.0 * a * wn;

        row.splitting_defect = row.total_error - (row.approx_error + row.data_error);
        row.splitting_bound = 6.0 * wn * delta;

        row.gap_exact = exact.optimality_gap;
        row.gap_noisy = noisy.optimality_gap;
        row.dist_exact_truth = (exact.x - x_dagger).norm();
        row.dist_noisy_exact = (noisy.x - exact.x).norm();
        row.dist_noisy_truth = (noisy.x - x_dagger).norm();

        if (k + 1 < count) {
            const auto& next = path_noisy.solutions[k + 1];
            const double q = report.q;
            const Vector xi_noisy = canonical_xi(K, y_delta, a, noisy.x);
            row.two_param_distance = bregman_divergence(R, next.x, noisy.x, xi_noisy);
            row.two_param_bound = (1.0 - q) * (1.0 - q) * row.residual * row.residual / (2.0 * a * q);
            row.two_param_discrepancy = K.apply(next.x - noisy.x).norm();
            row.two_param_discrepancy_bound = 2.0 * (1.0 - q) * (delta + 2.0 * a * wn);
            row.gap_next = next.optimality_gap;
            row.dist_next = (next.x - noisy.x).norm();
        }
        report.rows.push_back(row);
    }
    return report;
}

struct Violation {
    std::string inequality;
    double alpha;
    double lhs;
    double rhs;
};

inline constexpr double kGapInflation = 10.0;

/// Lists every estimate that fails by more than `slack` relative plus the
/// allowance for inexact minimizers: c * gap * ||x diff|| for Bregman
/// distances and c * sqrt(alpha * gap * ||x diff||) for discrepancies.
inline std::vector<Violation> check_estimates(const ErrorReport& report, double slack) {
    if (!(slack >= 0.0)) throw std::invalid_argument("check_estimates: slack must be nonnegative");
    std::vector<Violation> out;
    constexpr double c = kGapInflation;
    constexpr double rounding = 64.0 * std::numeric_limits<double>::epsilon();
    auto check = [&](const char* name, double alpha, double lhs, double rhs, double inflation) {
        const double allowed = rhs + slack * std::abs(rhs) + inflation + rounding * (1.0 + std::abs(lhs));
        if (!(lhs <= allowed)) out.push_back({name, alpha, lhs, rhs});
    };
    const double delta = report.delta;
    const double wn = report.w_norm;
    for (const auto& r : report.rows) {
        const double a = r.alpha;
        const double infl_approx_disc = c * std::sqrt(a * r.gap_exact * r.dist_exact_truth);
        const double infl_data_disc = c * std::sqrt(a * (r.gap_exact + r.gap_noisy) * r.dist_noisy_exact);
        const double infl_residual = c * std::sqrt(a * r.gap_noisy * r.dist_noisy_truth);

        check("approx: approx_error <= |w|^2 alpha/2", a, r.approx_error, r.approx_bound,
              c * r.gap_exact * r.dist_exact_truth);
        check("approx_discrepancy: |K x_alpha - y| <= 2 |w| alpha", a, r.approx_discrepancy, r.approx_discrepancy_bound,
              infl_approx_disc);
        check("data: data_error <= delta^2/(2 alpha)", a, r.data_error, r.data_bound,
              c * (r.gap_exact + r.gap_noisy) * r.dist_noisy_exact);
        check("data_discrepancy: |K(x_alpha^delta - x_alpha)| <= 2 delta", a, r.data_discrepancy, r.data_discrepancy_bound,
              infl_data_disc);
        check("total: total_error <= (delta/sqrt(alpha) + sqrt(alpha) |w|)^2/2", a, r.total_error, r.total_bound,
              c * r.gap_noisy * r.dist_noisy_truth);
        check("residual: residual <= delta + 2 alpha |w|", a, r.residual, r.residual_bound, infl_residual);
        // |defect| <= (|w| + |K x_a - y|/a) |K(x_a^d - x_a)|, both factors bounded by the discrepancy estimates.
        const double split_infl = 3.0 * wn * infl_data_disc + (infl_approx_disc / a) * (2.0 * delta + infl_data_disc);
        check("split: |total - (approx + data)| <= 6 |w| delta", a, std::abs(r.splitting_defect), r.splitting_bound,
              split_infl);
        if (!std::isnan(r.two_param_distance)) {
            const double gaps = r.gap_noisy + r.gap_next;
            const double q = report.q;
            check("two_param: D(x_qalpha^delta, x_alpha^delta) <= (1-q)^2 res^2/(2 alpha q)", a, r.two_param_distance,
                  r.two_param_bound, c * gaps * r.dist_next / q);
            check("two_param_discrepancy: |K(x_qalpha^delta - x_alpha^delta)| <= 2(1-q)(delta + 2 alpha |w|)", a,
                  r.two_param_discrepancy, r.two_param_discrepancy_bound,
                  c * std::sqrt(a * gaps * r.dist_next) + 2.0 * (1.0 - q) * infl_residual);
        }
    }
    return out;
}

} // namespace tikreg
