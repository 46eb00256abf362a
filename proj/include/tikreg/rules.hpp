#pragma once

// Parameter choice rules evaluated on a regularization path:
//   hanke_raus        argmin phi(alpha) = ||K x_alpha^d - y^d||^2 / alpha over alpha <= ||K||^2
//   quasi_optimality  argmin_k>=k0 mu_k = D(x_k, x_{k-1}) between consecutive grid points
//   discrepancy       ||K x_alpha^d - y^d|| = tau delta, by bisection in log alpha
//   oracle_best       smallest Bregman or norm error against a known truth
// plus the auto-regularization ratio comparing noisy and exact mu sequences.
//
// Ties always resolve toward the larger alpha.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tikreg/bregman.hpp"
#include "tikreg/linops.hpp"
#include "tikreg/penalty.hpp"
#include "tikreg/solver.hpp"

namespace tikreg {

enum class Rule { hanke_raus, quasi_optimality, discrepancy, oracle_bregman, oracle_norm };

inline const char* to_string(Rule rule) {
    switch (rule) {
    case Rule::hanke_raus: return "hanke_raus";
    case Rule::quasi_optimality: return "quasi_optimality";
    case Rule::discrepancy: return "discrepancy";
    case Rule::oracle_bregman: return "oracle_bregman";
    case Rule::oracle_norm: return "oracle_norm";
    }
    return "unknown";
}

inline std::optional<Rule> parse_rule(std::string_view name) {
    for (Rule r : {Rule::hanke_raus, Rule::quasi_optimality, Rule::discrepancy, Rule::oracle_bregman,
                   Rule::oracle_norm})
        if (name == to_string(r)) return r;
    return std::nullopt;
}

struct DiagnosticPoint {
    /// alpha, or the grid index k for the quasi-optimality sequence.
    double abscissa;
    double value;
};

struct RuleSelection {
    Rule rule = Rule::hanke_raus;
    double alpha_selected = 0.0;
    /// Index into the path (or into the bisection sequence for discrepancy).
    std::size_t index = 0;
    /// Criterion value at the selected index.
    double criterion = 0.0;
    std::vector<DiagnosticPoint> diagnostics;
    /// Residual at the selected alpha; NaN where the rule does not monitor it.
    double delta_star = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::string> warnings;
};

namespace detail {

// First index attaining the minimum: with a decreasing grid this is the larger alpha.
inline std::size_t first_argmin(const std::vector<double>& values) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < values.size(); ++k)
        if (values[k] < values[best]) best = k;
    return best;
}

} // namespace detail

inline constexpr double kDeltaStarWarningRatio = 1e-3;

inline RuleSelection hanke_raus(const RegularizationPath& path, double K_norm) {
    if (path.size() == 0) throw std::invalid_argument("hanke_raus: empty path");
    const double upper = K_norm * K_norm * (1.0 + 1e-12);
    RuleSelection sel;
    sel.rule = Rule::hanke_raus;
    std::vector<std::size_t> admissible;
    std::vector<double> phi;
    double max_residual = 0.0;
    for (std::size_t k = 0; k < path.size(); ++k) {
        max_residual = std::max(max_residual, path.solutions[k].residual_norm);
        if (path.alphas[k] > upper) continue;
        const double r = path.solutions[k].residual_norm;
        admissible.push_back(k);
        phi.push_back(r * r / path.alphas[k]);
        sel.diagnostics.push_back({path.alphas[k], phi.back()});
    }
    if (admissible.empty()) throw std::invalid_argument("hanke_raus: every grid point exceeds ||K||^2");
    const std::size_t best = detail::first_argmin(phi);
    sel.index = admissible[best];
    sel.alpha_selected = path.alphas[sel.index];
    sel.criterion = phi[best];
    sel.delta_star = path.solutions[sel.index].residual_norm;
    if (sel.delta_star < kDeltaStarWarningRatio * max_residual)
        sel.warnings.push_back("delta_star " + std::to_string(sel.delta_star) +
                               " is below 1e-3 of the largest path residual; selection may under-regularize");
    if (admissible.size() < path.size())
        sel.warnings.push_back(std::to_string(path.size() - admissible.size()) +
                               " grid points above ||K||^2 were excluded");
    return sel;
}

/// mu_k = D_{xi_{k-1}}(x_k, x_{k-1}) for k = 1..size-1 with the residual-based
/// subgradient at the larger alpha. Entry 0 is unused and NaN.
inline std::vector<double> quasi_optimality_sequence(const RegularizationPath& path) {
    std::vector<double> mu(path.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 1; k < path.size(); ++k) {
        const auto& prev = path.solutions[k - 1];
        const Vector xi = canonical_xi(path.op, path.data, path.alphas[k - 1], prev.x);
        mu[k] = bregman_divergence(path.penalty, path.solutions[k].x, prev.x, xi);
    }
    return mu;
}

inline RuleSelection quasi_optimality(const RegularizationPath& path, std::size_t k0 = 1) {
    if (k0 < 1) throw std::invalid_argument("quasi_optimality: k0 must be >= 1");
    if (path.size() < k0 + 2)
        throw std::invalid_argument("quasi_optimality: path needs at least k0 + 2 = " + std::to_string(k0 + 2) +
                                    " points, has " + std::to_string(path.size()));
    const std::vector<double> mu = quasi_optimality_sequence(path);
    RuleSelection sel;
    sel.rule = Rule::quasi_optimality;
    for (std::size_t k = 1; k < path.size(); ++k) sel.diagnostics.push_back({static_cast<double>(k), mu[k]});

    // mu_k is zero within rounding and solver inexactness when below this.
    auto zero_level = [&](std::size_t k) {
        const auto& a = path.solutions[k];
        const auto& b = path.solutions[k - 1];
        return 1e-12 * (1.0 + std::abs(a.penalty_value) + std::abs(b.penalty_value)) +
               kGapInflation * b.optimality_gap * (a.x - b.x).norm();
    };
    std::optional<std::size_t> degenerate;
    std::size_t best = k0;
    for (std::size_t k = k0; k < path.size(); ++k) {
        if (!degenerate && mu[k] <= zero_level(k)) degenerate = k;
        if (mu[k] < mu[best]) best = k;
    }
    if (degenerate) {
        best = *degenerate;
        sel.warnings.push_back("minimal mu_k vanishes (k=" + std::to_string(best) +
                               "); the Bregman distance is degenerate for this penalty");
    }
    sel.index = best;
    sel.alpha_selected = path.alphas[best];
    sel.criterion = mu[best];
    sel.delta_star = path.solutions[best].residual_norm;
    return sel;
}

enum class OracleMetric { bregman, norm };

inline RuleSelection oracle_best(const RegularizationPath& path, const Vector& x_dagger, const Vector& xi_dagger,
                                 OracleMetric metric) {
    if (path.size() == 0) throw std::invalid_argument("oracle_best: empty path");
    RuleSelection sel;
    sel.rule = metric == OracleMetric::bregman ? Rule::oracle_bregman : Rule::oracle_norm;
    std::vector<double> errors;
    errors.reserve(path.size());
    for (std::size_t k = 0; k < path.size(); ++k) {
        const Vector& x = path.solutions[k].x;
        errors.push_back(metric == OracleMetric::bregman ? bregman_divergence(path.penalty, x, x_dagger, xi_dagger)
                                                         : (x - x_dagger).norm());
        sel.diagnostics.push_back({path.alphas[k], errors.back()});
    }
    sel.index = detail::first_argmin(errors);
    sel.alpha_selected = path.alphas[sel.index];
    sel.criterion = errors[sel.index];
    sel.delta_star = path.solutions[sel.index].residual_norm;
    return sel;
}

class BracketError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct DiscrepancyResult {
    RuleSelection selection;
    TikhonovSolution solution;
};

/// Bisection on log alpha for ||K x_alpha^d - y^d|| = tau delta, using the
/// monotonicity of the residual in alpha. Diagnostics hold (alpha, residual)
/// in evaluation order: both bracket ends first, then the midpoints.
inline DiscrepancyResult discrepancy_principle(const LinearOperator& K, const Vector& y_delta, const Penalty& R,
                                               double delta, double tau, double alpha_lo, double alpha_hi,
                                               SolverOptions opts = {}, double rel_tol = 1e-8,
                                               int max_bisections = 200) {
    if (!(delta > 0.0)) throw std::invalid_argument("discrepancy_principle: delta must be positive");
    if (!(tau >= 1.0)) throw std::invalid_argument("discrepancy_principle: tau must be >= 1");
    if (!(alpha_lo > 0.0 && alpha_hi > alpha_lo))
        throw std::invalid_argument("discrepancy_principle: need 0 < alpha_lo < alpha_hi");
    if (!opts.lipschitz) opts.lipschitz = lipschitz_constant(K);
    const double target = tau * delta;

    RuleSelection sel;
    sel.rule = Rule::discrepancy;
    auto solve = [&](double alpha, const Vector* start) {
        TikhonovSolution s = solve_tikhonov(K, y_delta, alpha, R, opts, start);
        if (!s.converged)
            sel.warnings.push_back("solver did not converge at alpha=" + std::to_string(alpha));
        sel.diagnostics.push_back({alpha, s.residual_norm});
        return s;
    };

    TikhonovSolution hi = solve(alpha_hi, nullptr);
    TikhonovSolution lo = solve(alpha_lo, &hi.x);
    if (lo.residual_norm > target)
        throw BracketError("discrepancy_principle: residual " + std::to_string(lo.residual_norm) +
                           " at alpha_lo exceeds tau*delta = " + std::to_string(target) + "; decrease alpha_lo");
    if (hi.residual_norm < target)
        throw BracketError("discrepancy_principle: residual " + std::to_string(hi.residual_norm) +
                           " at alpha_hi stays below tau*delta = " + std::to_string(target) +
                           "; increase alpha_hi or the level is unreachable");

    auto finish = [&](TikhonovSolution s) {
        sel.alpha_selected = s.alpha;
        sel.criterion = s.residual_norm;
        sel.delta_star = s.residual_norm;
        for (std::size_t k = sel.diagnostics.size(); k-- > 0;)
            if (sel.diagnostics[k].abscissa == s.alpha) {
                sel.index = k;
                break;
            }
        return DiscrepancyResult{sel, std::move(s)};
    };

    for (const TikhonovSolution* s : {&hi, &lo})
        if (std::abs(s->residual_norm - target) <= rel_tol * target) return finish(*s);

    double log_lo = std::log(alpha_lo);
    double log_hi = std::log(alpha_hi);
    for (int it = 0; it < max_bisections; ++it) {
        const double alpha = std::exp(0.5 * (log_lo + log_hi));
        TikhonovSolution mid = solve(alpha, &hi.x);
        if (std::abs(mid.residual_norm - target) <= rel_tol * target) return finish(std::move(mid));
        if (mid.residual_norm > target) {
            log_hi = std::log(alpha);
            hi = std::move(mid);
        } else {
            log_lo = std::log(alpha);
            lo = std::move(mid);
        }
        if (log_hi - log_lo <= 1e-13 * std::max(1.0, std::abs(log_lo))) break;
    }
    sel.warnings.push_back("bisection bracket collapsed before reaching the relative tolerance");
    const bool lo_closer = std::abs(lo.residual_norm - target) <= std::abs(hi.residual_norm - target);
    return finish(lo_closer ? std::move(lo) : std::move(hi));
}

/// min_k |mu_k - mu_k^+| / D(x_k^d, x_k): the largest r for which the noisy
/// data lie in the auto-regularization set D_r, restricted to the grid.
/// 0/0 terms are skipped; returns +infinity when every term is skipped.
inline double autoreg_ratio(const RegularizationPath& path_noisy, const RegularizationPath& path_exact,
                            const Penalty& R) {
    if (!same_grid(path_noisy, path_exact))
        throw std::invalid_argument("autoreg_ratio: noisy and exact paths use different alpha grids");
    auto mu = [&](const RegularizationPath& path, std::size_t k) {
        const auto& prev = path.solutions[k - 1];
        const Vector xi = canonical_xi(path.op, path.data, path.alphas[k - 1], prev.x);
        return bregman_divergence(R, path.solutions[k].x, prev.x, xi);
    };
    double ratio = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < path_noisy.size(); ++k) {
        const auto& exact = path_exact.solutions[k];
        const Vector xi_exact = canonical_xi(path_exact.op, path_exact.data, path_exact.alphas[k], exact.x);
        const double denom = std::max(0.0, bregman_divergence(R, path_noisy.solutions[k].x, exact.x, xi_exact));
        const double numer = std::abs(mu(path_noisy, k) - mu(path_exact, k));
        if (denom == 0.0) continue;
        ratio = std::min(ratio, numer / denom);
    }
    return ratio;
}

} // namespace tikreg
