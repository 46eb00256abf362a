#pragma once

// Minimization of J_alpha(x) = 1/2 ||Kx - y||^2 + alpha R(x) by proximal
// gradient descent with step 1/L, L >= ||K||^2, and warm-started paths over
// geometric alpha grids.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tikreg/linops.hpp"
#include "tikreg/penalty.hpp"

namespace tikreg {

struct SolverOptions {
    /// Converged once optimality_gap <= tol * (1 + ||K*y|| / alpha).
    double tol = 1e-8;
    int max_iter = 200000;
    /// Monotone FISTA (momentum restarted whenever the objective would rise).
    bool accelerate = true;
    /// Step is 1/lipschitz; estimated from ||K|| when absent.
    std::optional<double> lipschitz;
    int check_every = 10;
};

struct TikhonovSolution {
    Vector x;
    double alpha = 0.0;
    double residual_norm = 0.0;
    double penalty_value = 0.0;
    double objective = 0.0;
    int iterations = 0;
    double optimality_gap = 0.0;
    bool converged = false;
};

/// ||K||^2 inflated by 1 % to cover the power-iteration error.
inline double lipschitz_constant(const LinearOperator& K) {
    const double norm = operator_norm(K, 1e-8);
    return 1.01 * norm * norm;
}

inline double tikhonov_objective(const Vector& residual, double alpha, double penalty_value) {
    return 0.5 * residual.squaredNorm() + alpha * penalty_value;
}

/// dist(-K*(Kx - y)/alpha, dR(x)).
inline double optimality_gap(const LinearOperator& K, const Vector& y, double alpha, const Penalty& R,
                             const Vector& x) {
    if (!(alpha > 0.0)) throw std::invalid_argument("optimality_gap: alpha must be positive");
    const Vector v = -K.apply_adjoint(K.apply(x) - y) / alpha;
    return subdifferential_distance(R, x, v);
}

inline double gap_threshold(double tol, double adjoint_data_norm, double alpha) {
    return tol * (1.0 + adjoint_data_norm / alpha);
}

namespace detail {

inline TikhonovSolution finish(const LinearOperator& K, const Vector& y, double alpha, const Penalty& R, Vector x,
                               int iterations, double threshold) {
    TikhonovSolution s;
    const Vector residual = K.apply(x) - y;
    s.alpha = alpha;
    s.residual_norm = residual.norm();
    s.penalty_value = value(R, x);
    s.objective = tikhonov_objective(residual, alpha, s.penalty_value);
    s.iterations = iterations;
    s.optimality_gap = subdifferential_distance(R, x, -K.apply_adjoint(residual) / alpha);
    s.converged = s.optimality_gap <= threshold;
    s.x = std::move(x);
    return s;
}

} // namespace detail

inline TikhonovSolution solve_tikhonov(const LinearOperator& K, const Vector& y, double alpha, const Penalty& R,
                                       const SolverOptions& opts = {}, const Vector* start = nullptr) {
    if (!(alpha > 0.0)) throw std::invalid_argument("solve_tikhonov: alpha must be positive");
    if (static_cast<std::size_t>(y.size()) != K.range_dim())
        throw DimensionError("solve_tikhonov: data length does not match operator range");
    if (start && static_cast<std::size_t>(start->size()) != K.domain_dim())
        throw DimensionError("solve_tikhonov: start vector length does not match operator domain");

    const double L = opts.lipschitz ? *opts.lipschitz : lipschitz_constant(K);
    if (!(L > 0.0)) throw std::invalid_argument("solve_tikhonov: Lipschitz constant must be positive");
    const double step = 1.0 / L;
    const double threshold = gap_threshold(opts.tol, K.apply_adjoint(y).norm(), alpha);
    const int check_every = std::max(1, opts.check_every);

    Vector x = start ? *start : Vector::Zero(static_cast<Eigen::Index>(K.domain_dim()));
    Vector Kx = K.apply(x);
    double Jx = tikhonov_objective(Kx - y, alpha, value(R, x));
    Vector z = x;
    Vector Kz = Kx;
    double momentum = 1.0;
    // z == x: the step is plain proximal gradient, which descends in exact
    // arithmetic and is accepted even when rounding hides the decrease.
    bool plain_step = true;

    int it = 0;
    for (; it < opts.max_iter; ++it) {
        if (it % check_every == 0) {
            const double gap = subdifferential_distance(R, x, -K.apply_adjoint(Kx - y) / alpha);
            if (gap <= threshold) break;
        }
        const Vector gradient = K.apply_adjoint(Kz - y);
        Vector u = prox(R, z - step * gradient, step * alpha);
        Vector Ku = K.apply(u);
        const double Ju = tikhonov_objective(Ku - y, alpha, value(R, u));
        if (plain_step || Ju <= Jx) {
            if (opts.accelerate) {
                const double next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
                const double beta = (momentum - 1.0) / next;
                z = u + beta * (u - x);
                Kz = Ku + beta * (Ku - Kx);
                momentum = next;
            } else {
                z = u;
                Kz = Ku;
            }
            x = std::move(u);
            Kx = std::move(Ku);
            Jx = Ju;
            plain_step = !opts.accelerate;
        } else {
            z = x;
            Kz = Kx;
            momentum = 1.0;
            plain_step = true;
        }
    }
    return detail::finish(K, y, alpha, R, std::move(x), it, threshold);
}

struct RegularizationPath {
    LinearOperator op;
    Penalty penalty;
    Vector data;
    double q = 0.0;
    std::vector<double> alphas;
    std::vector<TikhonovSolution> solutions;

    std::size_t size() const noexcept { return alphas.size(); }
};

class PathSolveError : public std::runtime_error {
public:
    PathSolveError(const std::string& what, std::size_t index, double alpha)
        : std::runtime_error(what), index_(index), alpha_(alpha) {}
    std::size_t index() const noexcept { return index_; }
    double alpha() const noexcept { return alpha_; }

private:
    std::size_t index_;
    double alpha_;
};

inline std::vector<double> geometric_grid(double alpha0, double q, std::size_t count) {
    std::vector<double> alphas(count);
    for (std::size_t k = 0; k < count; ++k) alphas[k] = alpha0 * std::pow(q, static_cast<double>(k));
    return alphas;
}

/// Solutions at alpha_k = alpha0 q^k, k = 0..count-1, each warm-started from
/// its predecessor. Throws PathSolveError naming the first failing index.
inline RegularizationPath solve_path(const LinearOperator& K, const Vector& y, const Penalty& R, double alpha0,
                                     double q, std::size_t count, SolverOptions opts = {}) {
    if (!(alpha0 > 0.0)) throw std::invalid_argument("solve_path: alpha0 must be positive");
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("solve_path: q must lie in (0, 1)");
    if (count < 2) throw std::invalid_argument("solve_path: count must be >= 2");
    if (!opts.lipschitz) opts.lipschitz = lipschitz_constant(K);

    RegularizationPath path{K, R, y, q, geometric_grid(alpha0, q, count), {}};
    path.solutions.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const double alpha = path.alphas[k];
        const Vector* start = k == 0 ? nullptr : &path.solutions.back().x;
        TikhonovSolution s;
        try {
            s = solve_tikhonov(K, y, alpha, R, opts, start);
        } catch (const std::exception& e) {
            throw PathSolveError(std::string("solve_path: solve failed at index ") + std::to_string(k) + ": " +
                                     e.what(),
                                 k, alpha);
        }
        if (!s.converged)
            throw PathSolveError("solve_path: no convergence at index " + std::to_string(k) + " (alpha=" +
                                     std::to_string(alpha) + ", gap=" + std::to_string(s.optimality_gap) + ")",
                                 k, alpha);
        path.solutions.push_back(std::move(s));
    }
    return path;
}

} // namespace tikreg
