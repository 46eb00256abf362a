#pragma once

// Convex penalties R with values, subgradients, subdifferential distances
// and componentwise proximal maps.
//
//   lp_power(p):      R(x) = sum |x_k|^p,               1 < p <= 2
//   l1:               R(x) = sum |x_k|
//   elastic_net(eta): R(x) = ||x||_1 + eta/2 ||x||_2^2
//   quadratic(eta):   R(x) = eta/2 ||x||_2^2            (elastic net without the l1 part)

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "tikreg/linops.hpp"

namespace tikreg {

enum class PenaltyKind { lp_power, l1, elastic_net, quadratic };

inline const char* to_string(PenaltyKind kind) {
    switch (kind) {
    case PenaltyKind::lp_power: return "lp_power";
    case PenaltyKind::l1: return "l1";
    case PenaltyKind::elastic_net: return "elastic_net";
    case PenaltyKind::quadratic: return "quadratic";
    }
    return "unknown";
}

inline double sign(double v) { return (v > 0.0) - (v < 0.0); }

class Penalty {
public:
    static Penalty lp_power(double p) {
        if (!(p > 1.0 && p <= 2.0))
            throw std::invalid_argument("lp_power: exponent p must lie in (1, 2], got " + std::to_string(p));
        return Penalty(PenaltyKind::lp_power, p, 0.0);
    }
    static Penalty l1() { return Penalty(PenaltyKind::l1, 1.0, 0.0); }
    static Penalty elastic_net(double eta) {
        if (!(eta >= 0.0)) throw std::invalid_argument("elastic_net: eta must be nonnegative");
        return Penalty(PenaltyKind::elastic_net, 1.0, eta);
    }
    static Penalty quadratic(double eta = 1.0) {
        if (!(eta > 0.0)) throw std::invalid_argument("quadratic: eta must be positive");
        return Penalty(PenaltyKind::quadratic, 2.0, eta);
    }

    PenaltyKind kind() const noexcept { return kind_; }
    double p() const noexcept { return p_; }
    double eta() const noexcept { return eta_; }
    bool has_l1_part() const noexcept { return kind_ == PenaltyKind::l1 || kind_ == PenaltyKind::elastic_net; }

    /// Strictly convex kinds have unique Tikhonov minimizers for any K.
    bool strictly_convex() const noexcept {
        return kind_ == PenaltyKind::lp_power || kind_ == PenaltyKind::quadratic ||
               (kind_ == PenaltyKind::elastic_net && eta_ > 0.0);
    }

    std::string describe() const {
        switch (kind_) {
        case PenaltyKind::lp_power: return "lp_power(p=" + std::to_string(p_) + ")";
        case PenaltyKind::l1: return "l1";
        case PenaltyKind::elastic_net: return "elastic_net(eta=" + std::to_string(eta_) + ")";
        case PenaltyKind::quadratic: return "quadratic(eta=" + std::to_string(eta_) + ")";
        }
        return "unknown";
    }

    double atom(double x) const {
        const double a = std::abs(x);
        switch (kind_) {
        case PenaltyKind::lp_power: return std::pow(a, p_);
        case PenaltyKind::l1: return a;
        case PenaltyKind::elastic_net: return a + 0.5 * eta_ * x * x;
        case PenaltyKind::quadratic: return 0.5 * eta_ * x * x;
        }
        return 0.0;
    }

    /// Element of the scalar subdifferential; sign(0) = 0 for the l1 part.
    double atom_subgradient(double x) const {
        switch (kind_) {
        case PenaltyKind::lp_power: return p_ * sign(x) * std::pow(std::abs(x), p_ - 1.0);
        case PenaltyKind::l1: return sign(x);
        case PenaltyKind::elastic_net: return sign(x) + eta_ * x;
        case PenaltyKind::quadratic: return eta_ * x;
        }
        return 0.0;
    }

    /// dist(v, d r(x)) for the scalar atom r.
    double atom_subdifferential_distance(double x, double v) const {
        if (has_l1_part() && x == 0.0) {
            // d r(0) = [-1, 1]
            return std::max(0.0, std::abs(v) - 1.0);
        }
        return std::abs(v - atom_subgradient(x));
    }

    double atom_prox(double t, double lambda) const;

private:
    Penalty(PenaltyKind kind, double p, double eta) : kind_(kind), p_(p), eta_(eta) {}

    double lp_prox(double t, double lambda) const;

    PenaltyKind kind_;
    double p_;
    double eta_;
};

inline double soft_threshold(double t, double lambda) { return sign(t) * std::max(std::abs(t) - lambda, 0.0); }

// Solves x + lambda p x^{p-1} = |t| on [0, |t|] by Newton's method,
// falling back to bisection whenever a step leaves the bracket. Below the
// threshold |t| <= lambda p the root behaves like (|t| / (lambda p))^{1/(p-1)}.
inline double Penalty::lp_prox(double t, double lambda) const {
    const double target = std::abs(t);
    if (target == 0.0 || lambda == 0.0) return t;
    const double lp = lambda * p_;
    auto residual = [&](double x) { return x + lp * std::pow(x, p_ - 1.0) - target; };
    double lo = 0.0;
    double hi = target;
    double x = target > lp ? target - lp : std::min(target, std::pow(target / lp, 1.0 / (p_ - 1.0)));
    if (!(x > 0.0)) x = 0.5 * target;
    for (int it = 0; it < 300; ++it) {
        const double r = residual(x);
        if (r == 0.0) break;
        if (r < 0.0)
            lo = x;
        else
            hi = x;
        const double slope = 1.0 + lp * (p_ - 1.0) * std::pow(x, p_ - 2.0);
        double next = x - r / slope;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        const bool settled = std::abs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * next;
        x = next;
        if (settled || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * lo) break;
    }
    return sign(t) * x;
}

inline double Penalty::atom_prox(double t, double lambda) const {
    switch (kind_) {
    case PenaltyKind::lp_power: return lp_prox(t, lambda);
    case PenaltyKind::l1: return soft_threshold(t, lambda);
    case PenaltyKind::elastic_net: return soft_threshold(t, lambda) / (1.0 + lambda * eta_);
    case PenaltyKind::quadratic: return t / (1.0 + lambda * eta_);
    }
    return t;
}

inline double value(const Penalty& penalty, const Vector& x) {
    double total = 0.0;
    for (Eigen::Index k = 0; k < x.size(); ++k) total += penalty.atom(x[k]);
    return total;
}

/// Componentwise selection from dR(x). For the l1 part this is sign(x) with
/// 0 at 0, which is not the residual-based subgradient; see canonical_xi.
inline Vector subgradient(const Penalty& penalty, const Vector& x) {
    Vector out(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) out[k] = penalty.atom_subgradient(x[k]);
    return out;
}

/// Euclidean distance from v to the subdifferential dR(x).
inline double subdifferential_distance(const Penalty& penalty, const Vector& x, const Vector& v) {
    if (x.size() != v.size()) throw DimensionError("subdifferential_distance: size mismatch");
    double sq = 0.0;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double d = penalty.atom_subdifferential_distance(x[k], v[k]);
        sq += d * d;
    }
    return std::sqrt(sq);
}

/// argmin_x 1/2 ||x - t||^2 + lambda R(x), componentwise.
inline Vector prox(const Penalty& penalty, const Vector& t, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("prox: lambda must be nonnegative");
    Vector out(t.size());
    for (Eigen::Index k = 0; k < t.size(); ++k) out[k] = penalty.atom_prox(t[k], lambda);
    return out;
}

} // namespace tikreg
