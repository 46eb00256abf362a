#pragma once

// Synthetic test problems with known ground truth: sparse deconvolution in a
// Haar basis with an exact source condition, and separable image deblurring.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tikreg/linops.hpp"
#include "tikreg/penalty.hpp"
#include "tikreg/rng.hpp"

namespace tikreg {

enum class ProblemType { deconvolution, blur };

inline const char* to_string(ProblemType type) {
    return type == ProblemType::deconvolution ? "deconvolution" : "blur";
}

struct ProblemInstance {
    ProblemType type = ProblemType::deconvolution;
    LinearOperator K;
    Penalty R;
    Vector x_dagger;
    /// Subgradient of R at x_dagger used for Bregman distances to the truth.
    /// Equals K*w for source-condition problems.
    Vector xi_dagger;
    /// Source element; empty when no source condition is constructed.
    Vector w;
    Vector y_dagger;
    Vector y_delta;
    double delta = 0.0;
    std::uint64_t seed = 0;
    /// ||Q(y_delta - y_dagger)|| / delta; NaN when delta = 0.
    double epsilon_hat = std::numeric_limits<double>::quiet_NaN();
    /// Generator parameters, enough to rebuild K and R.
    std::map<std::string, double> params;
    std::vector<std::string> notes;

    bool has_source_condition() const noexcept { return w.size() > 0; }
};

/// Piecewise-constant plus smooth profile on [0, 1], sampled as
/// w_i = scale * sqrt(1/n) * w(i/n) so that ||w|| approximates the L2 norm.
struct WSpec {
    struct Step {
        double begin;
        double end;
        double value;
    };
    // amplitude * sin^2(pi (t - begin) / (end - begin)) on [begin, end)
    struct Bump {
        double begin;
        double end;
        double amplitude;
    };
    std::vector<Step> steps{{0.10, 0.30, 1.0}, {0.45, 0.60, -0.5}};
    std::vector<Bump> bumps{{0.70, 0.90, 0.8}};
    double scale = 30.0;

    double profile(double t) const {
        double v = 0.0;
        for (const auto& s : steps)
            if (t >= s.begin && t < s.end) v += s.value;
        for (const auto& b : bumps)
            if (t >= b.begin && t < b.end) {
                const double u = std::sin(M_PI * (t - b.begin) / (b.end - b.begin));
                v += b.amplitude * u * u;
            }
        return v;
    }

    Vector sample(std::size_t n) const {
        Vector out(static_cast<Eigen::Index>(n));
        const double root_h = std::sqrt(1.0 / static_cast<double>(n));
        for (std::size_t i = 0; i < n; ++i)
            out[static_cast<Eigen::Index>(i)] = scale * root_h * profile(static_cast<double>(i) / static_cast<double>(n));
        return out;
    }
};

struct SourceSolution {
    Vector xi;
    Vector x_dagger;
};

/// xi = K*w and x_k = sign(xi_k) |xi_k / p|^{1/(p-1)}, so xi = dR(x) for R = lp_power(p).
inline SourceSolution construct_source_solution(const LinearOperator& K, const Vector& w, double p) {
    if (!(p > 1.0 && p <= 2.0)) throw std::invalid_argument("construct_source_solution: p must lie in (1, 2]");
    SourceSolution out;
    out.xi = K.apply_adjoint(w);
    out.x_dagger.resize(out.xi.size());
    for (Eigen::Index k = 0; k < out.xi.size(); ++k)
        out.x_dagger[k] = sign(out.xi[k]) * std::pow(std::abs(out.xi[k] / p), 1.0 / (p - 1.0));
    return out;
}

/// y + delta g / ||g|| with g standard normal from SplitMix64(seed).
inline Vector add_noise(const Vector& y_dagger, double delta, std::uint64_t seed) {
    if (!(delta >= 0.0)) throw std::invalid_argument("add_noise: delta must be nonnegative");
    if (delta == 0.0) return y_dagger;
    SplitMix64 rng(seed);
    const Vector g = rng.normal_vector(y_dagger.size());
    return y_dagger + (delta / g.norm()) * g;
}

inline constexpr double kRangeProjectionTol = 1e-12;

inline double noise_condition_epsilon(const LinearOperator& K, const Vector& y_dagger, const Vector& y_delta) {
    const Vector noise = y_delta - y_dagger;
    if (noise.norm() == 0.0) throw std::invalid_argument("noise_condition_epsilon: noise is zero");
    return range_complement_ratio(K, noise, kRangeProjectionTol);
}

inline LinearOperator deconvolution_operator(std::size_t n, double width = 0.2) {
    return compose(make_circular_convolution(n, width), make_haar_synthesis(n));
}

inline ProblemInstance deconvolution_problem(std::size_t n = 512, double p = 1.2, const WSpec& w_spec = {},
                                             double delta = 0.02, std::uint64_t seed = 1, double width = 0.2) {
    if (!is_power_of_two(n)) throw std::invalid_argument("deconvolution_problem: n must be a power of two");
    ProblemInstance inst{ProblemType::deconvolution, deconvolution_operator(n, width), Penalty::lp_power(p)};
    inst.w = w_spec.sample(n);
    auto source = construct_source_solution(inst.K, inst.w, p);
    inst.xi_dagger = std::move(source.xi);
    inst.x_dagger = std::move(source.x_dagger);
    inst.y_dagger = inst.K.apply(inst.x_dagger);
    inst.y_delta = add_noise(inst.y_dagger, delta, seed);
    inst.delta = delta;
    inst.seed = seed;
    inst.params = {{"n", static_cast<double>(n)}, {"p", p}, {"width", width}, {"w_scale", w_spec.scale}};
    const auto nonzeros = (inst.x_dagger.array() != 0.0).count();
    inst.params["x_dagger_nonzeros"] = static_cast<double>(nonzeros);
    if (delta > 0.0)
        inst.epsilon_hat = noise_condition_epsilon(inst.K, inst.y_dagger, inst.y_delta);
    else
        inst.notes.push_back("delta = 0: noise condition epsilon undefined");
    return inst;
}

/// N x N piecewise-constant test image, stacked column-major: a large
/// ellipse (1) holding a smaller one (2), a right triangle (3) and a
/// cross (4) on a zero background.
inline Vector blur_test_image(std::size_t side) {
    const auto N = static_cast<long>(side);
    const auto round_div = [&](long d) { return std::lround(static_cast<double>(N) / static_cast<double>(d)); };
    const long n2 = round_div(2), n3 = round_div(3), n6 = round_div(6), n12 = round_div(12);
    Matrix img = Matrix::Zero(N, N);
    auto put = [&](long row, long col, double v, bool add) {
        if (row < 0 || col < 0 || row >= N || col >= N) return;
        img(row, col) = add ? img(row, col) + v : v;
    };
    // Ellipses: quarter masks mirrored into a 2*n6 x 2*n3 block.
    auto ellipse = [&](long row0, long col0, double radius2, double v, bool add) {
        for (long i = 1; i <= n6; ++i)
            for (long j = 1; j <= n3; ++j) {
                const double di = static_cast<double>(i) / static_cast<double>(n6);
                const double dj = static_cast<double>(j) / static_cast<double>(n3);
                if (di * di + dj * dj >= radius2) continue;
                for (long ri : {n6 - i, n6 + i - 1})
                    for (long cj : {n3 - j, n3 + j - 1}) put(row0 + ri, col0 + cj, v, add);
            }
    };
    ellipse(2, n3 - 1, 1.0, 1.0, false);
    ellipse(n6, n3 - 1, 0.6, 2.0, true);
    for (long r = 0; r < N; ++r)
        for (long c = 0; c < N; ++c)
            if (img(r, c) == 3.0) img(r, c) = 2.0;
    // Upper-triangular block of ones scaled by 3.
    for (long i = 0; i < n3; ++i)
        for (long j = i; j < n3; ++j) put(n3 + n12 + j, 1 + i, 3.0, false);
    // Cross of arm length n6.
    const long arm = 2 * n6 + 1;
    for (long t = 0; t < arm; ++t) {
        put(n2 + n12 + n6, n2 + t, 4.0, false);
        put(n2 + n12 + t, n2 + n6, 4.0, false);
    }
    return Eigen::Map<const Vector>(img.data(), N * N);
}

inline ProblemInstance blur_problem(std::size_t side = 50, std::size_t band = 5, double sigma = 1.2,
                                    double eta = 1e-3, double delta = 0.1, std::uint64_t seed = 1) {
    if (!(eta >= 0.0)) throw std::invalid_argument("blur_problem: eta must be nonnegative");
    ProblemInstance inst{ProblemType::blur, make_blur(side, band, sigma), Penalty::elastic_net(eta)};
    inst.x_dagger = blur_test_image(side);
    inst.xi_dagger = subgradient(inst.R, inst.x_dagger);
    inst.y_dagger = inst.K.apply(inst.x_dagger);
    inst.y_delta = add_noise(inst.y_dagger, delta, seed);
    inst.delta = delta;
    inst.seed = seed;
    inst.params = {{"N", static_cast<double>(side)},
                   {"band", static_cast<double>(band)},
                   {"sigma", sigma},
                   {"eta", eta}};
    inst.notes.push_back("no source condition constructed; xi_dagger = sign(x) + eta x");
    if (eta == 0.0) inst.notes.push_back("eta = 0: pure l1 penalty, Tikhonov minimizer may be non-unique");
    if (delta > 0.0)
        inst.epsilon_hat = noise_condition_epsilon(inst.K, inst.y_dagger, inst.y_delta);
    else
        inst.notes.push_back("delta = 0: noise condition epsilon undefined");
    return inst;
}

} // namespace tikreg
