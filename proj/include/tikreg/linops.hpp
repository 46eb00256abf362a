#pragma once

// Finite-dimensional linear operators: dense matrices, circular convolution,
// orthonormal Haar synthesis, separable Gaussian blur and composition.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>

#include <Eigen/Dense>

namespace tikreg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when power iteration does not settle; carries the last estimate.
class NonConvergenceError : public std::runtime_error {
public:
    NonConvergenceError(const std::string& what, double last_estimate, Vector last_iterate)
        : std::runtime_error(what), last_estimate_(last_estimate), last_iterate_(std::move(last_iterate)) {}
    double last_estimate() const noexcept { return last_estimate_; }
    const Vector& last_iterate() const noexcept { return last_iterate_; }

private:
    double last_estimate_;
    Vector last_iterate_;
};

enum class OperatorKind { dense, circular_convolution, haar_synthesis, separable_blur, composition };

inline const char* to_string(OperatorKind kind) {
    switch (kind) {
    case OperatorKind::dense: return "dense";
    case OperatorKind::circular_convolution: return "circular_convolution";
    case OperatorKind::haar_synthesis: return "haar_synthesis";
    case OperatorKind::separable_blur: return "separable_blur";
    case OperatorKind::composition: return "composition";
    }
    return "unknown";
}

class LinearOperator;

namespace detail {

struct DenseOp {
    Matrix matrix;
};

// Causal kernel: `support` samples of weight `weight` starting at offset 0.
struct ConvolutionOp {
    std::size_t n;
    std::size_t support;
    double weight;
};

struct HaarOp {
    std::size_t n;
    std::size_t levels;
};

// First row of the symmetric banded Toeplitz factor T; A = T (x) T.
struct BlurOp {
    std::size_t side;
    std::size_t band;
    double sigma;
    Vector profile;
};

struct CompositionOp {
    std::shared_ptr<const LinearOperator> outer;
    std::shared_ptr<const LinearOperator> inner;
};

} // namespace detail

/// Immutable linear map R^domain_dim -> R^range_dim. Copies share state.
class LinearOperator {
public:
    using Impl = std::variant<detail::DenseOp, detail::ConvolutionOp, detail::HaarOp, detail::BlurOp,
                              detail::CompositionOp>;

    LinearOperator(std::size_t domain_dim, std::size_t range_dim, Impl impl)
        : domain_dim_(domain_dim), range_dim_(range_dim), impl_(std::make_shared<const Impl>(std::move(impl))) {}

    std::size_t domain_dim() const noexcept { return domain_dim_; }
    std::size_t range_dim() const noexcept { return range_dim_; }

    OperatorKind kind() const noexcept { return static_cast<OperatorKind>(impl_->index()); }
    const Impl& impl() const noexcept { return *impl_; }

    Vector apply(const Vector& x) const {
        if (static_cast<std::size_t>(x.size()) != domain_dim_)
            throw DimensionError("apply: expected vector of length " + std::to_string(domain_dim_) + ", got " +
                                 std::to_string(x.size()));
        return std::visit([&](const auto& op) { return forward(op, x); }, *impl_);
    }

    Vector apply_adjoint(const Vector& y) const {
        if (static_cast<std::size_t>(y.size()) != range_dim_)
            throw DimensionError("apply_adjoint: expected vector of length " + std::to_string(range_dim_) +
                                 ", got " + std::to_string(y.size()));
        return std::visit([&](const auto& op) { return adjoint(op, y); }, *impl_);
    }

    /// Dense matrix of the operator, built column by column. Small sizes only.
    Matrix to_dense() const {
        Matrix out(range_dim_, domain_dim_);
        Vector e = Vector::Zero(static_cast<Eigen::Index>(domain_dim_));
        for (std::size_t j = 0; j < domain_dim_; ++j) {
            e[static_cast<Eigen::Index>(j)] = 1.0;
            out.col(static_cast<Eigen::Index>(j)) = apply(e);
            e[static_cast<Eigen::Index>(j)] = 0.0;
        }
        return out;
    }

private:
    static Vector forward(const detail::DenseOp& op, const Vector& x) { return op.matrix * x; }
    static Vector adjoint(const detail::DenseOp& op, const Vector& y) { return op.matrix.transpose() * y; }

    // (Ax)_i = w * sum_{j<m} x_{(i-j) mod n}
    static Vector forward(const detail::ConvolutionOp& op, const Vector& x) {
        const auto n = static_cast<Eigen::Index>(op.n);
        const auto m = static_cast<Eigen::Index>(op.support);
        // Running window sum over the periodic extension.
        Vector out(n);
        double window = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) window += x[((0 - j) % n + n) % n];
        out[0] = window;
        for (Eigen::Index i = 1; i < n; ++i) {
            window += x[i] - x[((i - m) % n + n) % n];
            out[i] = window;
        }
        return op.weight * out;
    }

    // (A*y)_j = w * sum_{l<m} y_{(j+l) mod n}
    static Vector adjoint(const detail::ConvolutionOp& op, const Vector& y) {
        const auto n = static_cast<Eigen::Index>(op.n);
        const auto m = static_cast<Eigen::Index>(op.support);
        Vector out(n);
        double window = 0.0;
        for (Eigen::Index l = 0; l < m; ++l) window += y[l % n];
        out[0] = window;
        for (Eigen::Index j = 1; j < n; ++j) {
            window += y[(j + m - 1) % n] - y[j - 1];
            out[j] = window;
        }
        return op.weight * out;
    }

    // Inverse orthonormal Haar cascade; coefficients ordered
    // [approximation, details level 0 (coarsest), ..., details finest].
    static Vector forward(const detail::HaarOp& op, const Vector& c) {
        const double s = 1.0 / std::sqrt(2.0);
        Vector a = c;
        Vector scratch(c.size());
        for (Eigen::Index len = 1; len < static_cast<Eigen::Index>(op.n); len *= 2) {
            for (Eigen::Index i = 0; i < len; ++i) {
                const double approx = a[i];
                const double detail = c[len + i];
                scratch[2 * i] = s * (approx + detail);
                scratch[2 * i + 1] = s * (approx - detail);
            }
            a.head(2 * len) = scratch.head(2 * len);
        }
        return a;
    }

    static Vector adjoint(const detail::HaarOp& op, const Vector& y) {
        const double s = 1.0 / std::sqrt(2.0);
        Vector out(y.size());
        Vector a = y;
        for (Eigen::Index len = static_cast<Eigen::Index>(op.n) / 2; len >= 1; len /= 2) {
            for (Eigen::Index i = 0; i < len; ++i) {
                const double even = a[2 * i];
                const double odd = a[2 * i + 1];
                out[len + i] = s * (even - odd);
                a[i] = s * (even + odd);
            }
        }
        out[0] = a[0];
        return out;
    }

    static Matrix banded_product(const detail::BlurOp& op, const Matrix& x) {
        // Returns T * x for the symmetric banded Toeplitz T.
        const auto n = static_cast<Eigen::Index>(op.side);
        const auto band = static_cast<Eigen::Index>(op.band);
        Matrix out = Matrix::Zero(n, x.cols());
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::Index lo = std::max<Eigen::Index>(0, i - band + 1);
            const Eigen::Index hi = std::min<Eigen::Index>(n - 1, i + band - 1);
            for (Eigen::Index j = lo; j <= hi; ++j) out.row(i) += op.profile[std::abs(i - j)] * x.row(j);
        }
        return out;
    }

    static Vector forward(const detail::BlurOp& op, const Vector& x) {
        const auto n = static_cast<Eigen::Index>(op.side);
        Eigen::Map<const Matrix> image(x.data(), n, n);
        const Matrix left = banded_product(op, image);
        const Matrix both = banded_product(op, left.transpose()).transpose();
        return Eigen::Map<const Vector>(both.data(), n * n);
    }

    static Vector adjoint(const detail::BlurOp& op, const Vector& y) { return forward(op, y); }

    static Vector forward(const detail::CompositionOp& op, const Vector& x) {
        return op.outer->apply(op.inner->apply(x));
    }
    static Vector adjoint(const detail::CompositionOp& op, const Vector& y) {
        return op.inner->apply_adjoint(op.outer->apply_adjoint(y));
    }

    std::size_t domain_dim_;
    std::size_t range_dim_;
    std::shared_ptr<const Impl> impl_;
};

inline Vector apply(const LinearOperator& op, const Vector& x) { return op.apply(x); }
inline Vector apply_adjoint(const LinearOperator& op, const Vector& y) { return op.apply_adjoint(y); }

inline LinearOperator make_dense(Matrix matrix) {
    if (matrix.rows() == 0 || matrix.cols() == 0) throw std::invalid_argument("make_dense: empty matrix");
    const auto rows = static_cast<std::size_t>(matrix.rows());
    const auto cols = static_cast<std::size_t>(matrix.cols());
    return LinearOperator(cols, rows, detail::DenseOp{std::move(matrix)});
}

inline LinearOperator make_identity(std::size_t n) {
    return make_dense(Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
}

/// Circular convolution on n equispaced samples of [0,1] with the indicator
/// of an interval of the given width. Grid weight 1/n is folded into the
/// kernel, so the constant 1 maps to (approximately) `width`.
inline LinearOperator make_circular_convolution(std::size_t n, double width) {
    if (n < 2) throw std::invalid_argument("make_circular_convolution: n must be >= 2");
    if (!(width > 0.0 && width < 1.0))
        throw std::invalid_argument("make_circular_convolution: width must lie in (0, 1)");
    const auto support = static_cast<std::size_t>(std::lround(width * static_cast<double>(n)));
    if (support == 0) throw std::invalid_argument("make_circular_convolution: width too small for the grid");
    return LinearOperator(n, n, detail::ConvolutionOp{n, support, 1.0 / static_cast<double>(n)});
}

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// Orthonormal inverse discrete Haar transform on R^n, n a power of two.
inline LinearOperator make_haar_synthesis(std::size_t n) {
    if (!is_power_of_two(n)) throw std::invalid_argument("make_haar_synthesis: n must be a power of two");
    std::size_t levels = 0;
    while ((std::size_t{1} << levels) < n) ++levels;
    return LinearOperator(n, n, detail::HaarOp{n, levels});
}

/// Separable Gaussian blur on N x N images (column-major), A = T (x) T with
/// T symmetric banded Toeplitz, first row z_j = exp(-j^2/(2 sigma^2)) / (sigma sqrt(2 pi)), j < band.
inline LinearOperator make_blur(std::size_t side, std::size_t band, double sigma) {
    if (side < 1) throw std::invalid_argument("make_blur: N must be >= 1");
    if (band < 1 || band > side) throw std::invalid_argument("make_blur: band must lie in [1, N]");
    if (!(sigma > 0.0)) throw std::invalid_argument("make_blur: sigma must be positive");
    Vector profile(static_cast<Eigen::Index>(band));
    const double scale = 1.0 / (sigma * std::sqrt(2.0 * M_PI));
    for (std::size_t j = 0; j < band; ++j) {
        const double jd = static_cast<double>(j);
        profile[static_cast<Eigen::Index>(j)] = scale * std::exp(-jd * jd / (2.0 * sigma * sigma));
    }
    return LinearOperator(side * side, side * side, detail::BlurOp{side, band, sigma, std::move(profile)});
}

/// outer o inner.
inline LinearOperator compose(const LinearOperator& outer, const LinearOperator& inner) {
    if (outer.domain_dim() != inner.range_dim())
        throw DimensionError("compose: inner range dimension " + std::to_string(inner.range_dim()) +
                             " does not match outer domain dimension " + std::to_string(outer.domain_dim()));
    return LinearOperator(inner.domain_dim(), outer.range_dim(),
                          detail::CompositionOp{std::make_shared<const LinearOperator>(outer),
                                                std::make_shared<const LinearOperator>(inner)});
}

inline constexpr int kPowerIterationMaxIter = 10000;

/// Largest singular value by power iteration on A*A from the normalized
/// all-ones vector. Stops once successive estimates agree to tol/10 relative.
inline double operator_norm(const LinearOperator& op, double tol, int max_iter = kPowerIterationMaxIter) {
    if (!(tol > 0.0)) throw std::invalid_argument("operator_norm: tol must be positive");
    const auto n = static_cast<Eigen::Index>(op.domain_dim());
    Vector v = Vector::Ones(n) / std::sqrt(static_cast<double>(n));
    double estimate = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        Vector gram = op.apply_adjoint(op.apply(v));
        const double norm = gram.norm();
        if (norm == 0.0) {
            // all-ones start lies in the null space: retry once from a ramp
            if (it == 0) {
                v = Vector::LinSpaced(n, 1.0, 2.0);
                v /= v.norm();
                continue;
            }
            return 0.0;
        }
        const double next = std::sqrt(v.dot(gram));
        v = gram / norm;
        if (it > 0 && std::abs(next - estimate) <= 0.1 * tol * next) return next;
        estimate = next;
    }
    throw NonConvergenceError("operator_norm: power iteration did not converge", estimate, v);
}

struct LeastSquaresResult {
    Vector solution;
    Vector residual;
    int iterations = 0;
    bool converged = false;
};

/// CGLS for min ||Ax - b||, stopping when ||A*(b - Ax)|| <= tol * ||A*b||.
inline LeastSquaresResult least_squares(const LinearOperator& op, const Vector& b, double tol, int max_iter = 0) {
    if (max_iter <= 0) max_iter = 10 * static_cast<int>(op.domain_dim()) + 100;
    LeastSquaresResult out;
    out.solution = Vector::Zero(static_cast<Eigen::Index>(op.domain_dim()));
    out.residual = b;
    Vector s = op.apply_adjoint(b);
    const double target = tol * s.norm();
    Vector p = s;
    double gamma = s.squaredNorm();
    for (int it = 0; it < max_iter; ++it) {
        if (std::sqrt(gamma) <= target) {
            out.converged = true;
            out.iterations = it;
            return out;
        }
        const Vector q = op.apply(p);
        const double qq = q.squaredNorm();
        if (qq == 0.0) break;
        const double step = gamma / qq;
        out.solution += step * p;
        out.residual -= step * q;
        s = op.apply_adjoint(out.residual);
        const double next = s.squaredNorm();
        p = s + (next / gamma) * p;
        gamma = next;
        out.iterations = it + 1;
    }
    out.converged = std::sqrt(gamma) <= target;
    return out;
}

inline constexpr std::size_t kDenseRangeLimit = 4096;

/// ||Qv|| using a rank-revealing QR factorization of the dense matrix.
inline double dense_range_complement_norm(const LinearOperator& op, const Vector& v) {
    const Eigen::ColPivHouseholderQR<Matrix> qr(op.to_dense());
    Vector coeffs = qr.householderQ().adjoint() * v;
    return coeffs.tail(coeffs.size() - qr.rank()).norm();
}

/// ||Qv|| / ||v|| with Q the orthogonal projector onto range(A)^perp.
/// Qv is the least-squares residual v - Ax, which is orthogonal to range(A)
/// once A*(v - Ax) vanishes. When CGLS stalls on an ill-conditioned operator
/// of moderate size the projection is taken from a dense QR factorization.
inline double range_complement_ratio(const LinearOperator& op, const Vector& v, double tol) {
    if (static_cast<std::size_t>(v.size()) != op.range_dim())
        throw DimensionError("range_complement_ratio: vector length does not match range dimension");
    const double vnorm = v.norm();
    if (vnorm == 0.0) throw std::invalid_argument("range_complement_ratio: v must be nonzero");
    const LeastSquaresResult ls = least_squares(op, v, tol);
    if (!ls.converged && op.range_dim() <= kDenseRangeLimit && op.domain_dim() <= kDenseRangeLimit)
        return std::min(1.0, dense_range_complement_norm(op, v) / vnorm);
    return std::min(1.0, ls.residual.norm() / vnorm);
}

} // namespace tikreg
