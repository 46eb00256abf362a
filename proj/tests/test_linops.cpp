#include <cmath>

#include <gtest/gtest.h>

#include "tikreg/linops.hpp"
#include "tikreg/rng.hpp"

using namespace tikreg;

namespace {

Vector random_vector(SplitMix64& rng, std::size_t n) { return rng.normal_vector(static_cast<Eigen::Index>(n)); }

std::vector<LinearOperator> all_kinds() {
    SplitMix64 rng(11);
    Matrix dense(5, 3);
    for (Eigen::Index i = 0; i < dense.size(); ++i) dense.data()[i] = rng.normal();
    return {make_dense(dense), make_circular_convolution(64, 0.2), make_circular_convolution(10, 0.35),
            make_haar_synthesis(64), make_blur(8, 3, 1.2), make_blur(6, 6, 0.7),
            compose(make_circular_convolution(32, 0.2), make_haar_synthesis(32))};
}

// y_i = h * sum_{j<m} x_{(i-j) mod n}, written as a plain double loop.
Vector direct_convolution(const Vector& x, std::size_t m) {
    const auto n = x.size();
    Vector y = Vector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < n; ++k) {
            const Eigen::Index lag = ((i - k) % n + n) % n;
            if (lag < static_cast<Eigen::Index>(m)) y[i] += x[k] / static_cast<double>(n);
        }
    return y;
}

} // namespace

TEST(Adjoint, HoldsForEveryKindOnRandomPairs) {
    SplitMix64 rng(3);
    for (const auto& op : all_kinds()) {
        for (int trial = 0; trial < 100; ++trial) {
            const Vector x = random_vector(rng, op.domain_dim());
            const Vector y = random_vector(rng, op.range_dim());
            const Vector Ax = op.apply(x);
            const double lhs = Ax.dot(y);
            const double rhs = x.dot(op.apply_adjoint(y));
            EXPECT_LE(std::abs(lhs - rhs), 1e-10 * Ax.norm() * y.norm()) << to_string(op.kind());
        }
    }
}

TEST(Adjoint, DenseMatrixMatchesAdjointColumns) {
    for (const auto& op : all_kinds()) {
        const Matrix A = op.to_dense();
        Matrix At(op.domain_dim(), op.range_dim());
        Vector e = Vector::Zero(static_cast<Eigen::Index>(op.range_dim()));
        for (Eigen::Index j = 0; j < e.size(); ++j) {
            e[j] = 1.0;
            At.col(j) = op.apply_adjoint(e);
            e[j] = 0.0;
        }
        EXPECT_LE((A.transpose() - At).norm(), 1e-12 * (1.0 + A.norm()));
    }
}

TEST(Dimensions, MismatchThrows) {
    const auto op = make_haar_synthesis(8);
    EXPECT_THROW(op.apply(Vector::Zero(4)), DimensionError);
    EXPECT_THROW(op.apply_adjoint(Vector::Zero(16)), DimensionError);
    EXPECT_THROW(compose(make_haar_synthesis(8), make_haar_synthesis(4)), DimensionError);
}

TEST(OperatorNorm, Identity) { EXPECT_NEAR(operator_norm(make_identity(4), 1e-10), 1.0, 1e-10); }

TEST(OperatorNorm, DiagonalMatrix) {
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 3.0;
    d(1, 1) = 1.0;
    EXPECT_NEAR(operator_norm(make_dense(d), 1e-10), 3.0, 1e-9);
}

TEST(OperatorNorm, HaarIsIsometry) { EXPECT_NEAR(operator_norm(make_haar_synthesis(64), 1e-10), 1.0, 1e-10); }

TEST(OperatorNorm, MatchesSingularValueDecomposition) {
    for (const auto& op : all_kinds()) {
        const Eigen::JacobiSVD<Matrix> svd(op.to_dense());
        EXPECT_NEAR(operator_norm(op, 1e-10), svd.singularValues()[0], 1e-6 * svd.singularValues()[0])
            << to_string(op.kind());
    }
}

TEST(OperatorNorm, StartInNullSpaceRetriesFromRamp) {
    Matrix a(1, 2);
    a << 1.0, -1.0;
    EXPECT_NEAR(operator_norm(make_dense(a), 1e-10), std::sqrt(2.0), 1e-9);
}

TEST(OperatorNorm, CompositionIsSubmultiplicative) {
    const auto A = make_circular_convolution(64, 0.2);
    const auto B = make_blur(8, 3, 1.0);
    const double tol = 1e-8;
    EXPECT_LE(operator_norm(compose(A, B), tol), operator_norm(A, tol) * operator_norm(B, tol) * (1.0 + 1e-6));
}

TEST(OperatorNorm, ReportsNonConvergence) {
    // Nearly equal singular values: five iterations cannot settle to 1e-15.
    Matrix d(2, 2);
    d << 2.0, 0.0, 0.0, -1.9999;
    try {
        operator_norm(make_dense(d), 1e-15, 5);
        FAIL() << "expected NonConvergenceError";
    } catch (const NonConvergenceError& e) {
        EXPECT_GT(e.last_estimate(), 1.9);
        EXPECT_EQ(e.last_iterate().size(), 2);
    }
}

TEST(Convolution, DeltaInput) {
    const auto op = make_circular_convolution(10, 0.2);
    Vector e0 = Vector::Zero(10);
    e0[0] = 1.0;
    const Vector y = op.apply(e0);
    int count = 0;
    for (Eigen::Index i = 0; i < 10; ++i) {
        if (y[i] != 0.0) {
            ++count;
            EXPECT_DOUBLE_EQ(y[i], 0.1);
        }
    }
    EXPECT_EQ(count, 2);
}

TEST(Convolution, AllOnesMapsToKernelSum) {
    const auto op = make_circular_convolution(512, 0.2);
    const Vector y = op.apply(Vector::Ones(512));
    for (Eigen::Index i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], 102.0 / 512.0, 1e-13);
}

TEST(Convolution, FullSupportAverages) {
    // width close to 1 rounds to m = n: every output is h * sum(x).
    const auto op = make_circular_convolution(8, 0.97);
    SplitMix64 rng(5);
    const Vector x = random_vector(rng, 8);
    const Vector y = op.apply(x);
    for (Eigen::Index i = 0; i < 8; ++i) EXPECT_NEAR(y[i], x.sum() / 8.0, 1e-14);
}

TEST(Convolution, MatchesDirectCircularSum) {
    SplitMix64 rng(17);
    for (std::size_t n : {2u, 3u, 7u, 16u, 50u, 64u})
        for (double width : {0.1, 0.2, 0.5, 0.9}) {
            const auto m = static_cast<std::size_t>(std::lround(width * static_cast<double>(n)));
            if (m == 0) {
                EXPECT_THROW(make_circular_convolution(n, width), std::invalid_argument);
                continue;
            }
            const auto op = make_circular_convolution(n, width);
            const Vector x = random_vector(rng, n);
            EXPECT_LE((op.apply(x) - direct_convolution(x, m)).norm(), 1e-10 * (1.0 + x.norm()));
        }
}

TEST(Convolution, InvalidArguments) {
    EXPECT_THROW(make_circular_convolution(1, 0.2), std::invalid_argument);
    EXPECT_THROW(make_circular_convolution(10, 0.0), std::invalid_argument);
    EXPECT_THROW(make_circular_convolution(10, 1.0), std::invalid_argument);
    EXPECT_THROW(make_circular_convolution(10, 0.04), std::invalid_argument);
}

TEST(Haar, TwoPointCascade) {
    const auto op = make_haar_synthesis(2);
    const Vector a = op.apply(Vector::Unit(2, 0));
    const Vector d = op.apply(Vector::Unit(2, 1));
    EXPECT_NEAR(a[0], M_SQRT1_2, 1e-15);
    EXPECT_NEAR(a[1], M_SQRT1_2, 1e-15);
    EXPECT_NEAR(d[0], M_SQRT1_2, 1e-15);
    EXPECT_NEAR(d[1], -M_SQRT1_2, 1e-15);
}

TEST(Haar, ApproximationCoefficientIsConstant) {
    const Vector v = make_haar_synthesis(16).apply(Vector::Unit(16, 0));
    for (Eigen::Index i = 0; i < 16; ++i) EXPECT_NEAR(v[i], 0.25, 1e-15);
}

TEST(Haar, RoundTripAndIsometry) {
    const auto op = make_haar_synthesis(512);
    SplitMix64 rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        const Vector x = random_vector(rng, 512);
        EXPECT_LE((op.apply_adjoint(op.apply(x)) - x).norm(), 1e-12 * x.norm());
        EXPECT_NEAR(op.apply(x).norm(), x.norm(), 1e-10 * x.norm());
    }
}

TEST(Haar, RejectsNonPowerOfTwo) {
    EXPECT_THROW(make_haar_synthesis(12), std::invalid_argument);
    EXPECT_THROW(make_haar_synthesis(0), std::invalid_argument);
    EXPECT_NO_THROW(make_haar_synthesis(1));
}

TEST(Blur, BandOneScalesEveryPixel) {
    const double sigma = 1.3;
    const auto op = make_blur(5, 1, sigma);
    SplitMix64 rng(2);
    const Vector x = random_vector(rng, 25);
    EXPECT_LE((op.apply(x) - x / (2.0 * M_PI * sigma * sigma)).norm(), 1e-14 * x.norm());
}

TEST(Blur, SelfAdjoint) {
    const auto op = make_blur(12, 4, 1.2);
    SplitMix64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const Vector x = random_vector(rng, 144);
        EXPECT_LE((op.apply(x) - op.apply_adjoint(x)).norm(), 1e-10 * x.norm());
    }
}

TEST(Blur, CenteredDeltaGivesSeparablePatch) {
    const std::size_t N = 15, band = 4;
    const double sigma = 1.2;
    const auto op = make_blur(N, band, sigma);
    Vector e = Vector::Zero(N * N);
    const long c = 7;
    e[c * N + c] = 1.0;
    const Vector y = op.apply(e);
    auto z = [&](long j) {
        j = std::abs(j);
        return j < static_cast<long>(band) ? std::exp(-j * j / (2 * sigma * sigma)) / (sigma * std::sqrt(2 * M_PI))
                                           : 0.0;
    };
    int support = 0;
    for (long col = 0; col < static_cast<long>(N); ++col)
        for (long row = 0; row < static_cast<long>(N); ++row) {
            const double v = y[col * static_cast<long>(N) + row];
            EXPECT_NEAR(v, z(row - c) * z(col - c), 1e-15);
            if (v != 0.0) ++support;
        }
    EXPECT_EQ(support, static_cast<int>((2 * band - 1) * (2 * band - 1)));
}

TEST(Blur, InvalidArguments) {
    EXPECT_THROW(make_blur(0, 1, 1.0), std::invalid_argument);
    EXPECT_THROW(make_blur(5, 0, 1.0), std::invalid_argument);
    EXPECT_THROW(make_blur(5, 6, 1.0), std::invalid_argument);
    EXPECT_THROW(make_blur(5, 2, 0.0), std::invalid_argument);
}

TEST(LeastSquares, SolvesConsistentSystem) {
    Matrix a(3, 2);
    a << 1, 2, 0, 1, 1, 0;
    const Vector x(Vector::LinSpaced(2, 1.0, -1.0));
    const auto ls = least_squares(make_dense(a), a * x, 1e-14);
    EXPECT_TRUE(ls.converged);
    EXPECT_LE((ls.solution - x).norm(), 1e-10);
    EXPECT_LE(ls.residual.norm(), 1e-10);
}

TEST(RangeComplement, SquareInvertibleIsZero) {
    SplitMix64 rng(4);
    Matrix a = Matrix::Identity(6, 6);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] += 0.2 * rng.normal();
    EXPECT_NEAR(range_complement_ratio(make_dense(a), random_vector(rng, 6), 1e-12), 0.0, 1e-10);
}

TEST(RangeComplement, EmbeddingExamples) {
    Matrix a(2, 1);
    a << 1.0, 0.0;
    const auto op = make_dense(a);
    Vector v(2);
    v << 0.0, 1.0;
    EXPECT_NEAR(range_complement_ratio(op, v, 1e-12), 1.0, 1e-12);
    v << 1.0, 1.0;
    EXPECT_NEAR(range_complement_ratio(op, v, 1e-12), M_SQRT1_2, 1e-12);
    EXPECT_THROW(range_complement_ratio(op, Vector::Zero(2), 1e-12), std::invalid_argument);
    EXPECT_THROW(range_complement_ratio(op, Vector::Zero(3), 1e-12), DimensionError);
}

TEST(RangeComplement, MatchesSvdProjection) {
    // Rank-deficient convolution: m = 4 on n = 16 annihilates several Fourier modes.
    const auto op = make_circular_convolution(16, 0.25);
    const Matrix A = op.to_dense();
    const Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeFullU);
    const auto& s = svd.singularValues();
    Eigen::Index rank = 0;
    while (rank < s.size() && s[rank] > 1e-12 * s[0]) ++rank;
    ASSERT_LT(rank, 16);
    SplitMix64 rng(9);
    for (int trial = 0; trial < 5; ++trial) {
        const Vector v = random_vector(rng, 16);
        const Matrix U = svd.matrixU();
        const Vector coeff = U.transpose() * v;
        const double oracle = coeff.tail(16 - rank).norm() / v.norm();
        EXPECT_NEAR(range_complement_ratio(op, v, 1e-12), oracle, 1e-8);
        EXPECT_NEAR(dense_range_complement_norm(op, v) / v.norm(), oracle, 1e-8);
    }
}

TEST(RangeComplement, IllConditionedFullRankFallsBackToDense) {
    // Blur with sigma = 1.2, band = 5 on 20x20 is invertible but badly conditioned.
    const auto op = make_blur(20, 5, 1.2);
    SplitMix64 rng(12);
    const Vector v = random_vector(rng, 400);
    EXPECT_LE(range_complement_ratio(op, v, 1e-12), 1e-8);
}
