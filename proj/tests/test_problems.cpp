#include <cmath>

#include <Eigen/SVD>
#include <gtest/gtest.h>

#include "tikreg/problems.hpp"
#include "tikreg/rng.hpp"
#include "tikreg/solver.hpp"

using namespace tikreg;

namespace {

bool bitwise_equal(const Vector& a, const Vector& b) {
    return a.size() == b.size() && std::equal(a.data(), a.data() + a.size(), b.data());
}

double svd_complement_ratio(const LinearOperator& K, const Vector& v) {
    const Eigen::JacobiSVD<Matrix> svd(K.to_dense(), Eigen::ComputeFullU);
    const auto& s = svd.singularValues();
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s[i] > 1e-12 * s[0]) ++rank;
    const Vector coeffs = svd.matrixU().adjoint() * v;
    return coeffs.tail(coeffs.size() - rank).norm() / v.norm();
}

} // namespace

TEST(SplitMix64, GoldenValues) {
    SplitMix64 rng(0);
    EXPECT_EQ(rng.next(), 0xE220A8397B1DCDAFULL);
    EXPECT_EQ(rng.next(), 0x6E789E6AA1B965F4ULL);
    EXPECT_EQ(rng.next(), 0x06C45D188009454FULL);
}

TEST(SplitMix64, UniformAndNormalRanges) {
    SplitMix64 rng(42);
    double sum = 0, sq = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    EXPECT_NEAR(sum / n, 0.0, 0.05);
    EXPECT_NEAR(sq / n, 1.0, 0.05);
}

TEST(SourceSolution, Examples) {
    const auto K = make_identity(3);
    const auto zero = construct_source_solution(K, Vector::Zero(3), 1.2);
    EXPECT_EQ(zero.xi.norm(), 0.0);
    EXPECT_EQ(zero.x_dagger.norm(), 0.0);

    for (double p : {1.2, 1.5, 2.0}) {
        Vector w(3);
        w << p, -p, 0.0;
        const auto s = construct_source_solution(K, w, p);
        EXPECT_NEAR(s.x_dagger[0], 1.0, 1e-15);
        EXPECT_NEAR(s.x_dagger[1], -1.0, 1e-15);
        EXPECT_EQ(s.x_dagger[2], 0.0);
    }
    Vector w(1);
    w << 4.0;
    EXPECT_NEAR(construct_source_solution(make_identity(1), w, 2.0).x_dagger[0], 2.0, 1e-15);
    EXPECT_THROW(construct_source_solution(K, Vector::Zero(3), 1.0), std::invalid_argument);
    EXPECT_THROW(construct_source_solution(K, Vector::Zero(3), 2.5), std::invalid_argument);
}

TEST(AddNoise, ExactLevelAndDeterminism) {
    SplitMix64 rng(3);
    const Vector y = rng.normal_vector(50);
    const Vector a = add_noise(y, 0.02, 11);
    EXPECT_NEAR((a - y).norm(), 0.02, 1e-12 * 0.02);
    EXPECT_TRUE(bitwise_equal(a, add_noise(y, 0.02, 11)));
    EXPECT_FALSE(bitwise_equal(a, add_noise(y, 0.02, 12)));
    EXPECT_TRUE(bitwise_equal(add_noise(y, 0.0, 11), y));
    EXPECT_THROW(add_noise(y, -1.0, 1), std::invalid_argument);
}

TEST(NoiseCondition, InsideAndOrthogonalToRange) {
    Matrix k = Matrix::Zero(4, 3);
    k(0, 0) = 1;
    k(1, 1) = 2;
    k(2, 2) = 0.5;
    const auto K = make_dense(k);
    Vector y = Vector::Zero(4), inside(4), outside(4);
    inside << 0.3, -1, 2, 0;
    outside << 0, 0, 0, 0.7;
    EXPECT_NEAR(noise_condition_epsilon(K, y, inside), 0.0, 1e-10);
    EXPECT_NEAR(noise_condition_epsilon(K, y, outside), 1.0, 1e-10);
    EXPECT_THROW(noise_condition_epsilon(K, y, y), std::invalid_argument);
}

TEST(NoiseCondition, DeconvolutionMatchesSvd) {
    const auto inst = deconvolution_problem(128, 1.2, {}, 0.02, 5);
    const double expected = svd_complement_ratio(inst.K, inst.y_delta - inst.y_dagger);
    EXPECT_GT(inst.epsilon_hat, 0.0);
    EXPECT_LT(inst.epsilon_hat, 1.0);
    EXPECT_NEAR(inst.epsilon_hat, expected, 1e-6);
}

TEST(DeconvolutionProblem, Invariants) {
    const auto inst = deconvolution_problem(128, 1.2, {}, 0.02, 1);
    EXPECT_NEAR((inst.y_delta - inst.y_dagger).norm(), 0.02, 1e-12 * 0.02);
    EXPECT_LE((inst.y_dagger - inst.K.apply(inst.x_dagger)).norm(), 1e-12 * (1 + inst.y_dagger.norm()));
    EXPECT_LE((inst.xi_dagger - inst.K.apply_adjoint(inst.w)).norm(), 1e-12 * (1 + inst.xi_dagger.norm()));
    EXPECT_LE(subdifferential_distance(inst.R, inst.x_dagger, inst.xi_dagger), 1e-10);
    const double nonzeros = inst.params.at("x_dagger_nonzeros");
    EXPECT_GT(nonzeros, 0);
    EXPECT_LT(nonzeros, 128);
    EXPECT_TRUE(inst.has_source_condition());
    EXPECT_THROW(deconvolution_problem(100), std::invalid_argument);
}

TEST(DeconvolutionProblem, Deterministic) {
    const auto a = deconvolution_problem(64, 1.2, {}, 0.02, 9);
    const auto b = deconvolution_problem(64, 1.2, {}, 0.02, 9);
    EXPECT_TRUE(bitwise_equal(a.y_delta, b.y_delta));
    EXPECT_TRUE(bitwise_equal(a.x_dagger, b.x_dagger));
    EXPECT_EQ(a.epsilon_hat, b.epsilon_hat);
    const auto c = deconvolution_problem(64, 1.2, {}, 0.02, 10);
    EXPECT_FALSE(bitwise_equal(a.y_delta, c.y_delta));
}

TEST(DeconvolutionProblem, ZeroNoiseFlagged) {
    const auto inst = deconvolution_problem(64, 1.2, {}, 0.0, 1);
    EXPECT_TRUE(bitwise_equal(inst.y_delta, inst.y_dagger));
    EXPECT_TRUE(std::isnan(inst.epsilon_hat));
    EXPECT_FALSE(inst.notes.empty());
}

TEST(BlurProblem, DefaultsAndImage) {
    const auto inst = blur_problem(20, 3, 1.2, 1e-3, 0.1, 1);
    EXPECT_EQ(inst.K.domain_dim(), 400u);
    EXPECT_NEAR((inst.y_delta - inst.y_dagger).norm(), 0.1, 1e-12 * 0.1);
    EXPECT_GE(inst.x_dagger.minCoeff(), 0.0);
    EXPECT_GT((inst.x_dagger.array() == 0.0).count(), 0);
    EXPECT_GT((inst.x_dagger.array() != 0.0).count(), 0);
    EXPECT_LE(subdifferential_distance(inst.R, inst.x_dagger, inst.xi_dagger), 1e-12);
    EXPECT_FALSE(inst.has_source_condition());
    EXPECT_NEAR(inst.epsilon_hat, 0.0, 1e-8);  // square blur operators are injective
}

TEST(BlurProblem, BandOneIsPixelwiseScalingAndClosedFormSolution) {
    const double sigma = 1.5, eta = 0.1, alpha = 0.01;
    const auto inst = blur_problem(8, 1, sigma, eta, 0.05, 2);
    const double c = 1.0 / (2 * M_PI * sigma * sigma);
    EXPECT_LE((inst.y_dagger - c * inst.x_dagger).norm(), 1e-12);
    SolverOptions o;
    o.tol = 1e-13;
    const auto sol = solve_tikhonov(inst.K, inst.y_delta, alpha, inst.R, o);
    for (Eigen::Index i = 0; i < inst.y_delta.size(); ++i) {
        // argmin 0.5 (c x - y)^2 + alpha (|x| + eta x^2 / 2)
        const double y = inst.y_delta[i];
        const double expected = sign(y) * std::max(c * std::abs(y) - alpha, 0.0) / (c * c + alpha * eta);
        EXPECT_NEAR(sol.x[i], expected, 1e-8);
    }
}

TEST(BlurProblem, PureL1AndZeroNoiseNotes) {
    const auto l1 = blur_problem(8, 2, 1.0, 0.0, 0.1, 1);
    EXPECT_EQ(l1.R.kind(), PenaltyKind::elastic_net);
    EXPECT_EQ(l1.notes.size(), 2u);
    const auto clean = blur_problem(8, 2, 1.0, 1e-3, 0.0, 1);
    EXPECT_TRUE(std::isnan(clean.epsilon_hat));
    EXPECT_THROW(blur_problem(8, 2, 1.0, -1.0, 0.1, 1), std::invalid_argument);
}
