#include "ockjl/ocsvm.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace ockjl;
using ockjl::testing::brute_force_qp;
using ockjl::testing::gaussian_matrix;

namespace {

TEST(Ocsvm, TwoPointsNuOne) {
    Matrix X(2, 2);
    X << 0, 0, 1, 1;
    const double h = 1.5;
    const auto model = train_ocsvm(X, h, {.nu = 1.0});
    ASSERT_EQ(model.n_sv(), 2);
    EXPECT_NEAR(model.alpha(0), 0.5, 1e-12);
    EXPECT_NEAR(model.alpha(1), 0.5, 1e-12);
    const double k12 = std::exp(-2.0 / (h * h));
    EXPECT_NEAR(model.rho, 0.5 * (1.0 + k12), 1e-12);
}

TEST(Ocsvm, MatchesExhaustiveQp) {
    auto rng = make_rng(1);
    for (int trial = 0; trial < 12; ++trial) {
        const Index n = 4 + trial % 5;
        const Matrix X = gaussian_matrix(n, 2, rng);
        const double h = 0.7 + 0.2 * (trial % 4);
        const double nu = 0.2 + 0.15 * (trial % 5);
        OcsvmDiagnostics diag;
        train_ocsvm(X, h, {.nu = nu, .tol = 1e-10}, &diag);
        ASSERT_TRUE(diag.converged);
        const auto oracle = brute_force_qp(gram(X, X, h), 1.0 / (nu * static_cast<double>(n)));
        ASSERT_TRUE(std::isfinite(oracle.objective)) << "trial " << trial;
        EXPECT_NEAR(diag.objective, oracle.objective, 1e-8) << "trial " << trial;
        EXPECT_LT((diag.alpha - oracle.alpha).cwiseAbs().maxCoeff(), 1e-5) << "trial " << trial;
    }
}

TEST(Ocsvm, NuBoundsOutliersAndSupportVectors) {
    auto rng = make_rng(2);
    const Index n = 500;
    const Matrix X = gaussian_matrix(n, 3, rng);
    const double nu = 0.2;
    OcsvmDiagnostics diag;
    const auto model = train_ocsvm(X, quantile_bandwidth(X, 0.5), {.nu = nu}, &diag);
    ASSERT_TRUE(diag.converged);
    const double C = 1.0 / (nu * n);
    Index bounded = 0;
    for (Index i = 0; i < n; ++i) {
        bounded += diag.alpha(i) >= C ? 1 : 0;
    }
    EXPECT_LE(static_cast<double>(bounded) / n, nu + 1e-12);
    EXPECT_GE(static_cast<double>(model.n_sv()) / n, nu - 1e-12);
    EXPECT_NEAR(model.alpha.sum(), 1.0, 1e-12);
    EXPECT_LE(model.alpha.maxCoeff(), C + 1e-15);

    const Vector s = ocsvm_score(model, X);
    Index negative = 0;
    for (Index i = 0; i < n; ++i) {
        negative += s(i) < -1e-3 ? 1 : 0;
    }
    EXPECT_LE(static_cast<double>(negative) / n, nu + 0.01);
}

TEST(Ocsvm, ScoreLimitsAndContinuity) {
    auto rng = make_rng(3);
    const Matrix X = gaussian_matrix(60, 2, rng);
    const auto model = train_ocsvm(X, 1.0, {.nu = 0.3});
    const Eigen::RowVector2d far{1e3, -1e3};
    EXPECT_NEAR(ocsvm_score(model, far), -model.rho, 1e-15);
    const Eigen::RowVector2d x{0.1, 0.2};
    const Eigen::RowVector2d y = x + Eigen::RowVector2d{1e-7, -1e-7};
    EXPECT_NEAR(ocsvm_score(model, x), ocsvm_score(model, y), 1e-6);
    EXPECT_GT(ocsvm_score(model, Eigen::RowVector2d{0.0, 0.0}), ocsvm_score(model, Eigen::RowVector2d{4.0, 4.0}));
    EXPECT_THROW(ocsvm_score(model, Matrix::Zero(1, 3)), InvalidArgument);
}

TEST(Ocsvm, TinyCacheSameSolution) {
    auto rng = make_rng(4);
    const Matrix X = gaussian_matrix(120, 2, rng);
    OcsvmDiagnostics big, tiny;
    const auto a = train_ocsvm(X, 0.8, {.nu = 0.1}, &big);
    const auto b = train_ocsvm(X, 0.8, {.nu = 0.1, .tol = 1e-3, .max_iter = 10'000'000, .cache_bytes = 1}, &tiny);
    EXPECT_EQ(a.alpha, b.alpha);
    EXPECT_EQ(a.rho, b.rho);
    EXPECT_GE(tiny.kernel_rows, big.kernel_rows);
}

TEST(Ocsvm, IterationCapStopsEarly) {
    auto rng = make_rng(5);
    const Matrix X = gaussian_matrix(200, 2, rng);
    OcsvmDiagnostics diag;
    const auto model = train_ocsvm(X, 0.5, {.nu = 0.05, .tol = 1e-3, .max_iter = 1}, &diag);
    EXPECT_EQ(diag.iterations, 1);
    EXPECT_FALSE(diag.converged);
    EXPECT_NEAR(model.alpha.sum(), 1.0, 1e-12);
}

TEST(Ocsvm, Errors) {
    auto rng = make_rng(6);
    const Matrix X = gaussian_matrix(10, 2, rng);
    EXPECT_THROW(train_ocsvm(X, 1.0, {.nu = 0.0}), InvalidArgument);
    EXPECT_THROW(train_ocsvm(X, 1.0, {.nu = 1.5}), InvalidArgument);
    EXPECT_THROW(train_ocsvm(X, -1.0), InvalidArgument);
    EXPECT_THROW(train_ocsvm(X.topRows(1), 1.0), InvalidArgument);
}

TEST(OcsvmBytes, FileLength) {
    OcsvmModel m;
    m.support_vectors = Matrix::Zero(1000, 20);
    m.alpha = Vector::Zero(1000);
    EXPECT_EQ(ocsvm_bytes(m), 13u + 8u * (1000 * 21 + 2));
    m.support_vectors = Matrix::Zero(1, 1);
    m.alpha = Vector::Zero(1);
    EXPECT_EQ(ocsvm_bytes(m), 13u + 32u);
}

} // namespace
