#include <gtest/gtest.h>

#include <cmath>

#include "sharecast/preprocess.hpp"
#include "sharecast/rng.hpp"

using namespace sharecast;

TEST(FitScaler, SampleStandardDeviation) {
    Matrix a(3, 1);
    a << 1, 2, 3;
    const auto s = fit_scaler(a);
    EXPECT_DOUBLE_EQ(s.means[0], 2.0);
    EXPECT_DOUBLE_EQ(s.sds[0], 1.0);
    EXPECT_FALSE(s.constant[0]);
}

TEST(FitScaler, ConstantColumnFlagged) {
    Matrix a(3, 1);
    a << 5, 5, 5;
    const auto s = fit_scaler(a);
    EXPECT_DOUBLE_EQ(s.means[0], 5.0);
    EXPECT_DOUBLE_EQ(s.sds[0], 1.0);
    EXPECT_TRUE(s.constant[0]);
    Matrix t(2, 1);
    t << 7, -3;
    EXPECT_EQ(apply_scaler(t, s), Matrix::Zero(2, 1));
}

TEST(FitScaler, TwoColumns) {
    Matrix a(2, 2);
    a << 0, 10, 2, 30;
    const auto s = fit_scaler(a);
    EXPECT_DOUBLE_EQ(s.means[0], 1.0);
    EXPECT_DOUBLE_EQ(s.means[1], 20.0);
    EXPECT_NEAR(s.sds[0], std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(s.sds[1], 10.0 * std::sqrt(2.0), 1e-13);
}

TEST(FitScaler, NeedsTwoRows) {
    EXPECT_THROW(fit_scaler(Matrix::Ones(1, 3)), InputError);
}

TEST(ApplyScaler, SelfStandardization) {
    Rng rng(4);
    Matrix a(50, 4);
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = 3.0 * j + (j + 1) * standard_normal(rng);
    const Matrix z = apply_scaler(a, fit_scaler(a));
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        EXPECT_NEAR(z.col(j).mean(), 0.0, 1e-12);
        EXPECT_NEAR(std::sqrt((z.col(j).array() - z.col(j).mean()).square().sum() / 49.0), 1.0, 1e-12);
    }
}

TEST(ApplyScaler, OutOfRangeTestValueAndMismatch) {
    Matrix a(3, 1);
    a << 1, 2, 3;
    const auto s = fit_scaler(a);
    Matrix t(1, 1);
    t << 4;
    EXPECT_DOUBLE_EQ(apply_scaler(t, s)(0, 0), 2.0);
    EXPECT_THROW(apply_scaler(Matrix::Ones(1, 2), s), InputError);
}

TEST(ApplyScaler, NullsBecomeZero) {
    Matrix a(4, 1);
    a << 1, std::nan(""), 3, 5;
    const auto s = fit_scaler(a);
    EXPECT_DOUBLE_EQ(s.means[0], 3.0);
    const Matrix z = apply_scaler(a, s);
    EXPECT_EQ(z(1, 0), 0.0);
}

TEST(ApplyScaler, AffinePerColumnKeepsOrder) {
    Rng rng(9);
    Matrix a(20, 1);
    for (Eigen::Index i = 0; i < 20; ++i) a(i, 0) = standard_normal(rng);
    const Matrix b = (a.array() * 3.0 + 7.0).matrix();
    const Matrix za = apply_scaler(a, fit_scaler(a)), zb = apply_scaler(b, fit_scaler(b));
    EXPECT_LT((za - zb).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ScalerNoLeakage, TestRowsNeverTouchParams) {
    Matrix train(5, 2);
    train << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10;
    const auto before = fit_scaler(train);
    Matrix test = Matrix::Constant(3, 2, 1e6);
    (void)apply_scaler(test, before);
    EXPECT_EQ(fit_scaler(train), before);
}

TEST(Logit, ValuesAndDomain) {
    EXPECT_EQ(logit(0.5), 0.0);
    EXPECT_NEAR(logit(0.2918), std::log(0.2918 / 0.7082), 1e-15);
    EXPECT_NEAR(logit(0.2918), -0.88666, 1e-5);
    EXPECT_THROW(logit(1.0), InputError);
    EXPECT_THROW(logit(0.0), InputError);
    EXPECT_THROW(logit(-0.1), InputError);
}

TEST(InvLogit, ValuesSaturationAndRoundTrip) {
    EXPECT_EQ(inv_logit(0.0), 0.5);
    EXPECT_NEAR(inv_logit(logit(0.2918)), 0.2918, 1e-15);
    const double tiny = inv_logit(-50.0);
    EXPECT_GT(tiny, 0.0);
    EXPECT_LE(tiny, 1e-20);
    for (double y = 1e-6; y < 1.0 - 1e-6; y += 0.0013)
        EXPECT_LT(std::abs(inv_logit(logit(y)) - y), 1e-12);
}
