#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "asl/numerics.hpp"
#include "asl/rng.hpp"

using asl::num::bisect;
using asl::num::compensated_sum;
using asl::num::integrate;
using asl::num::integrate_panels;
using asl::num::log_sum_exp;
using asl::num::maximize;

TEST(Integrate, PolynomialExact) {
    const auto q = integrate([](double x) { return x * x; }, 0.0, 1.0);
    EXPECT_TRUE(q.converged);
    EXPECT_NEAR(q.value, 1.0 / 3.0, 1e-14);
}

TEST(Integrate, SineOverHalfPeriod) {
    const auto q = integrate([](double x) { return std::sin(x); }, 0.0, M_PI, 1e-13, 1e-12);
    EXPECT_NEAR(q.value, 2.0, 1e-12);
}

TEST(Integrate, PeakedIntegrandRefines) {
    // Narrow Gaussian bump: forces adaptive splitting but stays integrable.
    const auto q = integrate([](double x) { return std::exp(-500.0 * x * x); }, -1.0, 1.0,
                             1e-13, 1e-12);
    EXPECT_NEAR(q.value, std::sqrt(M_PI / 500.0), 1e-11);
    EXPECT_GT(q.evaluations, 15);
}

TEST(Integrate, BudgetExhaustionThrows) {
    // |x|^(-1/2)-style spike cannot converge with a single interval allowed.
    EXPECT_THROW(integrate([](double x) { return 1.0 / std::sqrt(std::abs(x) + 1e-300); },
                           -1.0, 1.0, 1e-15, 1e-15, 1),
                 asl::numerical_error);
}

TEST(IntegratePanels, SplitsMatchWholeInterval) {
    auto f = [](double x) { return std::abs(x); }; // kink at 0
    const auto whole = integrate_panels(f, {-2.0, 0.0, 3.0});
    EXPECT_NEAR(whole.value, 2.0 + 4.5, 1e-12);
}

TEST(Bisect, FindsCosineRoot) {
    const auto r = bisect([](double x) { return std::cos(x); }, 0.0, 2.0, 1e-14);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.x, M_PI / 2.0, 1e-13);
}

TEST(Bisect, AcceptsEndpointRoot) {
    const auto r = bisect([](double x) { return x; }, 0.0, 1.0, 1e-14);
    EXPECT_DOUBLE_EQ(r.x, 0.0);
}

TEST(Bisect, ThrowsWithoutBracket) {
    EXPECT_THROW(bisect([](double x) { return x * x + 1.0; }, -1.0, 1.0, 1e-12),
                 asl::numerical_error);
}

TEST(Maximize, ConcaveParabola) {
    const auto r = maximize([](double x) { return -(x - 1.3) * (x - 1.3); }, 0.0, 3.0, 1e-12);
    EXPECT_NEAR(r.x, 1.3, 1e-9);
}

TEST(LogSumExp, MatchesDirectSum) {
    const double v[3] = {std::log(0.2), std::log(0.3), std::log(0.5)};
    EXPECT_NEAR(log_sum_exp(v, 3), 0.0, 1e-15);
}

TEST(LogSumExp, StableUnderLargeShift) {
    const double v[2] = {1000.0, 1000.0};
    EXPECT_NEAR(log_sum_exp(v, 2), 1000.0 + std::log(2.0), 1e-12);
}

TEST(CompensatedSum, RecoversCancelledUnit) {
    EXPECT_DOUBLE_EQ(compensated_sum({1e16, 1.0, -1e16}), 1.0);
}

TEST(SeedDerivation, DistinguishesCounters) {
    const auto s = asl::rng::derive_seed(1, 2, 3);
    EXPECT_EQ(s, asl::rng::derive_seed(1, 2, 3));
    EXPECT_NE(s, asl::rng::derive_seed(1, 3, 2));
    EXPECT_NE(s, asl::rng::derive_seed(2, 2, 3));
    EXPECT_NE(s, asl::rng::derive_seed(1, 2, 4));
}

TEST(Rng, Uniform01InHalfOpenInterval) {
    std::mt19937_64 g(7);
    for (int i = 0; i < 10000; ++i) {
        const double u = asl::rng::uniform01(g);
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
    }
}

TEST(Rng, LaplaceMomentsMatch) {
    std::mt19937_64 g(11);
    const int n = 200000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        const double x = asl::rng::laplace(g);
        s += x;
        s2 += x * x;
    }
    EXPECT_NEAR(s / n, 0.0, 0.02);     // mean 0
    EXPECT_NEAR(s2 / n, 2.0, 0.05);    // variance 2 for unit scale
}

TEST(Rng, NormalMomentsMatch) {
    std::mt19937_64 g(13);
    const int n = 200000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        const double x = asl::rng::normal(g);
        s += x;
        s2 += x * x;
    }
    EXPECT_NEAR(s / n, 0.0, 0.02);
    EXPECT_NEAR(s2 / n, 1.0, 0.02);
}
