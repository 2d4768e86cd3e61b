#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace asl;

namespace {

models::laplace_family replicated(int agents, double e1, double e2) {
    Eigen::MatrixXd loc(agents, 2);
    for (int k = 0; k < agents; ++k) {
        loc(k, 0) = e1;
        loc(k, 1) = e2;
    }
    return models::laplace_family(loc);
}

} // namespace

TEST(McPlan, Validation) {
    montecarlo::mc_plan p;
    p.deltas = {};
    EXPECT_THROW(p.validate(), config_error);
    p.deltas = {0.0};
    EXPECT_THROW(p.validate(), config_error);
    p.deltas = {1.2};
    EXPECT_THROW(p.validate(), config_error);
    p.deltas = {1.0};
    EXPECT_NO_THROW(p.validate()); // memoryless endpoint is allowed
    p.deltas = {0.01};
    EXPECT_EQ(p.horizon_for(0.01), 1000); // ceil(10/delta) default
    p.horizon = 50;                       // shorter than 1/delta
    EXPECT_THROW(p.validate(), config_error);
    p.horizon = 0;
    p.reps = 0;
    EXPECT_THROW(p.validate(), config_error);
    p.reps = 10;
    p.workers = 0;
    EXPECT_THROW(p.validate(), config_error);
}

TEST(EstimateErrorProbability, WorkerCountDoesNotChangeResults) {
    const auto b = testhelp::canonical();
    montecarlo::mc_plan plan;
    plan.deltas = {0.1};
    plan.reps = 50;
    plan.base_seed = 42;
    plan.store_finals = true;

    plan.workers = 1;
    const auto e1 = montecarlo::estimate_error_probability(b.model, b.a, 0.1, 1, plan);
    plan.workers = 4;
    const auto e4 = montecarlo::estimate_error_probability(b.model, b.a, 0.1, 1, plan);

    EXPECT_EQ(e1.pooled_events, e4.pooled_events);
    EXPECT_DOUBLE_EQ(e1.pooled_p, e4.pooled_p);
    EXPECT_TRUE((e1.per_agent_p.array() == e4.per_agent_p.array()).all());
    EXPECT_TRUE((e1.per_theta_p.array() == e4.per_theta_p.array()).all());
    ASSERT_EQ(e1.finals.size(), 50u);
    ASSERT_EQ(e4.finals.size(), 50u);
    for (std::size_t r = 0; r < e1.finals.size(); ++r) {
        EXPECT_TRUE((e1.finals[r].array() == e4.finals[r].array()).all()) << "replica " << r;
    }

    plan.base_seed = 43; // a different seed must change the sample paths
    const auto other = montecarlo::estimate_error_probability(b.model, b.a, 0.1, 1, plan);
    bool any_diff = false;
    for (std::size_t r = 0; r < other.finals.size() && !any_diff; ++r) {
        any_diff = (other.finals[r].array() != e1.finals[r].array()).any();
    }
    EXPECT_TRUE(any_diff);
}

TEST(EstimateErrorProbability, EventDecompositionSandwich) {
    const auto b = testhelp::canonical();
    montecarlo::mc_plan plan;
    plan.deltas = {0.1};
    plan.reps = 200;
    plan.base_seed = 7;
    const auto est = montecarlo::estimate_error_probability(b.model, b.a, 0.1, 1, plan);
    ASSERT_EQ(est.per_theta_p.size(), 2);
    EXPECT_GT(est.pooled_events, 0);
    EXPECT_LE(est.per_theta_p.maxCoeff(), est.pooled_p + 1e-15);
    EXPECT_GE(est.per_theta_p.sum() + 1e-15, est.pooled_p);
    EXPECT_EQ(est.n_eff, 200 * 10);
    EXPECT_NEAR(est.pooled_p, est.per_agent_p.mean(), 1e-12);
}

TEST(EstimateErrorProbability, OneShotMatchesClosedFormTail) {
    // delta = 1 with a single step leaves exactly one log-likelihood ratio in
    // the state; for a location pair 0.2 apart the probability of a negative
    // value is exp(-0.1)/2.
    const auto fam = replicated(1, 0.1, 0.3);
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(1, 1);
    montecarlo::mc_plan plan;
    plan.deltas = {1.0};
    plan.horizon = 1;
    plan.reps = 5000;
    plan.base_seed = 2024;
    const auto est = montecarlo::estimate_error_probability(fam, a, 1.0, 1, plan);
    const double exact = 0.5 * std::exp(-0.1);
    EXPECT_NEAR(est.pooled_p, exact, 4.0 * est.pooled_se);
    EXPECT_GT(est.pooled_se, 0.0);
}

TEST(EstimateErrorProbability, ErrorFrequencyGrowsWithStepSize) {
    const auto b = testhelp::variant5();
    montecarlo::mc_plan plan;
    plan.reps = 2000;
    plan.base_seed = 5;
    const std::vector<double> grid = {0.1, 0.15, 0.2, 0.3, 0.5};
    std::vector<double> p;
    for (double d : grid) {
        plan.deltas = {d};
        p.push_back(montecarlo::estimate_error_probability(b.model, b.a, d, 1, plan).pooled_p);
    }
    int inversions = 0;
    for (std::size_t i = 1; i < p.size(); ++i) {
        if (p[i] < p[i - 1]) ++inversions;
    }
    EXPECT_LE(inversions, 1);
    EXPECT_GT(p.back(), p.front()); // the endpoints are far enough apart
}

TEST(EstimateErrorProbability, RejectsOversizedNetworks) {
    const auto fam = replicated(33, 0.1, 0.3);
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(33, 33);
    montecarlo::mc_plan plan;
    plan.deltas = {0.5};
    plan.reps = 2;
    EXPECT_THROW(montecarlo::estimate_error_probability(fam, a, 0.5, 1, plan),
                 std::invalid_argument);
    const auto ok = replicated(2, 0.1, 0.3);
    const Eigen::MatrixXd wrong_size = Eigen::MatrixXd::Identity(3, 3);
    EXPECT_THROW(montecarlo::estimate_error_probability(ok, wrong_size, 0.5, 1, plan),
                 std::invalid_argument);
}

TEST(EmpiricalMoments, ShapesAndSymmetry) {
    const auto b = testhelp::canonical();
    montecarlo::mc_plan plan;
    plan.deltas = {0.2};
    plan.reps = 40;
    plan.store_finals = true;
    const auto est = montecarlo::estimate_error_probability(b.model, b.a, 0.2, 1, plan);
    ASSERT_EQ(est.finals.size(), 40u);
    const auto em = montecarlo::empirical_steady_state_moments(est.finals);
    EXPECT_EQ(em.mean.rows(), 10);
    EXPECT_EQ(em.mean.cols(), 2);
    ASSERT_EQ(em.cov.size(), 10u);
    for (const auto& c : em.cov) {
        EXPECT_NEAR(c(0, 1), c(1, 0), 1e-15);
        EXPECT_GE(c(0, 0), 0.0);
        EXPECT_GE(c(1, 1), 0.0);
    }
    EXPECT_THROW(montecarlo::empirical_steady_state_moments({est.finals.front()}),
                 std::invalid_argument);
}

TEST(FitExponentSlope, RecoversSyntheticLine) {
    std::vector<montecarlo::slope_point> pts;
    for (double d : {0.1, 0.05, 0.02, 0.01}) {
        pts.push_back({d, std::exp(-2.0 / d + 0.3), 1000});
    }
    const auto fit = montecarlo::fit_exponent_slope(pts);
    EXPECT_NEAR(fit.slope, -2.0, 1e-12);
    EXPECT_NEAR(fit.intercept, 0.3, 1e-12);
    EXPECT_NEAR(fit.phi_hat, 2.0, 1e-12);
    EXPECT_NEAR(fit.r2, 1.0, 1e-12);
    EXPECT_EQ(fit.points_used, 4);
}

TEST(FitExponentSlope, FiltersAndThrows) {
    std::vector<montecarlo::slope_point> pts = {
        {0.1, 1e-2, 1000}, {0.05, 1e-4, 1000}, {0.02, 1e-9, 5}, // too few events
        {0.01, 0.0, 1000},                                      // empty estimate
        {0.04, 1e-5, 1000},
    };
    const auto fit = montecarlo::fit_exponent_slope(pts, 20);
    EXPECT_EQ(fit.points_used, 3);

    std::vector<montecarlo::slope_point> few = {{0.1, 1e-2, 1000}, {0.05, 1e-4, 1000}};
    EXPECT_THROW(montecarlo::fit_exponent_slope(few), numerical_error);
    std::vector<montecarlo::slope_point> flat = {
        {0.1, 1e-2, 1000}, {0.1, 1.1e-2, 1000}, {0.1, 0.9e-2, 1000}};
    EXPECT_THROW(montecarlo::fit_exponent_slope(flat), numerical_error);
}

TEST(ReversedSum, ConvergesWhileForwardFluctuates) {
    const auto b = testhelp::canonical();
    const auto cmp = montecarlo::reversed_sum_comparison(b.model, 0.1, 1, 2, 400, 99);
    ASSERT_EQ(cmp.forward.size(), 400u);
    ASSERT_EQ(cmp.reversed.size(), 400u);
    EXPECT_LT(cmp.reversed_range, 1e-3);
    EXPECT_GT(cmp.forward_range, 10.0 * cmp.reversed_range);
    // identical marginal distributions: the two sums agree at every step in
    // expectation, and exactly at step 0
    EXPECT_DOUBLE_EQ(cmp.forward.front(), cmp.reversed.front());

    EXPECT_THROW(montecarlo::reversed_sum_comparison(b.model, 1.0, 1, 2, 100, 1), config_error);
    EXPECT_THROW(montecarlo::reversed_sum_comparison(b.model, 0.1, 1, 2, 4, 1), config_error);
}
