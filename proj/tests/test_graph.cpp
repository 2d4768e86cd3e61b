#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace asl;

TEST(ParseEdgeList, CanonicalTopology) {
    const auto net = testhelp::load_net("canonical10.edges");
    EXPECT_EQ(net.agents, 10);
    EXPECT_TRUE(net.symmetric());
    EXPECT_TRUE(net.all_self_loops());
    const std::vector<int> closed_sizes = {3, 5, 8, 5, 8, 9, 2, 2, 5, 7};
    for (int k = 0; k < 10; ++k) {
        EXPECT_EQ(static_cast<int>(net.in[static_cast<std::size_t>(k)].size()),
                  closed_sizes[static_cast<std::size_t>(k)])
            << "agent " << k + 1;
    }
}

TEST(ParseEdgeList, RejectsDuplicateEdge) {
    std::istringstream in("agents 2\n1 1\n2 2\n1 2\n1 2\n");
    EXPECT_THROW(graph::parse_edge_list(in), config_error);
}

TEST(ParseEdgeList, RejectsOutOfRangeId) {
    std::istringstream in("agents 2\n1 3\n");
    EXPECT_THROW(graph::parse_edge_list(in), config_error);
}

TEST(ParseEdgeList, RequiresHeader) {
    std::istringstream in("1 2\n");
    EXPECT_THROW(graph::parse_edge_list(in), config_error);
}

TEST(BuildAveraging, UniformOverClosedNeighbourhood) {
    const auto net = testhelp::load_net("canonical10.edges");
    const Eigen::MatrixXd a = graph::build_averaging(net);
    for (int k = 0; k < net.agents; ++k) {
        EXPECT_NEAR(a.col(k).sum(), 1.0, 1e-15);
        const double w = 1.0 / static_cast<double>(net.in[static_cast<std::size_t>(k)].size());
        for (int l : net.in[static_cast<std::size_t>(k)]) EXPECT_DOUBLE_EQ(a(l, k), w);
    }
}

TEST(BuildAveraging, RequiresSelfLoops) {
    std::istringstream in("agents 2\n1 2\n2 1\n1 1\n");
    const auto net = graph::parse_edge_list(in);
    EXPECT_THROW(graph::build_averaging(net), config_error);
}

TEST(BuildLaplacian, StochasticWithCorrectDiagonal) {
    const auto net = testhelp::load_net("canonical10.edges");
    const Eigen::MatrixXd a = graph::build_laplacian(net);
    const int dmax = 8; // agent 6 has the largest open neighbourhood
    for (int k = 0; k < net.agents; ++k) {
        EXPECT_NEAR(a.col(k).sum(), 1.0, 1e-15);
        EXPECT_NEAR(a(k, k), 1.0 - static_cast<double>(net.degree(k)) / dmax, 1e-15);
    }
    EXPECT_TRUE(a.isApprox(a.transpose(), 1e-15)); // symmetric build on a symmetric graph
}

TEST(BuildLaplacian, RejectsAsymmetricNetwork) {
    std::istringstream in("agents 2\n1 1\n2 2\n1 2\n");
    const auto net = graph::parse_edge_list(in);
    EXPECT_THROW(graph::build_laplacian(net), config_error);
}

TEST(Analyze, CanonicalAveragingSpectrum) {
    const auto b = testhelp::canonical();
    EXPECT_TRUE(b.na.primitive);
    EXPECT_NEAR(b.na.pi.sum(), 1.0, 1e-12);
    EXPECT_GT(b.na.pi.minCoeff(), 0.0);
    EXPECT_LT((b.a * b.na.pi - b.na.pi).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(b.na.beta2_magnitude, 0.610614, 1e-5);
    EXPECT_NEAR(b.na.beta, (1.0 + b.na.beta2_magnitude) / 2.0, 1e-15);
    EXPECT_GT(b.na.kappa, 0.0);
}

TEST(Analyze, PowerDeviationEnvelopeHolds) {
    const auto b = testhelp::canonical();
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(10, 10);
    for (int m = 1; m <= 200; ++m) {
        power = b.a * power;
        const double dev = (power.colwise() - b.na.pi).cwiseAbs().maxCoeff();
        EXPECT_LE(dev, b.na.kappa * std::pow(b.na.beta, m) + 1e-12) << "m=" << m;
    }
}

TEST(Analyze, IterativeMatchesDenseSecondEigenvalue) {
    const auto net = testhelp::load_net("canonical10.edges");
    const Eigen::MatrixXd a = graph::build_averaging(net);
    const auto dense = graph::analyze(a, false);
    const auto iter = graph::analyze(a, true);
    EXPECT_NEAR(dense.beta2_magnitude, iter.beta2_magnitude, 1e-8);
}

TEST(Analyze, LaplacianPolicySpectrum) {
    const auto b = testhelp::canonical("laplacian");
    // symmetric doubly-stochastic matrix: uniform Perron weights
    for (int k = 0; k < 10; ++k) EXPECT_NEAR(b.na.pi(k), 0.1, 1e-12);
    EXPECT_LT(b.na.beta2_magnitude, 1.0);
}

TEST(Analyze, DetectsReducibleNetwork) {
    std::istringstream in("agents 4\n1 1\n2 2\n3 3\n4 4\n1 2\n2 1\n3 4\n4 3\n");
    const auto net = graph::parse_edge_list(in);
    const Eigen::MatrixXd a = graph::build_averaging(net);
    try {
        graph::analyze(a);
        FAIL() << "expected config_error";
    } catch (const config_error& e) {
        EXPECT_NE(std::string(e.what()).find("reducible"), std::string::npos);
    }
}

TEST(Analyze, DetectsPeriodicNetwork) {
    // 2-cycle without self-loops: period 2
    Eigen::MatrixXd a(2, 2);
    a << 0, 1, 1, 0;
    try {
        graph::analyze(a);
        FAIL() << "expected config_error";
    } catch (const config_error& e) {
        EXPECT_NE(std::string(e.what()).find("periodic"), std::string::npos);
    }
}

TEST(MatrixPowerColumn, MatchesExplicitPowers) {
    const auto b = testhelp::canonical();
    const Eigen::VectorXd e3 = graph::matrix_power_column(b.a, 0, 3);
    EXPECT_DOUBLE_EQ(e3(3), 1.0);
    EXPECT_NEAR(e3.sum(), 1.0, 1e-15);
    const Eigen::VectorXd a2 = graph::matrix_power_column(b.a, 2, 0);
    EXPECT_TRUE(a2.isApprox((b.a * b.a).col(0), 1e-14));
}
