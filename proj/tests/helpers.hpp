#pragma once
#include <filesystem>
#include <string>
#include <utility>

#include "asl/asl.hpp"

// Shared fixtures: the benchmark networks and observation models shipped in
// configs/, loaded through the public file loaders.
namespace testhelp {

inline std::filesystem::path config_dir() { return std::filesystem::path(ASL_CONFIG_DIR); }

inline asl::graph::network load_net(const std::string& name) {
    return asl::io::load_network(config_dir() / name);
}

inline Eigen::MatrixXd load_table(const std::string& name, int agents) {
    return asl::io::load_model_table(config_dir() / name, agents);
}

struct bench {
    asl::graph::network net;
    Eigen::MatrixXd a;
    asl::graph::network_analysis na;
    asl::models::laplace_family model;
};

inline bench make_bench(const std::string& edges, const std::string& table,
                        const std::string& policy = "averaging") {
    asl::graph::network net = load_net(edges);
    Eigen::MatrixXd a = policy == "laplacian" ? asl::graph::build_laplacian(net)
                                              : asl::graph::build_averaging(net);
    asl::graph::network_analysis na = asl::graph::analyze(a);
    asl::models::laplace_family model(load_table(table, net.agents));
    return {std::move(net), std::move(a), std::move(na), std::move(model)};
}

// 10-agent benchmark with the narrow location table.
inline bench canonical(const std::string& policy = "averaging") {
    return make_bench("canonical10.edges", "table1.model", policy);
}

// Same topology, wide (x10) locations.
inline bench canonical_wide(const std::string& policy = "averaging") {
    return make_bench("canonical10.edges", "table1_wide.model", policy);
}

// Reduced 5-agent ring for fast decay-law runs.
inline bench variant5() { return make_bench("ring5.edges", "variant5.model"); }

} // namespace testhelp
