#pragma once
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "asl/errors.hpp"

namespace asl::graph {

// Directed network over agents 0..agents-1 (the edge-list file format is
// 1-based; ids are shifted on parse).  in[k] lists the agents whose edge
// feeds agent k, sorted ascending; self-loops appear explicitly.
struct network {
    int agents = 0;
    std::vector<std::vector<int>> in;

    bool has_edge(int from, int to) const {
        const auto& v = in[to];
        return std::binary_search(v.begin(), v.end(), from);
    }
    // neighbour count excluding a self-loop
    int degree(int k) const {
        const auto& v = in[k];
        return static_cast<int>(v.size()) - (std::binary_search(v.begin(), v.end(), k) ? 1 : 0);
    }
    bool symmetric() const {
        for (int k = 0; k < agents; ++k)
            for (int l : in[k])
                if (!has_edge(k, l)) return false;
        return true;
    }
    bool all_self_loops() const {
        for (int k = 0; k < agents; ++k)
            if (!has_edge(k, k)) return false;
        return true;
    }
};

// Text format: a header line "agents N" followed by one line per directed
// edge "l k" with 1-based ids; '#' starts a comment.
inline network parse_edge_list(std::istream& is) {
    network net;
    std::string line;
    int lineno = 0;
    bool have_header = false;
    std::vector<std::vector<int>> in;
    auto fail = [&](const std::string& msg) {
        throw config_error("parse_edge_list: line " + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        if (!have_header) {
            std::string kw;
            if (!(ls >> kw)) continue; // blank
            int n = 0;
            if (kw != "agents" || !(ls >> n)) fail("expected header 'agents N'");
            if (n < 1) fail("agent count must be positive");
            std::string extra;
            if (ls >> extra) fail("trailing tokens after header");
            net.agents = n;
            in.assign(static_cast<std::size_t>(n), {});
            have_header = true;
            continue;
        }
        int from = 0, to = 0;
        if (!(ls >> from)) continue; // blank
        if (!(ls >> to)) fail("expected edge 'l k'");
        std::string extra;
        if (ls >> extra) fail("trailing tokens after edge");
        if (from < 1 || from > net.agents || to < 1 || to > net.agents) {
            fail("agent id out of range 1.." + std::to_string(net.agents));
        }
        in[static_cast<std::size_t>(to - 1)].push_back(from - 1);
    }
    if (!have_header) throw config_error("parse_edge_list: missing 'agents N' header");
    for (int k = 0; k < net.agents; ++k) {
        auto& v = in[static_cast<std::size_t>(k)];
        std::sort(v.begin(), v.end());
        if (std::adjacent_find(v.begin(), v.end()) != v.end()) {
            throw config_error("parse_edge_list: duplicate edge into agent " + std::to_string(k + 1));
        }
    }
    net.in = std::move(in);
    return net;
}

// Combination weights a(l,k): the weight agent k places on agent l's message.
// All builders return left-stochastic matrices: every column sums to 1.

// Uniform averaging over the closed in-neighbourhood.  Requires explicit
// self-loops so that the result is primitive on a strongly-connected graph.
inline Eigen::MatrixXd build_averaging(const network& net) {
    const int n = net.agents;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        const auto& nbrs = net.in[static_cast<std::size_t>(k)];
        if (nbrs.empty()) {
            throw config_error("build_averaging_matrix: agent " + std::to_string(k + 1) +
                               " has an empty neighbourhood");
        }
        if (!net.has_edge(k, k)) {
            throw config_error("build_averaging_matrix: agent " + std::to_string(k + 1) +
                               " lacks a self-loop");
        }
        const double w = 1.0 / static_cast<double>(nbrs.size());
        for (int l : nbrs) a(l, k) = w;
    }
    return a;
}

// Laplacian rule with step 1/d_max: symmetric and doubly stochastic on any
// undirected graph.  Self-loops must be present in the adjacency but do not
// count toward the degrees.
inline Eigen::MatrixXd build_laplacian(const network& net) {
    if (!net.symmetric()) {
        throw config_error("build_laplacian_matrix: adjacency is not symmetric");
    }
    if (!net.all_self_loops()) {
        throw config_error("build_laplacian_matrix: every agent needs a self-loop");
    }
    const int n = net.agents;
    int dmax = 0;
    for (int k = 0; k < n; ++k) dmax = std::max(dmax, net.degree(k));
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    if (dmax == 0) return Eigen::MatrixXd::Identity(n, n); // isolated agents
    const double w = 1.0 / static_cast<double>(dmax);
    for (int k = 0; k < n; ++k) {
        for (int l : net.in[static_cast<std::size_t>(k)]) {
            if (l != k) a(l, k) = w;
        }
        a(k, k) = 1.0 - w * static_cast<double>(net.degree(k));
    }
    return a;
}

struct network_analysis {
    Eigen::VectorXd pi;       // Perron eigenvector, entries > 0, sums to 1
    double beta2_magnitude;   // second largest eigenvalue magnitude
    double beta;              // geometric decay rate used in power envelopes
    double kappa;             // fitted envelope constant
    bool primitive;
};

namespace detail {

inline void check_left_stochastic(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols() || a.rows() < 1) {
        throw config_error("analyze_network: matrix must be square and non-empty");
    }
    for (int k = 0; k < a.cols(); ++k) {
        double col = 0;
        for (int l = 0; l < a.rows(); ++l) {
            if (a(l, k) < 0 || a(l, k) > 1) {
                throw config_error("analyze_network: entries must lie in [0,1]");
            }
            col += a(l, k);
        }
        if (std::abs(col - 1.0) > 1e-12) {
            throw config_error("analyze_network: column " + std::to_string(k + 1) +
                               " sums to " + std::to_string(col) + ", not 1");
        }
    }
}

// Strong connectivity and period of the positive pattern of a.
inline void check_primitive(const Eigen::MatrixXd& a) {
    const int n = static_cast<int>(a.rows());
    auto bfs_all = [n](auto&& next) {
        std::vector<char> seen(static_cast<std::size_t>(n), 0);
        std::queue<int> q;
        q.push(0);
        seen[0] = 1;
        int cnt = 1;
        while (!q.empty()) {
            const int u = q.front(); q.pop();
            for (int v = 0; v < n; ++v) {
                if (!seen[static_cast<std::size_t>(v)] && next(u, v)) {
                    seen[static_cast<std::size_t>(v)] = 1;
                    ++cnt;
                    q.push(v);
                }
            }
        }
        return cnt == n;
    };
    const bool fwd = bfs_all([&a](int u, int v) { return a(u, v) > 0; });
    const bool bwd = bfs_all([&a](int u, int v) { return a(v, u) > 0; });
    if (!fwd || !bwd) {
        throw config_error("analyze_network: matrix is not primitive (reducible: "
                           "the graph is not strongly connected)");
    }
    // Period = gcd over edges u->v of level(u)+1-level(v) from any BFS tree.
    std::vector<int> level(static_cast<std::size_t>(n), -1);
    std::queue<int> q;
    q.push(0);
    level[0] = 0;
    while (!q.empty()) {
        const int u = q.front(); q.pop();
        for (int v = 0; v < n; ++v) {
            if (a(u, v) > 0 && level[static_cast<std::size_t>(v)] < 0) {
                level[static_cast<std::size_t>(v)] = level[static_cast<std::size_t>(u)] + 1;
                q.push(v);
            }
        }
    }
    long long g = 0;
    for (int u = 0; u < n; ++u) {
        for (int v = 0; v < n; ++v) {
            if (a(u, v) > 0) {
                const long long d = level[static_cast<std::size_t>(u)] + 1 -
                                    level[static_cast<std::size_t>(v)];
                g = std::gcd(g, d < 0 ? -d : d);
            }
        }
    }
    if (g > 1) {
        throw config_error("analyze_network: matrix is not primitive (periodic with period " +
                           std::to_string(g) + ")");
    }
}

inline Eigen::VectorXd perron_vector(const Eigen::MatrixXd& a) {
    const int n = static_cast<int>(a.rows());
    Eigen::VectorXd v = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    Eigen::VectorXd av(n);
    for (int it = 0; it < 500000; ++it) {
        av.noalias() = a * v;
        av /= av.sum();
        const double res = (av - v).lpNorm<Eigen::Infinity>();
        v = av;
        if (res < 1e-13) {
            // final residual check against the fixed-point property
            if ((a * v - v).lpNorm<Eigen::Infinity>() < 1e-12) return v;
        }
    }
    throw numerical_error("analyze_network: Perron iteration did not converge");
}

// |second eigenvalue| of a primitive left-stochastic matrix by orthogonal
// iteration on the rank-one deflation b = a - pi*1^T (which removes the
// Perron root).  A two-column subspace captures a complex-conjugate dominant
// pair; the magnitude comes from the 2x2 projected matrix.
inline double beta2_iterative(const Eigen::MatrixXd& a, const Eigen::VectorXd& pi) {
    const int n = static_cast<int>(a.rows());
    Eigen::MatrixXd b = a - pi * Eigen::RowVectorXd::Ones(n);
    Eigen::MatrixXd q(n, 2);
    q.col(0) = Eigen::VectorXd::LinSpaced(n, 1.0, 2.0).normalized();
    q.col(1) = Eigen::VectorXd::LinSpaced(n, -1.0, 1.0).cwiseAbs();
    auto orthonormalize = [](Eigen::MatrixXd& m) {
        m.col(0).normalize();
        m.col(1) -= m.col(0) * m.col(0).dot(m.col(1));
        const double r = m.col(1).norm();
        if (r > 1e-300) m.col(1) /= r;
    };
    orthonormalize(q);
    auto top_magnitude = [](const Eigen::Matrix2d& t) {
        const double tr = t.trace();
        const double det = t.determinant();
        const double disc = tr * tr - 4.0 * det;
        if (disc < 0) return std::sqrt(std::max(det, 0.0)); // conjugate pair
        const double s = std::sqrt(disc);
        return std::max(std::abs(0.5 * (tr + s)), std::abs(0.5 * (tr - s)));
    };
    double prev = -1.0;
    int stable = 0;
    for (int it = 0; it < 100000; ++it) {
        Eigen::MatrixXd z = b * q;
        const Eigen::Matrix2d t = q.transpose() * z;
        const double est = top_magnitude(t);
        if (prev >= 0 && std::abs(est - prev) < 1e-11 * (1.0 + est)) {
            if (++stable >= 10) return est;
        } else {
            stable = 0;
        }
        prev = est;
        q = z;
        orthonormalize(q);
    }
    throw numerical_error("analyze_network: deflated iteration did not converge");
}

inline double beta2_dense(const Eigen::MatrixXd& a) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(a, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success) {
        throw numerical_error("analyze_network: eigenvalue decomposition failed");
    }
    const auto& ev = es.eigenvalues();
    // drop the eigenvalue closest to 1 (the Perron root), take the largest
    // magnitude among the rest
    int perron = 0;
    double best = std::abs(ev(0) - std::complex<double>(1.0, 0.0));
    for (int i = 1; i < ev.size(); ++i) {
        const double d = std::abs(ev(i) - std::complex<double>(1.0, 0.0));
        if (d < best) { best = d; perron = i; }
    }
    double mag = 0.0;
    for (int i = 0; i < ev.size(); ++i) {
        if (i != perron) mag = std::max(mag, std::abs(ev(i)));
    }
    return mag;
}

} // namespace detail

// Column k of a^m (m = 0 gives the identity column).
inline Eigen::VectorXd matrix_power_column(const Eigen::MatrixXd& a, int m, int k) {
    if (m < 0) throw std::invalid_argument("matrix_power_column: negative power");
    if (k < 0 || k >= a.cols()) throw std::invalid_argument("matrix_power_column: agent out of range");
    Eigen::VectorXd col = Eigen::VectorXd::Zero(a.rows());
    col(k) = 1.0;
    for (int i = 0; i < m; ++i) col = a * col;
    return col;
}

// Validates primitivity, then computes the Perron eigenvector (fixed-point
// iteration to residual < 1e-12), the second eigenvalue magnitude (dense
// decomposition up to 64 agents, deflated iteration beyond), and the fitted
// power-convergence envelope |[a^m]_{lk} - pi_l| <= kappa * beta^m with
// beta = (1+|beta2|)/2, measured over m <= 200.
inline network_analysis analyze(const Eigen::MatrixXd& a, bool force_iterative_beta2 = false) {
    detail::check_left_stochastic(a);
    detail::check_primitive(a);
    network_analysis out;
    out.primitive = true;
    out.pi = detail::perron_vector(a);
    out.beta2_magnitude = (a.rows() <= 64 && !force_iterative_beta2)
                              ? detail::beta2_dense(a)
                              : detail::beta2_iterative(a, out.pi);
    out.beta = 0.5 * (1.0 + out.beta2_magnitude);
    // envelope fit
    const int n = static_cast<int>(a.rows());
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(n, n);
    double kappa = 0.0;
    double bpow = 1.0;
    for (int m = 1; m <= 200; ++m) {
        power = a * power;
        bpow *= out.beta;
        const double dev = (power.colwise() - out.pi).cwiseAbs().maxCoeff();
        kappa = std::max(kappa, dev / bpow);
    }
    out.kappa = kappa;
    return out;
}

} // namespace asl::graph
