#pragma once
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <concepts>
#include <istream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "asl/errors.hpp"
#include "asl/numerics.hpp"
#include "asl/rng.hpp"

namespace asl::models {

// Wrong-hypothesis bookkeeping: ascending labels 1..H with theta0 removed.
// Analysis vectors and log-ratio matrices are indexed in this order.
inline std::vector<int> wrong_hypotheses(int hypotheses, int theta0) {
    if (hypotheses < 2) throw std::invalid_argument("wrong_hypotheses: need at least 2 hypotheses");
    if (theta0 < 1 || theta0 > hypotheses) {
        throw std::invalid_argument("wrong_hypotheses: theta0 out of range");
    }
    std::vector<int> w;
    w.reserve(static_cast<std::size_t>(hypotheses - 1));
    for (int th = 1; th <= hypotheses; ++th) {
        if (th != theta0) w.push_back(th);
    }
    return w;
}

// First and second moments of a pair of log-likelihood ratios under the true
// hypothesis: E[x(theta_a)], E[x(theta_b)], and their covariance.
struct llr_moment_result {
    double mean_a;
    double mean_b;
    double cov;
};

// A likelihood family assigns each (agent, hypothesis) pair an observation
// distribution.  Agents are 0-based; hypotheses are labelled 1..H.  The
// log-likelihood ratio convention is x = log L(xi|theta0) - log L(xi|theta),
// evaluated with data drawn under theta0, so E[x] is the KL divergence
// d(theta) between the theta0- and theta-models of that agent.
template <class M>
concept likelihood_model = requires(const M& m, int k, int th, double xi, double t,
                                    std::mt19937_64& g) {
    { m.agents() } -> std::convertible_to<int>;
    { m.hypotheses() } -> std::convertible_to<int>;
    { m.sample(k, th, g) } -> std::convertible_to<double>;
    { m.log_likelihood(k, xi, th) } -> std::convertible_to<double>;
    { m.llr(k, xi, th, th) } -> std::convertible_to<double>;
    { m.kl(k, th, th) } -> std::convertible_to<double>;
    { m.lmgf(k, t, th, th) } -> std::convertible_to<double>;
    { m.llr_moments(k, th, th, th) } -> std::convertible_to<llr_moment_result>;
    { m.llr_bound(k, th, th) } -> std::convertible_to<double>;
};

namespace detail {

inline void check_locations(const Eigen::MatrixXd& loc, const char* family) {
    if (loc.rows() < 1 || loc.cols() < 2) {
        throw config_error(std::string(family) + ": need at least 1 agent and 2 hypotheses");
    }
    if (!loc.allFinite()) {
        throw config_error(std::string(family) + ": locations must be finite");
    }
}

struct pair_guard {
    // common argument validation for hypothesis-pair operations
    static void check(const Eigen::MatrixXd& loc, int k, int theta, int theta0,
                      const char* op) {
        if (k < 0 || k >= loc.rows()) {
            throw std::invalid_argument(std::string(op) + ": agent out of range");
        }
        if (theta < 1 || theta > loc.cols() || theta0 < 1 || theta0 > loc.cols()) {
            throw std::invalid_argument(std::string(op) + ": hypothesis out of range");
        }
        if (theta == theta0) {
            throw std::invalid_argument(std::string(op) +
                                        ": degenerate hypothesis pair (theta == theta0)");
        }
    }
};

} // namespace detail

// Laplace observation family with unit scale: density 0.5*exp(-|xi - e|)
// around the per-(agent, hypothesis) location e.  The log-likelihood ratio
// x = |xi - e(theta)| - |xi - e(theta0)| is bounded by |Delta| with
// Delta = e(theta) - e(theta0), and its distribution under theta0 depends on
// Delta only through |Delta|: point masses 0.5 at +|Delta| and
// 0.5*exp(-|Delta|) at -|Delta|, plus the density 0.25*exp((x-|Delta|)/2)
// in between.  All closed forms below follow from that case analysis.
class laplace_family {
public:
    explicit laplace_family(Eigen::MatrixXd locations) : loc_(std::move(locations)) {
        detail::check_locations(loc_, "laplace_family");
    }

    int agents() const { return static_cast<int>(loc_.rows()); }
    int hypotheses() const { return static_cast<int>(loc_.cols()); }
    double location(int k, int theta) const { return loc_(k, theta - 1); }

    double sample(int k, int theta, std::mt19937_64& g) const {
        return loc_(k, theta - 1) + rng::laplace(g);
    }

    double log_likelihood(int k, double xi, int theta) const {
        constexpr double log_half = -0.6931471805599453094;
        return log_half - std::abs(xi - loc_(k, theta - 1));
    }

    double llr(int k, double xi, int theta, int theta0) const {
        detail::pair_guard::check(loc_, k, theta, theta0, "llr");
        return std::abs(xi - loc_(k, theta - 1)) - std::abs(xi - loc_(k, theta0 - 1));
    }

    double kl(int k, int theta0, int theta) const {
        detail::pair_guard::check(loc_, k, theta, theta0, "kl");
        const double d = std::abs(loc_(k, theta - 1) - loc_(k, theta0 - 1));
        return d + std::exp(-d) - 1.0;
    }

    // Log moment generating function of x under theta0; finite for every t
    // because x is bounded.  Assembled in log space so large |t| cannot
    // overflow, with a series guard for the removable singularity of the
    // continuous part at t = -1/2.
    double lmgf(int k, double t, int theta0, int theta) const {
        detail::pair_guard::check(loc_, k, theta, theta0, "lmgf");
        const double d = std::abs(loc_(k, theta - 1) - loc_(k, theta0 - 1));
        if (d == 0.0) return 0.0; // identical models: x is identically zero
        constexpr double log_half = -0.6931471805599453094;
        const double log_mass_hi = log_half + d * t;           // mass 1/2 at +d
        const double log_mass_lo = log_half - d * (t + 1.0);   // mass e^{-d}/2 at -d
        const double u = t + 0.5;
        double log_cont; // continuous part: (1/2) e^{-d/2} sinh(d u) / u
        if (std::abs(u) < 1e-6) {
            const double du2 = d * d * u * u;
            const double series = d * (1.0 + du2 / 6.0 + du2 * du2 / 120.0);
            log_cont = log_half - 0.5 * d + std::log(series);
        } else {
            const double x = d * std::abs(u); // sinh(du)/u is even in u
            // log(sinh(x)) = x + log1p(-e^{-2x}) - log 2
            log_cont = log_half - 0.5 * d + x + std::log1p(-std::exp(-2.0 * x)) -
                       0.6931471805599453094 - std::log(std::abs(u));
        }
        const double terms[3] = {log_mass_hi, log_mass_lo, log_cont};
        return num::log_sum_exp(terms, 3);
    }

    // Means and covariance of (x(theta_a), x(theta_b)) under theta0, by
    // adaptive quadrature over the observation, split at the density and
    // absolute-value kinks.  Tails are truncated where the density falls
    // below 1e-19 of its peak.
    llr_moment_result llr_moments(int k, int theta0, int theta_a, int theta_b) const {
        detail::pair_guard::check(loc_, k, theta_a, theta0, "llr_moments");
        detail::pair_guard::check(loc_, k, theta_b, theta0, "llr_moments");
        const double e0 = loc_(k, theta0 - 1);
        const double ea = loc_(k, theta_a - 1);
        const double eb = loc_(k, theta_b - 1);
        std::vector<double> brk = {e0, ea, eb};
        std::sort(brk.begin(), brk.end());
        brk.erase(std::unique(brk.begin(), brk.end()), brk.end());
        brk.insert(brk.begin(), brk.front() - 45.0);
        brk.push_back(brk.back() + 45.0);
        auto density = [e0](double xi) { return 0.5 * std::exp(-std::abs(xi - e0)); };
        auto xa = [&](double xi) { return std::abs(xi - ea) - std::abs(xi - e0); };
        auto xb = [&](double xi) { return std::abs(xi - eb) - std::abs(xi - e0); };
        const double ma =
            num::integrate_panels([&](double xi) { return xa(xi) * density(xi); }, brk).value;
        const double mb =
            num::integrate_panels([&](double xi) { return xb(xi) * density(xi); }, brk).value;
        const double cross =
            num::integrate_panels(
                [&](double xi) { return (xa(xi) - ma) * (xb(xi) - mb) * density(xi); }, brk)
                .value;
        return {ma, mb, cross};
    }

    // sup |x| for the pair; the saturated branches of the case analysis.
    double llr_bound(int k, int theta0, int theta) const {
        detail::pair_guard::check(loc_, k, theta, theta0, "llr_bound");
        return std::abs(loc_(k, theta - 1) - loc_(k, theta0 - 1));
    }

private:
    Eigen::MatrixXd loc_;
};

// Unit-variance Gaussian family: an extension used for cross-checks.  Its
// log-likelihood ratio under theta0 is Gaussian with mean d = Delta^2/2 and
// variance 2d, giving the exact lmgf d*t*(t+1).
class gaussian_family {
public:
    explicit gaussian_family(Eigen::MatrixXd means) : loc_(std::move(means)) {
        detail::check_locations(loc_, "gaussian_family");
    }

    int agents() const { return static_cast<int>(loc_.rows()); }
    int hypotheses() const { return static_cast<int>(loc_.cols()); }
    double location(int k, int theta) const { return loc_(k, theta - 1); }

    double sample(int k, int theta, std::mt19937_64& g) const {
        return loc_(k, theta - 1) + rng::normal(g);
    }

    double log_likelihood(int k, double xi, int theta) const {
        constexpr double log_inv_sqrt_2pi = -0.9189385332046727418;
        const double z = xi - loc_(k, theta - 1);
        return log_inv_sqrt_2pi - 0.5 * z * z;
    }

    double llr(int k, double xi, int theta, int theta0) const {
        detail::pair_guard::check(loc_, k, theta, theta0, "llr");
        const double za = xi - loc_(k, theta - 1);
        const double z0 = xi - loc_(k, theta0 - 1);
        return 0.5 * (za * za - z0 * z0);
    }

    double kl(int k, int theta0, int theta) const {
        detail::pair_guard::check(loc_, k, theta, theta0, "kl");
        const double delta = loc_(k, theta - 1) - loc_(k, theta0 - 1);
        return 0.5 * delta * delta;
    }

    double lmgf(int k, double t, int theta0, int theta) const {
        detail::pair_guard::check(loc_, k, theta, theta0, "lmgf");
        const double d = kl(k, theta0, theta);
        const double v = d * t * (t + 1.0);
        if (!std::isfinite(v)) {
            throw numerical_error("gaussian_family: lmgf overflow at t=" + std::to_string(t));
        }
        return v;
    }

    llr_moment_result llr_moments(int k, int theta0, int theta_a, int theta_b) const {
        detail::pair_guard::check(loc_, k, theta_a, theta0, "llr_moments");
        detail::pair_guard::check(loc_, k, theta_b, theta0, "llr_moments");
        const double e0 = loc_(k, theta0 - 1);
        const double ea = loc_(k, theta_a - 1);
        const double eb = loc_(k, theta_b - 1);
        auto density = [e0](double xi) {
            constexpr double inv_sqrt_2pi = 0.3989422804014326779;
            const double z = xi - e0;
            return inv_sqrt_2pi * std::exp(-0.5 * z * z);
        };
        auto xa = [&](double xi) {
            const double za = xi - ea, z0 = xi - e0;
            return 0.5 * (za * za - z0 * z0);
        };
        auto xb = [&](double xi) {
            const double zb = xi - eb, z0 = xi - e0;
            return 0.5 * (zb * zb - z0 * z0);
        };
        const std::vector<double> brk = {e0 - 40.0, e0, e0 + 40.0};
        const double ma =
            num::integrate_panels([&](double xi) { return xa(xi) * density(xi); }, brk).value;
        const double mb =
            num::integrate_panels([&](double xi) { return xb(xi) * density(xi); }, brk).value;
        const double cross =
            num::integrate_panels(
                [&](double xi) { return (xa(xi) - ma) * (xb(xi) - mb) * density(xi); }, brk)
                .value;
        return {ma, mb, cross};
    }

    double llr_bound(int k, int theta0, int theta) const {
        detail::pair_guard::check(loc_, k, theta, theta0, "llr_bound");
        const double delta = loc_(k, theta - 1) - loc_(k, theta0 - 1);
        return delta == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }

private:
    Eigen::MatrixXd loc_;
};

static_assert(likelihood_model<laplace_family>);
static_assert(likelihood_model<gaussian_family>);

// Model assignment table: one row per block, "agent_range hypothesis
// location", e.g. "1-3 2 0.1" assigns location 0.1 to hypothesis 2 for
// agents 1 through 3.  Every (agent, hypothesis) pair must be covered
// exactly once; the hypothesis count is the largest label seen.
inline Eigen::MatrixXd parse_model_table(std::istream& is, int agents) {
    if (agents < 1) throw std::invalid_argument("parse_model_table: agent count must be positive");
    struct row { int lo, hi, theta; double loc; };
    std::vector<row> rows;
    std::string line;
    int lineno = 0;
    int hyp_max = 0;
    auto fail = [&](const std::string& msg) {
        throw config_error("parse_model_table: line " + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string range;
        if (!(ls >> range)) continue; // blank
        int theta = 0;
        double loc = 0;
        if (!(ls >> theta >> loc)) fail("expected 'agent_range hypothesis location'");
        std::string extra;
        if (ls >> extra) fail("trailing tokens");
        int lo = 0, hi = 0;
        const auto dash = range.find('-');
        try {
            if (dash == std::string::npos) {
                lo = hi = std::stoi(range);
            } else {
                lo = std::stoi(range.substr(0, dash));
                hi = std::stoi(range.substr(dash + 1));
            }
        } catch (const std::exception&) {
            fail("malformed agent range '" + range + "'");
        }
        if (lo < 1 || hi > agents || lo > hi) fail("agent range outside 1.." + std::to_string(agents));
        if (theta < 1) fail("hypothesis labels start at 1");
        if (!std::isfinite(loc)) fail("location must be finite");
        rows.push_back({lo, hi, theta, loc});
        hyp_max = std::max(hyp_max, theta);
    }
    if (hyp_max < 2) throw config_error("parse_model_table: need at least 2 hypotheses");
    Eigen::MatrixXd loc(agents, hyp_max);
    Eigen::Matrix<char, Eigen::Dynamic, Eigen::Dynamic> seen(agents, hyp_max);
    seen.setZero();
    for (const auto& r : rows) {
        for (int k = r.lo; k <= r.hi; ++k) {
            if (seen(k - 1, r.theta - 1)) {
                throw config_error("parse_model_table: duplicate assignment for agent " +
                                   std::to_string(k) + " hypothesis " + std::to_string(r.theta));
            }
            seen(k - 1, r.theta - 1) = 1;
            loc(k - 1, r.theta - 1) = r.loc;
        }
    }
    for (int k = 0; k < agents; ++k) {
        for (int th = 0; th < hyp_max; ++th) {
            if (!seen(k, th)) {
                throw config_error("parse_model_table: missing location for agent " +
                                   std::to_string(k + 1) + " hypothesis " + std::to_string(th + 1));
            }
        }
    }
    return loc;
}

} // namespace asl::models
