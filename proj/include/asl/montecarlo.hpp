#pragma once
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "asl/engine.hpp"
#include "asl/errors.hpp"
#include "asl/models.hpp"
#include "asl/numerics.hpp"
#include "asl/rng.hpp"

namespace asl::montecarlo {

// Replicated simulation of the log-ratio recursion
//   lambda_i = a^T ( (1-delta) lambda_{i-1} + delta x_i )
// under the true hypothesis, for estimating steady-state error probabilities
// and moments.  Replicas are seeded independently of the worker count and
// all floating-point reductions run in replica order, so results are
// bit-identical for any --workers value.

struct mc_plan {
    std::vector<double> deltas;
    long reps = 1000;
    long horizon = 0; // 0: use ceil(10/delta) per delta
    std::uint64_t base_seed = 1;
    int workers = 1;
    bool store_finals = false;

    long horizon_for(double delta) const {
        return horizon > 0 ? horizon : static_cast<long>(std::ceil(10.0 / delta));
    }
    void validate() const {
        if (deltas.empty()) throw config_error("mc_plan: no step sizes given");
        // delta = 1 is the memoryless limit of the recursion and is allowed
        // here (the engine proper keeps its open interval).
        for (double d : deltas) {
            if (!(d > 0.0 && d <= 1.0)) throw config_error("mc_plan: delta must lie in (0,1]");
            if (horizon_for(d) < static_cast<long>(std::ceil(1.0 / d))) {
                throw config_error("mc_plan: horizon " + std::to_string(horizon_for(d)) +
                                   " is shorter than 1/delta for delta = " + std::to_string(d));
            }
        }
        if (reps < 1) throw config_error("mc_plan: reps must be >= 1");
        if (workers < 1) throw config_error("mc_plan: workers must be >= 1");
    }
};

struct mc_estimate {
    double delta = 0;
    int theta0 = 0;
    long reps = 0;
    long horizon = 0;
    std::vector<int> wrong;
    Eigen::VectorXd per_agent_p;       // error frequency per agent
    Eigen::VectorXd per_agent_se;
    Eigen::VectorXd per_theta_p;       // per-hypothesis event frequency, pooled over agents
    double pooled_p = 0;               // network-pooled error frequency
    double pooled_se = 0;
    long pooled_events = 0;            // raw error count over reps x agents
    long n_eff = 0;                    // reps x agents
    std::vector<Eigen::MatrixXd> finals; // final log-ratios per replica (agents x wrong)
};

namespace detail {

// Error event of one agent row of final log-ratios: the decision rule picks
// the lowest label among the maxima, so theta0 loses to a smaller label on
// ties (lambda <= 0) but survives ties against larger labels (lambda < 0).
inline bool row_is_error(const Eigen::MatrixXd& lam, int k, const std::vector<int>& wrong,
                         int theta0) {
    for (std::size_t j = 0; j < wrong.size(); ++j) {
        const double v = lam(k, static_cast<Eigen::Index>(j));
        if (wrong[j] < theta0 ? v <= 0.0 : v < 0.0) return true;
    }
    return false;
}

struct rep_outcome {
    std::uint32_t error_mask = 0;  // bit k: agent k decided wrongly
    std::uint64_t event_mask = 0;  // bit k*W+j: hypothesis-j event at agent k
};

template <models::likelihood_model M>
inline rep_outcome run_replica(const M& model, const Eigen::MatrixXd& at, double delta,
                               int theta0, long horizon, std::uint64_t seed,
                               const std::vector<int>& wrong, Eigen::MatrixXd* final_out) {
    const int n = model.agents();
    const int w = static_cast<int>(wrong.size());
    std::mt19937_64 g(seed); // already derived per replica
    Eigen::MatrixXd lam = Eigen::MatrixXd::Zero(n, w); // uniform prior
    Eigen::MatrixXd x(n, w);
    for (long i = 0; i < horizon; ++i) {
        for (int l = 0; l < n; ++l) {
            const double xi = model.sample(l, theta0, g);
            for (int j = 0; j < w; ++j) {
                x(l, j) = model.llr(l, xi, wrong[static_cast<std::size_t>(j)], theta0);
            }
        }
        lam = at * ((1.0 - delta) * lam + delta * x).eval();
    }
    rep_outcome out;
    for (int k = 0; k < n; ++k) {
        bool err = false;
        for (int j = 0; j < w; ++j) {
            const double v = lam(k, j);
            const bool event = wrong[static_cast<std::size_t>(j)] < theta0 ? v <= 0.0 : v < 0.0;
            if (event) {
                out.event_mask |= (1ULL << (k * w + j));
                err = true;
            }
        }
        if (err) out.error_mask |= (1U << k);
    }
    if (final_out) *final_out = lam;
    return out;
}

} // namespace detail

// Estimate the probability of wrong decision at the end of the horizon,
// per agent and pooled over the network (effective sample size reps*agents).
template <models::likelihood_model M>
inline mc_estimate estimate_error_probability(const M& model, const Eigen::MatrixXd& a,
                                              double delta, int theta0, const mc_plan& plan) {
    plan.validate();
    const int n = model.agents();
    if (a.rows() != n || a.cols() != n) {
        throw std::invalid_argument("estimate_error_probability: matrix size mismatch");
    }
    const auto wrong = models::wrong_hypotheses(model.hypotheses(), theta0);
    const int w = static_cast<int>(wrong.size());
    if (n * w > 64 || n > 32) {
        throw std::invalid_argument("estimate_error_probability: network too large for the "
                                    "packed event masks (agents*wrong <= 64)");
    }
    const long horizon = plan.horizon_for(delta);
    const Eigen::MatrixXd at = a.transpose();

    std::vector<detail::rep_outcome> slots(static_cast<std::size_t>(plan.reps));
    std::vector<Eigen::MatrixXd> finals;
    if (plan.store_finals) finals.resize(static_cast<std::size_t>(plan.reps));

    auto run_range = [&](long r0, long r1) {
        for (long r = r0; r < r1; ++r) {
            Eigen::MatrixXd* fin =
                plan.store_finals ? &finals[static_cast<std::size_t>(r)] : nullptr;
            slots[static_cast<std::size_t>(r)] = detail::run_replica(
                model, at, delta, theta0, horizon,
                rng::derive_seed(plan.base_seed, static_cast<std::uint64_t>(r), 0), wrong, fin);
        }
    };
    const int workers = std::min<long>(plan.workers, plan.reps);
    if (workers <= 1) {
        run_range(0, plan.reps);
    } else {
        std::vector<std::thread> pool;
        const long chunk = (plan.reps + workers - 1) / workers;
        for (int t = 0; t < workers; ++t) {
            const long r0 = t * chunk;
            const long r1 = std::min<long>(r0 + chunk, plan.reps);
            if (r0 >= r1) break;
            pool.emplace_back(run_range, r0, r1);
        }
        for (auto& th : pool) th.join();
    }

    mc_estimate est;
    est.delta = delta;
    est.theta0 = theta0;
    est.reps = plan.reps;
    est.horizon = horizon;
    est.wrong = wrong;
    Eigen::VectorXi agent_hits = Eigen::VectorXi::Zero(n);
    Eigen::VectorXi theta_hits = Eigen::VectorXi::Zero(w);
    long pooled = 0;
    for (const auto& s : slots) {
        for (int k = 0; k < n; ++k) {
            if (s.error_mask & (1U << k)) {
                ++agent_hits(k);
                ++pooled;
            }
            for (int j = 0; j < w; ++j) {
                if (s.event_mask & (1ULL << (k * w + j))) ++theta_hits(j);
            }
        }
    }
    const double r = static_cast<double>(plan.reps);
    est.per_agent_p = agent_hits.cast<double>() / r;
    est.per_agent_se =
        (est.per_agent_p.array() * (1.0 - est.per_agent_p.array()) / r).sqrt().matrix();
    est.n_eff = plan.reps * n;
    est.pooled_events = pooled;
    est.pooled_p = static_cast<double>(pooled) / static_cast<double>(est.n_eff);
    est.pooled_se = std::sqrt(std::max(est.pooled_p * (1.0 - est.pooled_p), 0.0) /
                              static_cast<double>(est.n_eff));
    est.per_theta_p = theta_hits.cast<double>() / static_cast<double>(est.n_eff);
    est.finals = std::move(finals);
    return est;
}

// Empirical mean and covariance (per agent) of stored final log-ratios.
struct empirical_moments {
    Eigen::MatrixXd mean;              // agents x wrong
    std::vector<Eigen::MatrixXd> cov;  // per agent, wrong x wrong, unbiased
};

inline empirical_moments empirical_steady_state_moments(const std::vector<Eigen::MatrixXd>& finals) {
    if (finals.size() < 2) {
        throw std::invalid_argument("empirical_steady_state_moments: need at least 2 replicas");
    }
    const Eigen::Index n = finals.front().rows();
    const Eigen::Index w = finals.front().cols();
    empirical_moments out;
    out.mean = Eigen::MatrixXd::Zero(n, w);
    for (const auto& f : finals) out.mean += f;
    out.mean /= static_cast<double>(finals.size());
    out.cov.assign(static_cast<std::size_t>(n), Eigen::MatrixXd::Zero(w, w));
    for (const auto& f : finals) {
        for (Eigen::Index k = 0; k < n; ++k) {
            const Eigen::VectorXd d = (f.row(k) - out.mean.row(k)).transpose();
            out.cov[static_cast<std::size_t>(k)] += d * d.transpose();
        }
    }
    for (auto& c : out.cov) c /= static_cast<double>(finals.size() - 1);
    return out;
}

// Least-squares fit of log p against 1/delta; the negated slope estimates
// the decay exponent of p ~ exp(-phi/delta).  Points with too few raw error
// events are excluded as statistically empty.
struct slope_point {
    double delta;
    double p;
    long events;
};

struct exponent_fit {
    double slope;
    double intercept;
    double r2;
    int points_used;
    double phi_hat; // -slope
};

inline exponent_fit fit_exponent_slope(const std::vector<slope_point>& pts,
                                       long min_events = 20) {
    std::vector<double> x, y;
    for (const auto& p : pts) {
        if (p.events >= min_events && p.p > 0.0) {
            x.push_back(1.0 / p.delta);
            y.push_back(std::log(p.p));
        }
    }
    const int m = static_cast<int>(x.size());
    if (m < 3) {
        throw numerical_error("fit_exponent_slope: insufficient data (" + std::to_string(m) +
                              " usable points, need 3)");
    }
    double sx = 0, sy = 0;
    for (int i = 0; i < m; ++i) {
        sx += x[static_cast<std::size_t>(i)];
        sy += y[static_cast<std::size_t>(i)];
    }
    const double mx = sx / m, my = sy / m;
    double sxx = 0, sxy = 0, syy = 0;
    for (int i = 0; i < m; ++i) {
        const double dx = x[static_cast<std::size_t>(i)] - mx;
        const double dy = y[static_cast<std::size_t>(i)] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (!(sxx > 0.0)) throw numerical_error("fit_exponent_slope: degenerate abscissae");
    exponent_fit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    fit.points_used = m;
    fit.phi_hat = -fit.slope;
    return fit;
}

// Forward vs reversed geometric partial sums of the network-average
// log-likelihood ratio stream.  The forward sum weights the most recent
// term by 1 and keeps fluctuating; the reversed sum fixes the weight of
// each term at its arrival index and converges almost surely.  Both are
// driven by the same draws.
struct sum_comparison {
    std::vector<double> forward;
    std::vector<double> reversed;
    double forward_range;  // max-min over the last quarter of the run
    double reversed_range;
};

template <models::likelihood_model M>
inline sum_comparison reversed_sum_comparison(const M& model, double delta, int theta0,
                                              int theta, long steps, std::uint64_t seed) {
    if (!(delta > 0.0 && delta < 1.0)) {
        throw config_error("reversed_sum_comparison: delta must lie in (0,1)");
    }
    if (steps < 8) throw config_error("reversed_sum_comparison: need at least 8 steps");
    std::mt19937_64 g(rng::derive_seed(seed, 0, 0));
    sum_comparison out;
    out.forward.reserve(static_cast<std::size_t>(steps));
    out.reversed.reserve(static_cast<std::size_t>(steps));
    const int n = model.agents();
    double fwd = 0.0, rev = 0.0, wg = 1.0;
    for (long i = 0; i < steps; ++i) {
        double xbar = 0.0;
        for (int l = 0; l < n; ++l) {
            xbar += model.llr(l, model.sample(l, theta0, g), theta, theta0);
        }
        xbar /= n;
        fwd = (1.0 - delta) * fwd + xbar;
        rev += wg * xbar;
        wg *= (1.0 - delta);
        out.forward.push_back(fwd);
        out.reversed.push_back(rev);
    }
    auto range_tail = [&](const std::vector<double>& v) {
        const std::size_t from = v.size() - v.size() / 4;
        const auto [mn, mx] = std::minmax_element(v.begin() + static_cast<long>(from), v.end());
        return *mx - *mn;
    };
    out.forward_range = range_tail(out.forward);
    out.reversed_range = range_tail(out.reversed);
    return out;
}

} // namespace asl::montecarlo
