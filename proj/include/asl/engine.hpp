#pragma once
#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "asl/errors.hpp"
#include "asl/models.hpp"
#include "asl/numerics.hpp"

namespace asl::engine {

enum class strategy_kind { traditional, adaptive, adaptive_flattened };

// 'adaptive' runs the constant-step-size social learning recursion with
// prior/data exponents (1-delta, delta); 'adaptive_flattened' flattens the
// prior to mu^(1-delta) and then applies a plain Bayesian update (exponents
// (1-delta, 1)); 'traditional' is plain Bayesian updating (1, 1).
struct strategy {
    strategy_kind kind = strategy_kind::adaptive;
    double delta = 0.1;

    void validate() const {
        if (kind != strategy_kind::traditional && !(delta > 0.0 && delta < 1.0)) {
            throw config_error("strategy: delta must lie in (0,1) for adaptive kinds");
        }
    }
    // (prior weight, data weight) of the log-domain update
    std::pair<double, double> weights() const {
        switch (kind) {
            case strategy_kind::traditional:        return {1.0, 1.0};
            case strategy_kind::adaptive:           return {1.0 - delta, delta};
            case strategy_kind::adaptive_flattened: return {1.0 - delta, 1.0};
        }
        throw std::invalid_argument("strategy: unknown kind");
    }
};

inline const char* strategy_name(strategy_kind k) {
    switch (k) {
        case strategy_kind::traditional:        return "traditional";
        case strategy_kind::adaptive:           return "adaptive";
        case strategy_kind::adaptive_flattened: return "adaptive-flattened";
    }
    return "?";
}

// Network beliefs in log form, one row per agent, one column per hypothesis
// label 1..H.  Rows are kept with their maximum pinned at 0; probabilities
// are materialized on demand.
struct belief_state {
    Eigen::MatrixXd logb; // agents x hypotheses
    int step = 0;

    static belief_state uniform(int agents, int hypotheses) {
        if (agents < 1 || hypotheses < 2) {
            throw std::invalid_argument("belief_state: need >=1 agent and >=2 hypotheses");
        }
        belief_state s;
        s.logb = Eigen::MatrixXd::Zero(agents, hypotheses);
        return s;
    }
    static belief_state from_beliefs(const Eigen::MatrixXd& mu) {
        belief_state s;
        if ((mu.array() <= 0.0).any()) {
            throw std::invalid_argument("belief_state: beliefs must be strictly positive");
        }
        s.logb = mu.array().log();
        for (int k = 0; k < s.logb.rows(); ++k) s.logb.row(k).array() -= s.logb.row(k).maxCoeff();
        return s;
    }
    Eigen::MatrixXd beliefs() const {
        Eigen::MatrixXd mu = logb;
        for (int k = 0; k < mu.rows(); ++k) {
            mu.row(k).array() -= mu.row(k).maxCoeff();
            mu.row(k) = mu.row(k).array().exp();
            mu.row(k) /= mu.row(k).sum();
        }
        return mu;
    }
    // log-belief ratios log mu(theta0)/log mu(theta) for the wrong
    // hypotheses, in ascending label order
    Eigen::MatrixXd log_ratios(int theta0) const {
        const int h = static_cast<int>(logb.cols());
        Eigen::MatrixXd lam(logb.rows(), h - 1);
        int c = 0;
        for (int th = 1; th <= h; ++th) {
            if (th == theta0) continue;
            lam.col(c++) = logb.col(theta0 - 1) - logb.col(th - 1);
        }
        return lam;
    }
};

namespace detail {

inline Eigen::VectorXd normalize_log_row(Eigen::VectorXd v) {
    const double lse = num::log_sum_exp(v.data(), static_cast<std::size_t>(v.size()));
    v.array() -= lse;
    return v.array().exp();
}

inline void check_rows(const Eigen::VectorXd& mu, const Eigen::VectorXd& lik, const char* op) {
    if (mu.size() != lik.size() || mu.size() < 2) {
        throw std::invalid_argument(std::string(op) + ": row sizes disagree");
    }
    if ((mu.array() <= 0.0).any()) {
        throw std::invalid_argument(std::string(op) + ": prior must be strictly positive");
    }
    if ((lik.array() <= 0.0).any() || !lik.allFinite()) {
        throw numerical_error(std::string(op) +
                              ": zero likelihood at the observation (support violation)");
    }
}

} // namespace detail

// Single-agent update stage, probability in / probability out:
// psi ∝ mu^(1-delta) * L^delta.  Computed in log space.
inline Eigen::VectorXd adaptive_update(const Eigen::VectorXd& mu, const Eigen::VectorXd& lik,
                                       double delta) {
    detail::check_rows(mu, lik, "adaptive_update");
    if (!(delta > 0.0 && delta < 1.0)) {
        throw std::invalid_argument("adaptive_update: delta must lie in (0,1)");
    }
    return detail::normalize_log_row((1.0 - delta) * mu.array().log() +
                                     delta * lik.array().log());
}

// psi ∝ mu * L
inline Eigen::VectorXd bayesian_update(const Eigen::VectorXd& mu, const Eigen::VectorXd& lik) {
    detail::check_rows(mu, lik, "bayesian_update");
    return detail::normalize_log_row(mu.array().log() + lik.array().log());
}

// psi ∝ mu^(1-delta) * L
inline Eigen::VectorXd flattened_update(const Eigen::VectorXd& mu, const Eigen::VectorXd& lik,
                                        double delta) {
    detail::check_rows(mu, lik, "flattened_update");
    if (!(delta >= 0.0 && delta < 1.0)) {
        throw std::invalid_argument("flattened_update: delta must lie in [0,1)");
    }
    return detail::normalize_log_row((1.0 - delta) * mu.array().log() + lik.array().log());
}

// Geometric-average combination: log mu_k = sum_l a(l,k) log psi_l, row-
// normalized.  psi rows are probability vectors.
inline Eigen::MatrixXd combine(const Eigen::MatrixXd& psi, const Eigen::MatrixXd& a) {
    if (psi.rows() != a.rows()) throw std::invalid_argument("combine: agent counts disagree");
    if ((psi.array() <= 0.0).any()) {
        throw std::invalid_argument("combine: psi rows must be strictly positive");
    }
    Eigen::MatrixXd logpsi = psi.array().log();
    Eigen::MatrixXd logmu = a.transpose() * logpsi;
    Eigen::MatrixXd mu(logmu.rows(), logmu.cols());
    for (int k = 0; k < logmu.rows(); ++k) {
        mu.row(k) = detail::normalize_log_row(logmu.row(k)).transpose();
    }
    return mu;
}

// Argmax decision with deterministic lowest-label tie-break.  Works on any
// monotone transform of the beliefs, so log rows are fine.
inline int decide(const Eigen::VectorXd& row) {
    int best = 0;
    for (int i = 1; i < row.size(); ++i) {
        if (row(i) > row(best)) best = i;
    }
    return best + 1;
}

// One synchronous network step: every agent updates with its own log-
// likelihood row, then the network combines geometrically.  loglik(k, th-1)
// must hold log L_k(xi_k | th).
inline void step_with_loglik(belief_state& state, const strategy& strat,
                             const Eigen::MatrixXd& loglik, const Eigen::MatrixXd& a) {
    if (loglik.rows() != state.logb.rows() || loglik.cols() != state.logb.cols()) {
        throw std::invalid_argument("step: log-likelihood shape disagrees with the state");
    }
    if (!loglik.allFinite()) {
        throw numerical_error("step: non-finite log-likelihood (support violation)");
    }
    const auto [wp, wd] = strat.weights();
    Eigen::MatrixXd logpsi = wp * state.logb + wd * loglik;
    state.logb = a.transpose() * logpsi;
    for (int k = 0; k < state.logb.rows(); ++k) {
        state.logb.row(k).array() -= state.logb.row(k).maxCoeff();
    }
    if (!state.logb.allFinite()) {
        throw numerical_error("step: belief state became non-finite");
    }
    ++state.step;
}

// Convenience: draw one observation per agent from the model under the given
// truth and advance the state.  Agents draw in index order from the shared
// stream; the observations are returned for cross-checks.
template <models::likelihood_model M>
inline Eigen::VectorXd step(belief_state& state, const strategy& strat, const M& model,
                            int theta0, const Eigen::MatrixXd& a, std::mt19937_64& g) {
    const int n = model.agents();
    const int h = model.hypotheses();
    Eigen::VectorXd xi(n);
    Eigen::MatrixXd loglik(n, h);
    for (int k = 0; k < n; ++k) {
        xi(k) = model.sample(k, theta0, g);
        for (int th = 1; th <= h; ++th) loglik(k, th - 1) = model.log_likelihood(k, xi(k), th);
    }
    step_with_loglik(state, strat, loglik, a);
    return xi;
}

// Exact log-ratio recursion lam' = a^T (wp * lam + wd * x): the fast path of
// the same dynamics, where x(k, j) is the log-likelihood ratio of agent k for
// the j-th wrong hypothesis.  'at' is the transposed combination matrix.
inline void log_ratio_step(Eigen::MatrixXd& lam, const Eigen::MatrixXd& x, double prior_w,
                           double data_w, const Eigen::MatrixXd& at) {
    lam = at * (prior_w * lam + data_w * x);
}

// Per-step annotations for recorded runs: the active truth plus the
// environment state (constant in stationary runs).
struct regime_annotation {
    int truth;       // hypothesis label generating data this step
    int matrix;      // combination-matrix index
    int functioning; // 0 nominal, 1 perturbed, 2 bad
};

struct trajectory_record {
    int agents = 0;
    int hypotheses = 0;
    strategy strat;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::vector<std::array<int, 3>> regimes;    // one entry per step: truth, matrix, functioning
    std::vector<std::vector<int>> decisions;    // one row per step
    int belief_stride = 0;                      // 0: beliefs not recorded
    std::vector<int> belief_steps;
    std::vector<Eigen::MatrixXd> beliefs;       // probability-domain snapshots
};

// Scripted truth: (step, hypothesis) change points, first entry at step 1.
using truth_schedule = std::vector<std::pair<int, int>>;

inline int truth_at(const truth_schedule& schedule, int step) {
    int t = schedule.front().second;
    for (const auto& [at, th] : schedule) {
        if (step >= at) t = th;
        else break;
    }
    return t;
}

// Seeded stationary (or scripted change-point) run over a fixed matrix.
template <models::likelihood_model M>
inline trajectory_record run_trajectory(const M& model, const Eigen::MatrixXd& a,
                                        const strategy& strat, const truth_schedule& schedule,
                                        int horizon, std::uint64_t seed,
                                        int belief_stride = 0) {
    strat.validate();
    if (horizon < 1) throw config_error("run_trajectory: horizon must be at least 1");
    if (schedule.empty() || schedule.front().first != 1) {
        throw config_error("run_trajectory: schedule must start at step 1");
    }
    for (std::size_t i = 0; i + 1 < schedule.size(); ++i) {
        if (schedule[i + 1].first <= schedule[i].first) {
            throw config_error("run_trajectory: schedule steps must increase");
        }
    }
    for (const auto& [at, th] : schedule) {
        if (th < 1 || th > model.hypotheses()) {
            throw config_error("run_trajectory: schedule hypothesis out of range");
        }
    }
    trajectory_record rec;
    rec.agents = model.agents();
    rec.hypotheses = model.hypotheses();
    rec.strat = strat;
    rec.seed = seed;
    rec.belief_stride = belief_stride;
    rec.regimes.reserve(static_cast<std::size_t>(horizon));
    rec.decisions.reserve(static_cast<std::size_t>(horizon));

    std::mt19937_64 g(seed);
    belief_state state = belief_state::uniform(model.agents(), model.hypotheses());
    for (int i = 1; i <= horizon; ++i) {
        const int truth = truth_at(schedule, i);
        step(state, strat, model, truth, a, g);
        rec.regimes.push_back({truth, 0, 0});
        std::vector<int> dec(static_cast<std::size_t>(model.agents()));
        for (int k = 0; k < model.agents(); ++k) dec[static_cast<std::size_t>(k)] = decide(state.logb.row(k));
        rec.decisions.push_back(std::move(dec));
        if (belief_stride > 0 && (i % belief_stride == 0 || i == horizon)) {
            rec.belief_steps.push_back(i);
            rec.beliefs.push_back(state.beliefs());
        }
    }
    return rec;
}

} // namespace asl::engine
