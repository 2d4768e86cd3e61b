#pragma once
#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "asl/engine.hpp"
#include "asl/errors.hpp"
#include "asl/models.hpp"
#include "asl/rng.hpp"

namespace asl::nonstationary {

// Markov-modulated environment: three independent chains driven by the same
// shared stream, advanced at the start of every step (a change at step i
// already shapes the observations of step i).
//  * truth chain: birth-death walk on the hypothesis labels {1..H};
//  * matrix chain: two-state switch selecting the combination policy;
//  * functioning chain: birth-death walk on {nominal, perturbed, bad},
//    injecting extra observation noise the agents do not model.
// A chain with rate 0 consumes no randomness, so an all-zero environment
// reproduces the stationary engine bit for bit under the same seed.

constexpr int kNominal = 0;
constexpr int kPerturbed = 1;
constexpr int kBad = 2;

struct regime_params {
    double q_hyp = 5e-3;
    double q_mat = 1e-3;
    double q_fun = 1e-3;

    void validate() const {
        for (double q : {q_hyp, q_mat, q_fun}) {
            if (!(q >= 0.0 && q < 0.5)) {
                throw config_error("regime_params: rates must lie in [0, 0.5)");
            }
        }
    }
};

struct regime_state {
    int hyp = 1; // hypothesis label
    int mat = 0; // index into the matrix list
    int fun = kNominal;
};

namespace detail {

// One step of a reflected birth-death walk on [lo, hi]: interior states move
// down/up with probability q each, boundary states move inward with
// probability q.  q = 0 draws nothing.
inline int step_birth_death(int s, int lo, int hi, double q, std::mt19937_64& g) {
    if (q == 0.0) return s;
    const double u = rng::uniform01(g);
    if (s == lo) return u < q ? s + 1 : s;
    if (s == hi) return u < q ? s - 1 : s;
    if (u < q) return s - 1;
    if (u < 2.0 * q) return s + 1;
    return s;
}

} // namespace detail

// Advance all three chains, in the fixed order truth, matrix, functioning.
inline regime_state step_regimes(const regime_state& s, const regime_params& p, int hypotheses,
                                 std::mt19937_64& g) {
    regime_state next = s;
    next.hyp = detail::step_birth_death(s.hyp, 1, hypotheses, p.q_hyp, g);
    if (p.q_mat > 0.0 && rng::uniform01(g) < p.q_mat) next.mat = 1 - s.mat;
    next.fun = detail::step_birth_death(s.fun, kNominal, kBad, p.q_fun, g);
    return next;
}

// Expected sojourn of the most volatile compound state: an interior truth
// state together with the perturbed functioning state (and whichever matrix
// is active).  Each step it survives with probability
//   q* = (1 - 2 q_hyp)(1 - q_mat)(1 - 2 q_fun),
// so the expected number of steps held beyond the entry step is q*/(1-q*).
struct cycle_stats {
    double q_star;
    double t_lc;
};

inline cycle_stats worst_case_cycle_stats(const regime_params& p) {
    p.validate();
    const double q_star = (1.0 - 2.0 * p.q_hyp) * (1.0 - p.q_mat) * (1.0 - 2.0 * p.q_fun);
    if (q_star >= 1.0 - 1e-12) {
        throw config_error("worst_case_cycle_stats: environment is static (all rates zero)");
    }
    return {q_star, q_star / (1.0 - q_star)};
}

struct environment {
    regime_params rates;
    regime_state init;
    double sigma_perturbed = 0.5;
    double sigma_bad = 5.0;

    double sigma_for(int fun) const {
        switch (fun) {
            case kNominal: return 0.0;
            case kPerturbed: return sigma_perturbed;
            case kBad: return sigma_bad;
            default: throw std::invalid_argument("environment: unknown functioning state");
        }
    }
};

// Seeded run under the Markov-modulated environment.  Observations are drawn
// from the model under the current truth, plus additive Gaussian noise when
// the functioning state is degraded; the agents keep evaluating their nominal
// likelihoods and combine over the currently active matrix.
template <models::likelihood_model M>
inline engine::trajectory_record run_nonstationary(const M& model,
                                                   const std::vector<Eigen::MatrixXd>& matrices,
                                                   const engine::strategy& strat,
                                                   const environment& env, int horizon,
                                                   std::uint64_t seed, int belief_stride = 0) {
    strat.validate();
    env.rates.validate();
    if (horizon < 1) throw config_error("run_nonstationary: horizon must be at least 1");
    if (matrices.empty() || matrices.size() > 2) {
        throw config_error("run_nonstationary: need one or two combination matrices");
    }
    if (env.rates.q_mat > 0.0 && matrices.size() < 2) {
        throw config_error("run_nonstationary: matrix chain is active but only one matrix given");
    }
    const int n = model.agents();
    const int h = model.hypotheses();
    for (const auto& a : matrices) {
        if (a.rows() != n || a.cols() != n) {
            throw config_error("run_nonstationary: matrix size disagrees with the model");
        }
    }
    if (env.init.hyp < 1 || env.init.hyp > h || env.init.mat < 0 ||
        env.init.mat >= static_cast<int>(matrices.size()) || env.init.fun < kNominal ||
        env.init.fun > kBad) {
        throw config_error("run_nonstationary: initial regime out of range");
    }

    engine::trajectory_record rec;
    rec.agents = n;
    rec.hypotheses = h;
    rec.strat = strat;
    rec.seed = seed;
    rec.belief_stride = belief_stride;
    rec.regimes.reserve(static_cast<std::size_t>(horizon));
    rec.decisions.reserve(static_cast<std::size_t>(horizon));

    std::mt19937_64 g(seed);
    engine::belief_state state = engine::belief_state::uniform(n, h);
    regime_state s = env.init;
    Eigen::MatrixXd loglik(n, h);
    for (int i = 1; i <= horizon; ++i) {
        s = step_regimes(s, env.rates, h, g);
        const double sigma = env.sigma_for(s.fun);
        for (int k = 0; k < n; ++k) {
            double xi = model.sample(k, s.hyp, g);
            if (s.fun != kNominal) xi += sigma * rng::normal(g);
            for (int th = 1; th <= h; ++th) loglik(k, th - 1) = model.log_likelihood(k, xi, th);
        }
        engine::step_with_loglik(state, strat, loglik, matrices[static_cast<std::size_t>(s.mat)]);
        rec.regimes.push_back({s.hyp, s.mat, s.fun});
        std::vector<int> dec(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k) dec[static_cast<std::size_t>(k)] = engine::decide(state.logb.row(k));
        rec.decisions.push_back(std::move(dec));
        if (belief_stride > 0 && (i % belief_stride == 0 || i == horizon)) {
            rec.belief_steps.push_back(i);
            rec.beliefs.push_back(state.beliefs());
        }
    }
    return rec;
}

// Network plurality decision for one recorded step; ties resolve to the
// lowest label, matching the per-agent rule.
inline int majority_decision(const std::vector<int>& decisions, int hypotheses) {
    std::vector<int> count(static_cast<std::size_t>(hypotheses) + 1, 0);
    for (int d : decisions) {
        if (d < 1 || d > hypotheses) {
            throw std::invalid_argument("majority_decision: label out of range");
        }
        ++count[static_cast<std::size_t>(d)];
    }
    int best = 1;
    for (int th = 2; th <= hypotheses; ++th) {
        if (count[static_cast<std::size_t>(th)] > count[static_cast<std::size_t>(best)]) best = th;
    }
    return best;
}

// Recovery bookkeeping after truth changes: a change counts as recovered
// once the network plurality equals the new truth for `persistence`
// consecutive steps, all before the next change.  Changes that land while
// the functioning state is bad are excluded (the network cannot be expected
// to track them); changes whose window is cut off by the next change or the
// end of the record are censored and dropped from the mean.
struct recovery_event {
    int change_step;   // 1-based step of the change
    int new_truth;
    long recovery;     // steps from the change to the start of the stable window; -1 if censored
    long sojourn;      // steps until the next truth change (or end of record)
    bool excluded_bad;
};

struct recovery_stats {
    std::vector<recovery_event> events;
    long recovered = 0;
    long censored = 0;
    long excluded = 0;
    double mean_recovery = 0.0; // over recovered, non-excluded events
};

inline recovery_stats recovery_time_statistics(const engine::trajectory_record& rec,
                                               int persistence = 10) {
    if (persistence < 1) throw std::invalid_argument("recovery_time_statistics: persistence");
    const std::size_t steps = rec.regimes.size();
    recovery_stats out;
    if (steps < 2) return out;

    std::vector<int> majority(steps);
    for (std::size_t i = 0; i < steps; ++i) {
        majority[i] = majority_decision(rec.decisions[i], rec.hypotheses);
    }
    // run[i]: length of the constant-majority run starting at i
    std::vector<long> run(steps, 1);
    for (std::size_t i = steps - 1; i-- > 0;) {
        if (majority[i] == majority[i + 1]) run[i] = run[i + 1] + 1;
    }

    std::vector<std::size_t> changes;
    for (std::size_t i = 1; i < steps; ++i) {
        if (rec.regimes[i][0] != rec.regimes[i - 1][0]) changes.push_back(i);
    }
    for (std::size_t c = 0; c < changes.size(); ++c) {
        const std::size_t at = changes[c];
        const std::size_t window_end = c + 1 < changes.size() ? changes[c + 1] : steps;
        recovery_event ev;
        ev.change_step = static_cast<int>(at) + 1;
        ev.new_truth = rec.regimes[at][0];
        ev.sojourn = static_cast<long>(window_end - at);
        ev.excluded_bad = rec.regimes[at][2] == kBad;
        ev.recovery = -1;
        for (std::size_t i = at; i + static_cast<std::size_t>(persistence) <= window_end; ++i) {
            if (majority[i] == ev.new_truth && run[i] >= persistence) {
                ev.recovery = static_cast<long>(i - at);
                break;
            }
        }
        if (ev.excluded_bad) {
            ++out.excluded;
        } else if (ev.recovery < 0) {
            ++out.censored;
        } else {
            ++out.recovered;
            out.mean_recovery += static_cast<double>(ev.recovery);
        }
        out.events.push_back(ev);
    }
    if (out.recovered > 0) out.mean_recovery /= static_cast<double>(out.recovered);
    return out;
}

// Chain-only measurement of the worst-case compound sojourn: holds of the
// state (truth interior, functioning perturbed, matrix fixed); any component
// change ends the sojourn.  Durations count the steps held beyond the entry
// step, matching the geometric law with parameter q*.
struct sojourn_stats {
    long count = 0;
    double mean = 0.0;
    long steps_simulated = 0;
};

inline sojourn_stats measure_worst_case_sojourns(const regime_params& p, int hypotheses,
                                                 long min_sojourns, std::uint64_t seed,
                                                 long max_steps = 500000000L) {
    p.validate();
    if (hypotheses < 3) {
        throw config_error("measure_worst_case_sojourns: need an interior truth state");
    }
    if (min_sojourns < 1) throw config_error("measure_worst_case_sojourns: min_sojourns");
    const int interior = 2; // any interior label works; fix the lowest
    std::mt19937_64 g(rng::derive_seed(seed, 0, 0));
    regime_state s; // hyp=1, mat=0, nominal
    sojourn_stats out;
    bool inside = false;
    int entry_mat = 0;
    long duration = 0;
    double total = 0.0;
    for (long i = 0; i < max_steps && out.count < min_sojourns; ++i) {
        s = step_regimes(s, p, hypotheses, g);
        ++out.steps_simulated;
        const bool hold = s.hyp == interior && s.fun == kPerturbed;
        if (inside) {
            if (hold && s.mat == entry_mat) {
                ++duration;
            } else {
                total += static_cast<double>(duration);
                ++out.count;
                inside = hold; // a matrix flip inside the hold set starts a new sojourn
                entry_mat = s.mat;
                duration = 0;
            }
        } else if (hold) {
            inside = true;
            entry_mat = s.mat;
            duration = 0;
        }
    }
    if (out.count < min_sojourns) {
        throw numerical_error("measure_worst_case_sojourns: step budget exhausted with " +
                              std::to_string(out.count) + " sojourns");
    }
    out.mean = total / static_cast<double>(out.count);
    return out;
}

} // namespace asl::nonstationary
