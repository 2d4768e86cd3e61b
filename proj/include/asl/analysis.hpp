#pragma once
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "asl/errors.hpp"
#include "asl/graph.hpp"
#include "asl/models.hpp"
#include "asl/numerics.hpp"
#include "asl/rng.hpp"

namespace asl::analysis {

// Theoretical descriptors of the constant-step-size social learning dynamics
// on a strongly-connected network.  Conventions used throughout:
//  * pi is the Perron weight vector of the combination matrix;
//  * "wrong" hypotheses are the labels != theta0 in ascending order, and all
//    per-hypothesis vectors/matrices are indexed in that order;
//  * the small-step limit of the network log-ratio for a wrong hypothesis
//    concentrates at m_ave(theta) = sum_l pi_l d_l(theta), with Gaussian
//    fluctuations governed by c_ave(theta,theta') = sum_l pi_l^2 rho_l.

// Network-limit mean of the log-ratio: m_ave(theta).
template <models::likelihood_model M>
inline double network_divergence(const M& model, const Eigen::VectorXd& pi, int theta0,
                                 int theta) {
    if (pi.size() != model.agents()) {
        throw std::invalid_argument("network_divergence: weight length mismatch");
    }
    double m = 0;
    for (int l = 0; l < model.agents(); ++l) m += pi(l) * model.kl(l, theta0, theta);
    return m;
}

// m_ave over all wrong hypotheses in ascending order.
template <models::likelihood_model M>
inline Eigen::VectorXd divergence_means(const M& model, const Eigen::VectorXd& pi, int theta0) {
    const auto wrong = models::wrong_hypotheses(model.hypotheses(), theta0);
    Eigen::VectorXd m(static_cast<Eigen::Index>(wrong.size()));
    for (std::size_t j = 0; j < wrong.size(); ++j) {
        m(static_cast<Eigen::Index>(j)) = network_divergence(model, pi, theta0, wrong[j]);
    }
    return m;
}

// True/false per wrong hypothesis: is there at least one agent whose model
// separates it from theta0 (m_ave > 0)?  A false entry means the network as
// a whole cannot learn against that hypothesis.
template <models::likelihood_model M>
inline std::vector<bool> global_identifiability(const M& model, const Eigen::VectorXd& pi,
                                                int theta0) {
    const Eigen::VectorXd m = divergence_means(model, pi, theta0);
    std::vector<bool> ok(static_cast<std::size_t>(m.size()));
    for (Eigen::Index j = 0; j < m.size(); ++j) ok[static_cast<std::size_t>(j)] = m(j) > 0.0;
    return ok;
}

// Limiting covariance matrix c_ave(theta,theta') over wrong hypotheses.
template <models::likelihood_model M>
inline Eigen::MatrixXd limiting_covariance(const M& model, const Eigen::VectorXd& pi,
                                           int theta0) {
    const auto wrong = models::wrong_hypotheses(model.hypotheses(), theta0);
    const int w = static_cast<int>(wrong.size());
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(w, w);
    for (int a = 0; a < w; ++a) {
        for (int b = a; b < w; ++b) {
            double s = 0;
            for (int l = 0; l < model.agents(); ++l) {
                s += pi(l) * pi(l) * model.llr_moments(l, theta0, wrong[a], wrong[b]).cov;
            }
            c(a, b) = s;
            c(b, a) = s;
        }
    }
    return c;
}

// Finite-step refinement of the steady-state moments of the per-agent
// log-ratio under step size delta: geometric series over matrix powers,
// mean weights delta*(1-delta)^m [a^{m+1}]_{lk} and squared weights for the
// covariance.  The series is truncated once its geometric tail drops below
// 1e-14 in relative terms.
struct refined_moment_result {
    std::vector<int> wrong;
    Eigen::MatrixXd mean;              // agents x wrong
    std::vector<Eigen::MatrixXd> cov;  // one wrong x wrong matrix per agent
    int truncation;
};

template <models::likelihood_model M>
inline refined_moment_result refined_moments(const M& model, const Eigen::MatrixXd& a,
                                             double delta, int theta0) {
    if (!(delta > 0.0 && delta < 1.0)) {
        throw std::invalid_argument("refined_moments: delta must lie in (0,1)");
    }
    const int n = model.agents();
    if (a.rows() != n || a.cols() != n) {
        throw std::invalid_argument("refined_moments: matrix size disagrees with the model");
    }
    const auto wrong = models::wrong_hypotheses(model.hypotheses(), theta0);
    const int w = static_cast<int>(wrong.size());

    const int trunc = std::max(1, static_cast<int>(std::ceil(-14.0 * std::log(10.0) /
                                                             std::log1p(-delta))));
    Eigen::MatrixXd power = a;                               // a^{m+1}, starting at m=0
    Eigen::MatrixXd wsum = Eigen::MatrixXd::Zero(n, n);      // sum_m delta(1-delta)^m a^{m+1}
    Eigen::MatrixXd wsq = Eigen::MatrixXd::Zero(n, n);       // same with squared weights
    double wm = delta;
    for (int m = 0; m < trunc; ++m) {
        wsum += wm * power;
        wsq += (wm * wm) * power.cwiseProduct(power);
        power = a * power;
        wm *= (1.0 - delta);
    }

    Eigen::VectorXd d(n);
    Eigen::MatrixXd rho_ab(n, 1); // filled per pair below
    refined_moment_result out;
    out.wrong = wrong;
    out.truncation = trunc;
    out.mean.resize(n, w);
    for (int j = 0; j < w; ++j) {
        for (int l = 0; l < n; ++l) d(l) = model.kl(l, theta0, wrong[static_cast<std::size_t>(j)]);
        out.mean.col(j) = wsum.transpose() * d;
    }
    out.cov.assign(static_cast<std::size_t>(n), Eigen::MatrixXd::Zero(w, w));
    for (int ja = 0; ja < w; ++ja) {
        for (int jb = ja; jb < w; ++jb) {
            Eigen::VectorXd rho(n);
            for (int l = 0; l < n; ++l) {
                rho(l) = model
                             .llr_moments(l, theta0, wrong[static_cast<std::size_t>(ja)],
                                          wrong[static_cast<std::size_t>(jb)])
                             .cov;
            }
            const Eigen::VectorXd ck = wsq.transpose() * rho; // per destination agent
            for (int k = 0; k < n; ++k) {
                out.cov[static_cast<std::size_t>(k)](ja, jb) = ck(k);
                out.cov[static_cast<std::size_t>(k)](jb, ja) = ck(k);
            }
        }
    }
    return out;
}

// Weighted cumulant generating function of the network-average log-ratio:
// Lambda_ave(t) = sum_l Lambda_l(pi_l * t).
template <models::likelihood_model M>
inline double lambda_ave(const M& model, const Eigen::VectorXd& pi, double t, int theta0,
                         int theta) {
    double s = 0;
    for (int l = 0; l < model.agents(); ++l) s += model.lmgf(l, pi(l) * t, theta0, theta);
    return s;
}

// Second derivative of Lambda_ave at 0: sum_l pi_l^2 * Var[x_l].
template <models::likelihood_model M>
inline double lambda_ave_curvature(const M& model, const Eigen::VectorXd& pi, int theta0,
                                   int theta) {
    double s = 0;
    for (int l = 0; l < model.agents(); ++l) {
        s += pi(l) * pi(l) * model.llr_moments(l, theta0, theta, theta).cov;
    }
    return s;
}

// The unique negative root of Lambda_ave(t) = 0.  The root is bracketed by
// [-1/pi_min, -1/pi_max] where the extremes run over the informative agents
// (those whose models actually separate theta from theta0); when all
// informative weights coincide the bracket collapses and the root is the
// common -1/pi.
template <models::likelihood_model M>
inline double solve_t_star(const M& model, const Eigen::VectorXd& pi, int theta0, int theta) {
    double pmin = std::numeric_limits<double>::infinity();
    double pmax = 0.0;
    for (int l = 0; l < model.agents(); ++l) {
        if (model.kl(l, theta0, theta) > 0.0) {
            pmin = std::min(pmin, pi(l));
            pmax = std::max(pmax, pi(l));
        }
    }
    if (!(pmax > 0.0)) {
        throw numerical_error("solve_t_star: hypothesis " + std::to_string(theta) +
                              " is not identifiable (no informative agent)");
    }
    double lo = -1.0 / pmin;
    double hi = -1.0 / pmax;
    auto f = [&](double t) { return lambda_ave(model, pi, t, theta0, theta); };
    if (hi - lo < 1e-12 * std::abs(lo)) {
        return lo; // uniform informative weights
    }
    double flo = f(lo);
    if (flo < 0.0) { // guard against roundoff at a near-degenerate bracket
        lo *= 1.0 + 1e-9;
        flo = f(lo);
    }
    const double fhi = f(hi);
    if (fhi == 0.0) return hi;
    if (!(flo >= 0.0) || !(fhi < 0.0)) {
        throw numerical_error(
            "solve_t_star: root not bracketed on [" + std::to_string(lo) + ", " +
            std::to_string(hi) + "] (f: " + std::to_string(flo) + ", " + std::to_string(fhi) +
            ")");
    }
    const num::root_result r = num::bisect(f, lo, hi, 1e-14, 1e-13, 300);
    if (!r.converged) throw numerical_error("solve_t_star: bisection did not converge");
    return r.x;
}

// phi(t) = integral_0^t Lambda_ave(tau)/tau dtau.  The integrand has a
// removable singularity at tau = 0; within |tau| < 1e-4 it is replaced by
// its two-term Taylor form m_ave + tau * Lambda_ave''(0)/2.
template <models::likelihood_model M>
inline double phi_integral(const M& model, const Eigen::VectorXd& pi, double t, int theta0,
                           int theta) {
    if (t == 0.0) return 0.0;
    const double m = network_divergence(model, pi, theta0, theta);
    const double curv = lambda_ave_curvature(model, pi, theta0, theta);
    auto g = [&](double tau) {
        if (std::abs(tau) < 1e-4) return m + 0.5 * curv * tau;
        return lambda_ave(model, pi, tau, theta0, theta) / tau;
    };
    const double sign = t > 0 ? 1.0 : -1.0;
    const double lo = std::min(0.0, t);
    const double hi = std::max(0.0, t);
    const num::quad_result q = num::integrate(g, lo, hi, 1e-12, 1e-11);
    return sign * q.value;
}

// Per-hypothesis error exponents and the governing (smallest) one.
struct exponent_result {
    std::vector<int> wrong;
    Eigen::VectorXd t_star;
    Eigen::VectorXd phi_theta;
    double phi;
    int argmin; // index into wrong
};

template <models::likelihood_model M>
inline exponent_result error_exponent(const M& model, const Eigen::VectorXd& pi, int theta0) {
    exponent_result out;
    out.wrong = models::wrong_hypotheses(model.hypotheses(), theta0);
    const int w = static_cast<int>(out.wrong.size());
    out.t_star.resize(w);
    out.phi_theta.resize(w);
    out.phi = std::numeric_limits<double>::infinity();
    out.argmin = 0;
    for (int j = 0; j < w; ++j) {
        const int theta = out.wrong[static_cast<std::size_t>(j)];
        const double ts = solve_t_star(model, pi, theta0, theta);
        const double phi = -phi_integral(model, pi, ts, theta0, theta);
        if (!(phi > 0.0)) {
            throw numerical_error("error_exponent: non-positive exponent for hypothesis " +
                                  std::to_string(theta));
        }
        out.t_star(j) = ts;
        out.phi_theta(j) = phi;
        if (phi < out.phi) {
            out.phi = phi;
            out.argmin = j;
        }
    }
    return out;
}

// Convenience bundle for reporting.
struct steady_state_descriptors {
    std::vector<int> wrong;
    Eigen::VectorXd m_ave;
    Eigen::MatrixXd c_ave;
    Eigen::VectorXd t_star;
    Eigen::VectorXd phi_theta;
    double phi;
};

template <models::likelihood_model M>
inline steady_state_descriptors compute_descriptors(const M& model, const Eigen::VectorXd& pi,
                                                    int theta0) {
    steady_state_descriptors d;
    d.wrong = models::wrong_hypotheses(model.hypotheses(), theta0);
    d.m_ave = divergence_means(model, pi, theta0);
    for (Eigen::Index j = 0; j < d.m_ave.size(); ++j) {
        if (!(d.m_ave(j) > 0.0)) {
            throw numerical_error("compute_descriptors: hypothesis " +
                                  std::to_string(d.wrong[static_cast<std::size_t>(j)]) +
                                  " is not identifiable (m_ave <= 0)");
        }
    }
    d.c_ave = limiting_covariance(model, pi, theta0);
    const exponent_result e = error_exponent(model, pi, theta0);
    d.t_star = e.t_star;
    d.phi_theta = e.phi_theta;
    d.phi = e.phi;
    return d;
}

// Fenchel-Legendre transform of phi: phi*(gamma) = sup_t [gamma t - phi(t)],
// by golden-section maximization of the concave objective on
// |t| <= 10/pi_min.  Returns +inf when gamma lies outside the weighted
// support of the average log-ratio.
template <models::likelihood_model M>
inline double rate_function(const M& model, const Eigen::VectorXd& pi, double gamma, int theta0,
                            int theta) {
    double support = 0;
    for (int l = 0; l < model.agents(); ++l) {
        support += pi(l) * model.llr_bound(l, theta0, theta);
    }
    if (std::isfinite(support) && std::abs(gamma) >= support) {
        return std::numeric_limits<double>::infinity();
    }
    const double tmax = 10.0 / pi.minCoeff();
    auto objective = [&](double t) {
        return gamma * t - phi_integral(model, pi, t, theta0, theta);
    };
    const num::root_result r = num::maximize(objective, -tmax, tmax, 1e-10);
    return std::max(0.0, objective(r.x));
}

// Gaussian plug-in estimate of the probability that some coordinate of a
// N(m, C) vector is <= 0, by seeded Monte Carlo with the spectral square
// root of C.  Returns the estimate and its binomial standard error.
struct gauss_prob {
    double p;
    double std_err;
};

inline gauss_prob gaussian_error_probability(const Eigen::VectorXd& m, const Eigen::MatrixXd& c,
                                             long samples = 1000000,
                                             std::uint64_t seed = 0x6a09e667f3bcc908ULL) {
    const Eigen::Index w = m.size();
    if (c.rows() != w || c.cols() != w) {
        throw std::invalid_argument("gaussian_error_probability: dimension mismatch");
    }
    if (samples < 1) throw std::invalid_argument("gaussian_error_probability: need samples >= 1");
    if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + c.cwiseAbs().maxCoeff())) {
        throw numerical_error("gaussian_error_probability: covariance is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (c + c.transpose()));
    if (es.info() != Eigen::Success) {
        throw numerical_error("gaussian_error_probability: eigen-decomposition failed");
    }
    const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() < -1e-10 * scale) {
        throw numerical_error("gaussian_error_probability: covariance is not positive "
                              "semidefinite");
    }
    const Eigen::MatrixXd root =
        es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    std::mt19937_64 g(rng::derive_seed(seed, 0xA11CE, 0));
    Eigen::VectorXd z(w);
    long hits = 0;
    for (long s = 0; s < samples; ++s) {
        for (Eigen::Index j = 0; j < w; ++j) z(j) = rng::normal(g);
        const Eigen::VectorXd y = m + root * z;
        if ((y.array() <= 0.0).any()) ++hits;
    }
    const double p = static_cast<double>(hits) / static_cast<double>(samples);
    return {p, std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(samples))};
}

// Transient envelope constants for a run started from log-ratios lambda0
// (agents x wrong): per wrong hypothesis,
//   K1 = |t*| (m_ave - lambda_ave_0)   and   K2 = kappa |t*| sum_l |lambda0_l|.
struct transient_constants_result {
    std::vector<int> wrong;
    Eigen::VectorXd k1_theta;
    Eigen::VectorXd k2_theta;
    Eigen::VectorXd lambda_ave0;
    double k1; // max over wrong hypotheses
    double k2;
};

template <models::likelihood_model M>
inline transient_constants_result transient_constants(const M& model, const Eigen::VectorXd& pi,
                                                      double kappa,
                                                      const Eigen::MatrixXd& lambda0,
                                                      int theta0) {
    const auto wrong = models::wrong_hypotheses(model.hypotheses(), theta0);
    const int w = static_cast<int>(wrong.size());
    if (lambda0.rows() != model.agents() || lambda0.cols() != w) {
        throw std::invalid_argument("transient_constants: lambda0 must be agents x wrong");
    }
    transient_constants_result out;
    out.wrong = wrong;
    out.k1_theta.resize(w);
    out.k2_theta.resize(w);
    out.lambda_ave0.resize(w);
    out.k1 = -std::numeric_limits<double>::infinity();
    out.k2 = 0.0;
    for (int j = 0; j < w; ++j) {
        const int theta = wrong[static_cast<std::size_t>(j)];
        const double ts = std::abs(solve_t_star(model, pi, theta0, theta));
        const double m = network_divergence(model, pi, theta0, theta);
        const double lam0 = pi.dot(lambda0.col(j));
        out.lambda_ave0(j) = lam0;
        out.k1_theta(j) = ts * (m - lam0);
        out.k2_theta(j) = kappa * ts * lambda0.col(j).cwiseAbs().sum();
        out.k1 = std::max(out.k1, out.k1_theta(j));
        out.k2 = std::max(out.k2, out.k2_theta(j));
    }
    return out;
}

// Steps needed before the transient terms shrink to a fraction eps of the
// steady-state exponent.  The favorable case (every average start at or
// above its limit mean, i.e. all K1 <= 0) decays at the network mixing rate
// beta; otherwise the step size governs through (1-delta).
struct adaptation_result {
    double steps;
    bool favorable;
};

inline adaptation_result adaptation_time(const transient_constants_result& tc, double phi,
                                         double beta, double delta, double eps) {
    if (!(eps > 0.0)) throw config_error("adaptation_time: eps must be positive");
    if (!(phi > 0.0)) throw std::invalid_argument("adaptation_time: phi must be positive");
    const bool favorable = (tc.k1_theta.size() > 0) && (tc.k1_theta.maxCoeff() <= 0.0);
    if (favorable) {
        if (tc.k2 <= 0.0) return {0.0, true};
        if (eps > tc.k2 / phi) {
            throw config_error("adaptation_time: eps exceeds the admissible bound K2/Phi = " +
                               std::to_string(tc.k2 / phi));
        }
        if (!(beta > 0.0 && beta < 1.0)) {
            throw std::invalid_argument("adaptation_time: beta must lie in (0,1)");
        }
        return {std::log(tc.k2 / (eps * phi)) / std::log(1.0 / beta), true};
    }
    if (eps > tc.k1 / phi) {
        throw config_error("adaptation_time: eps exceeds the admissible bound K1/Phi = " +
                           std::to_string(tc.k1 / phi));
    }
    if (!(delta > 0.0 && delta < 1.0)) {
        throw std::invalid_argument("adaptation_time: delta must lie in (0,1)");
    }
    return {std::log(tc.k1 / (eps * phi)) / std::log(1.0 / (1.0 - delta)), false};
}

// Nominal per-step envelope on the error probability: the exponent-level
// bound sum_theta exp{ (1/delta) [ -Phi + K1 (1-delta)^i + K2 (1-delta)^i
// beta^i ] }, clipped to 1.  This is an envelope for the decay shape, not a
// calibrated probability: the residual O(delta) correction of the underlying
// bound has no computable constant and is omitted.
inline double instantaneous_bound(const Eigen::VectorXd& k1_theta,
                                  const Eigen::VectorXd& k2_theta,
                                  const Eigen::VectorXd& phi_theta, double delta, double beta,
                                  int i) {
    if (i < 0) throw std::invalid_argument("instantaneous_bound: negative step");
    const double damp = std::pow(1.0 - delta, i);
    const double mix = std::pow(beta, i);
    double s = 0;
    for (Eigen::Index j = 0; j < phi_theta.size(); ++j) {
        const double expo =
            (-phi_theta(j) + k1_theta(j) * damp + k2_theta(j) * damp * mix) / delta;
        s += std::exp(std::min(expo, 0.0)); // each term is itself a probability bound
    }
    return std::min(1.0, s);
}

// Deterministic worst-case start after a truth change: when the environment
// jumps from theta_prev to theta0, every agent is assumed to carry the full
// weight of the old regime against both the new truth and each alternative,
//   lambda0(theta) = -[ m_prev(theta) + m_prev(theta0) ],
// where m_prev are the network-limit means under theta_prev (zero for
// theta = theta_prev).  This start is wrong in the most persistent way the
// old steady state allows, and it is scanned over all ordered hypothesis
// pairs and all supplied combination policies.
template <models::likelihood_model M>
inline Eigen::MatrixXd worst_case_initial_ratios(const M& model, const Eigen::VectorXd& pi,
                                                 int theta_prev, int theta0) {
    if (theta_prev == theta0) {
        throw std::invalid_argument("worst_case_initial_ratios: theta_prev must differ");
    }
    auto mean_prev = [&](int theta) {
        return theta == theta_prev ? 0.0 : network_divergence(model, pi, theta_prev, theta);
    };
    const auto wrong = models::wrong_hypotheses(model.hypotheses(), theta0);
    Eigen::MatrixXd lam0(model.agents(), static_cast<Eigen::Index>(wrong.size()));
    const double base = mean_prev(theta0);
    for (std::size_t j = 0; j < wrong.size(); ++j) {
        lam0.col(static_cast<Eigen::Index>(j)).setConstant(-(mean_prev(wrong[j]) + base));
    }
    return lam0;
}

struct adaptation_scan_result {
    double steps;
    double c;          // steps * delta
    int theta_prev;
    int theta0;
    int matrix_index;  // into the supplied list
    double k1;
    double phi;
};

// Worst mean adaptation time over all regime changes (ordered hypothesis
// pairs) and combination policies, at the given eps and step size.
template <models::likelihood_model M>
inline adaptation_scan_result worst_case_adaptation(const M& model,
                                                    const std::vector<Eigen::VectorXd>& pis,
                                                    double delta, double eps) {
    if (pis.empty()) throw std::invalid_argument("worst_case_adaptation: no weight vectors");
    adaptation_scan_result best{-1.0, 0.0, 0, 0, 0, 0.0, 0.0};
    const int h = model.hypotheses();
    for (std::size_t mi = 0; mi < pis.size(); ++mi) {
        const Eigen::VectorXd& pi = pis[mi];
        for (int theta0 = 1; theta0 <= h; ++theta0) {
            const exponent_result ex = error_exponent(model, pi, theta0);
            for (int theta_prev = 1; theta_prev <= h; ++theta_prev) {
                if (theta_prev == theta0) continue;
                const Eigen::MatrixXd lam0 =
                    worst_case_initial_ratios(model, pi, theta_prev, theta0);
                const transient_constants_result tc =
                    transient_constants(model, pi, /*kappa=*/0.0, lam0, theta0);
                const adaptation_result at =
                    adaptation_time(tc, ex.phi, /*beta=*/0.5, delta, eps);
                if (at.steps > best.steps) {
                    best = {at.steps,   at.steps * delta,        theta_prev, theta0,
                            static_cast<int>(mi), tc.k1, ex.phi};
                }
            }
        }
    }
    return best;
}

} // namespace asl::analysis
