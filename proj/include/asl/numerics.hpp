#pragma once
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "asl/errors.hpp"

namespace asl::num {

struct quad_result {
    double value;
    double abs_error;  // accumulated error estimate
    int evaluations;
    bool converged;
};

struct root_result {
    double x;
    int iters;
    bool converged;
};

namespace detail {

// 7-point Gauss / 15-point Kronrod pair on [-1, 1].
inline constexpr double kK15Nodes[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.000000000000000};
inline constexpr double kK15Weights[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
inline constexpr double kG7Weights[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469};

template <class F>
inline void kronrod_15(const F& f, double a, double b, double& k15, double& err) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double fv[15];
    // fv[i] pairs nodes +x and -x; index 7 is the centre.
    for (int i = 0; i < 7; ++i) {
        fv[i] = f(c + h * kK15Nodes[i]);
        fv[14 - i] = f(c - h * kK15Nodes[i]);
    }
    fv[7] = f(c);
    double g7 = kG7Weights[3] * fv[7];
    for (int i = 0; i < 3; ++i) {
        g7 += kG7Weights[i] * (fv[2 * i + 1] + fv[13 - 2 * i]);
    }
    k15 = kK15Weights[7] * fv[7];
    for (int i = 0; i < 7; ++i) {
        k15 += kK15Weights[i] * (fv[i] + fv[14 - i]);
    }
    k15 *= h;
    g7 *= h;
    err = std::abs(k15 - g7);
    // Sharpen the raw difference the usual way: it badly overestimates once
    // the rule is nearly exact.
    err = std::pow(200.0 * err, 1.5);
    if (!(err < std::abs(k15 - g7))) err = std::abs(k15 - g7);
}

} // namespace detail

// Adaptive Gauss-Kronrod integration of f over the finite interval [a, b].
// Bisects the worst subinterval until the summed error estimate meets
// abs_tol + rel_tol * |integral|.  Throws numerical_error if the interval
// budget is exhausted first.
template <class F>
inline quad_result integrate(const F& f, double a, double b,
                             double abs_tol = 1e-12, double rel_tol = 1e-10,
                             int max_intervals = 2000) {
    if (!(std::isfinite(a) && std::isfinite(b))) {
        throw std::invalid_argument("integrate: endpoints must be finite");
    }
    if (a == b) return {0.0, 0.0, 0, true};

    struct segment { double a, b, value, error; };
    std::vector<segment> segs;
    double v0 = 0, e0 = 0;
    detail::kronrod_15(f, a, b, v0, e0);
    segs.push_back({a, b, v0, e0});
    int evals = 15;

    auto total = [&segs](double& v, double& e) {
        v = 0; e = 0;
        for (const auto& s : segs) { v += s.value; e += s.error; }
    };

    double value = 0, error = 0;
    total(value, error);
    while (error > abs_tol + rel_tol * std::abs(value)) {
        if (static_cast<int>(segs.size()) >= max_intervals) {
            throw numerical_error("integrate: failed to converge (interval budget exhausted)");
        }
        // split the segment with the largest error estimate
        std::size_t worst = 0;
        for (std::size_t i = 1; i < segs.size(); ++i) {
            if (segs[i].error > segs[worst].error) worst = i;
        }
        const segment s = segs[worst];
        const double mid = 0.5 * (s.a + s.b);
        if (mid <= s.a || mid >= s.b) {
            throw numerical_error("integrate: interval collapsed below machine resolution");
        }
        segment left{s.a, mid, 0, 0}, right{mid, s.b, 0, 0};
        detail::kronrod_15(f, left.a, left.b, left.value, left.error);
        detail::kronrod_15(f, right.a, right.b, right.value, right.error);
        evals += 30;
        segs[worst] = left;
        segs.push_back(right);
        total(value, error);
    }
    return {value, error, evals, true};
}

// Convenience: integrate over a piecewise-smooth function whose kinks are
// known; integrates each panel separately so the adaptive rule never
// straddles a non-smooth point.
template <class F>
inline quad_result integrate_panels(const F& f, const std::vector<double>& breakpoints,
                                    double abs_tol = 1e-12, double rel_tol = 1e-10) {
    if (breakpoints.size() < 2) {
        throw std::invalid_argument("integrate_panels: need at least two breakpoints");
    }
    quad_result out{0.0, 0.0, 0, true};
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        if (!(breakpoints[i] <= breakpoints[i + 1])) {
            throw std::invalid_argument("integrate_panels: breakpoints must be nondecreasing");
        }
        const quad_result r = integrate(f, breakpoints[i], breakpoints[i + 1],
                                        abs_tol / static_cast<double>(breakpoints.size()), rel_tol);
        out.value += r.value;
        out.abs_error += r.abs_error;
        out.evaluations += r.evaluations;
    }
    return out;
}

// Bisection for a root of f on [lo, hi].  Requires a sign change (an endpoint
// that is exactly zero counts).  Converges unconditionally; the returned
// point has |interval| <= xtol or |f| <= ftol.
template <class F>
inline root_result bisect(const F& f, double lo, double hi,
                          double xtol = 1e-13, double ftol = 0.0, int maxit = 200) {
    if (!(lo < hi)) throw std::invalid_argument("bisect: empty interval");
    double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return {lo, 0, true};
    if (fhi == 0.0) return {hi, 0, true};
    if ((flo > 0) == (fhi > 0)) {
        throw numerical_error("bisect: root not bracketed");
    }
    double mid = lo;
    for (int i = 1; i <= maxit; ++i) {
        mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0 || (hi - lo) < xtol * (1.0 + std::abs(mid)) ||
            (ftol > 0 && std::abs(fm) <= ftol)) {
            return {mid, i, true};
        }
        if ((fm > 0) == (flo > 0)) { lo = mid; flo = fm; }
        else                       { hi = mid; fhi = fm; }
    }
    return {mid, maxit, false};
}

// Golden-section search for the maximum of a unimodal (here: concave)
// function on [lo, hi].
template <class F>
inline root_result maximize(const F& f, double lo, double hi,
                            double xtol = 1e-10, int maxit = 300) {
    if (!(lo < hi)) throw std::invalid_argument("maximize: empty interval");
    constexpr double invphi = 0.6180339887498948482;
    double a = lo, b = hi;
    double x1 = b - invphi * (b - a);
    double x2 = a + invphi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    int it = 0;
    while (++it < maxit && (b - a) > xtol * (1.0 + std::abs(a) + std::abs(b))) {
        if (f1 < f2) {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + invphi * (b - a); f2 = f(x2);
        } else {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - invphi * (b - a); f1 = f(x1);
        }
    }
    const double x = 0.5 * (a + b);
    return {x, it, it < maxit};
}

// Numerically stable log(sum(exp(v))).
inline double log_sum_exp(const double* v, std::size_t n) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, v[i]);
    if (!std::isfinite(m)) return m; // all -inf (or a NaN/Inf propagates)
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
    return m + std::log(s);
}

// Neumaier compensated summation; used for reductions whose result must not
// depend on how work was split across threads (values are summed in a fixed
// index order by the caller).
inline double compensated_sum(const std::vector<double>& v) {
    double sum = 0.0, comp = 0.0;
    for (double x : v) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x)) comp += (sum - t) + x;
        else                              comp += (x - t) + sum;
        sum = t;
    }
    return sum + comp;
}

} // namespace asl::num
