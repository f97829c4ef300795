#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace lsf {

// Spherical-cap probabilities for Gaussian filters.
//
// F(eta)       -- measure of the halfspace <z,u> >= eta for unit u.
// G(s,eta,sig) -- joint measure of two such halfspaces whose unit normals
//                 are at Euclidean distance s (correlation alpha(s)).
//
// Everything is done in double precision with log-space variants so the
// solver never has to multiply raw sub-normal probabilities.

constexpr double kSqrt2 = 1.4142135623730950488016887242097;
constexpr double kLogSqrt2Pi = 0.91893853320467274178032973640562;

/// cos / sin of the angle between two unit vectors at distance s, s in [0,2].
inline std::pair<double, double> alpha_beta(double s) {
    if (!(s >= 0.0 && s <= 2.0))
        throw std::domain_error("alpha_beta: s must lie in [0, 2], got " + std::to_string(s));
    double alpha = 1.0 - 0.5 * s * s;
    // beta via s*sqrt(4-s^2)/2 keeps accuracy near s = 0 and s = 2.
    double beta = 0.5 * s * std::sqrt((2.0 - s) * (2.0 + s));
    return {alpha, beta};
}

inline double norm_pdf(double x) { return std::exp(-0.5 * x * x - kLogSqrt2Pi); }
inline double log_norm_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

/// Pr[N(0,1) >= x].
inline double norm_tail(double x) { return 0.5 * std::erfc(x / kSqrt2); }

/// log Pr[N(0,1) >= x], stable for large x.
inline double log_norm_tail(double x) {
    if (x < 30.0) return std::log(norm_tail(x));
    double x2 = x * x;
    // Asymptotic tail series; relative error < 2e-12 for x >= 30.
    double series = -1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2)
                    + 105.0 / (x2 * x2 * x2 * x2);
    return log_norm_pdf(x) - std::log(x) + std::log1p(series);
}

/// Exact F(eta); total on finite reals, strictly decreasing, in (0,1).
inline double cap_prob(double eta) {
    if (!std::isfinite(eta)) throw std::domain_error("cap_prob: eta must be finite");
    return norm_tail(eta);
}

inline double log_cap_prob(double eta) {
    if (!std::isfinite(eta)) throw std::domain_error("log_cap_prob: eta must be finite");
    return log_norm_tail(eta);
}

/// Solves log F(eta) = lp (lp < 0). Monotone Newton with bisection safeguard.
inline double inv_cap_prob_log(double lp) {
    if (!(lp < 0.0))
        throw std::domain_error("inv_cap_prob_log: log-probability must be negative");
    double lo = -8.0, hi = 8.0;
    while (log_norm_tail(lo) < lp) { hi = lo; lo *= 2.0; if (lo < -1e6) break; }
    while (log_norm_tail(hi) > lp) { lo = hi; hi *= 2.0; if (hi > 1e6) break; }
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        double f = log_norm_tail(x) - lp;
        if (f > 0.0) lo = x; else hi = x;
        // d/dx log F = -phi(x)/F(x)
        double deriv = -std::exp(log_norm_pdf(x) - log_norm_tail(x));
        double step = f / deriv;
        double nx = x - step;
        if (!(nx > lo && nx < hi)) nx = 0.5 * (lo + hi);
        if (std::abs(nx - x) < 1e-14 * (1.0 + std::abs(x))) { x = nx; break; }
        x = nx;
    }
    return x;
}

inline double inv_cap_prob(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("inv_cap_prob: p must be in (0,1)");
    return inv_cap_prob_log(std::log(p));
}

namespace detail {

// 15-point Gauss-Kronrod pair on [-1, 1].
constexpr double kGk15Nodes[15] = {
    -0.991455371120812639206854697526329, -0.949107912342758524526189684047851,
    -0.864864423359769072789712788640926, -0.741531185599394439863864773280788,
    -0.586087235467691130294144838258730, -0.405845151377397166906606412076961,
    -0.207784955007898467600689403773245, 0.0,
    0.207784955007898467600689403773245,  0.405845151377397166906606412076961,
    0.586087235467691130294144838258730,  0.741531185599394439863864773280788,
    0.864864423359769072789712788640926,  0.949107912342758524526189684047851,
    0.991455371120812639206854697526329};
constexpr double kGk15Weights[15] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
    0.204432940075298892414161999234649, 0.190350578064785409913256402421014,
    0.169004726639267902826583426598550, 0.140653259715525918745189590510238,
    0.104790010322250183839876322541518, 0.063092092629978553290700663189204,
    0.022935322010529224963732008058970};
constexpr double kG7Weights[7] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
    0.381830050505118944950369775488975, 0.279705391489276667901467771423780,
    0.129484966168869693270611432679082};

template <typename F>
inline void gk15(const F& f, double a, double b, double& result, double& err) {
    double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double k = 0.0, g = 0.0;
    for (int i = 0; i < 15; ++i) {
        double v = f(c + h * kGk15Nodes[i]);
        k += kGk15Weights[i] * v;
        if (i % 2 == 1) g += kG7Weights[i / 2] * v;
    }
    result = k * h;
    err = std::abs((k - g) * h);
}

template <typename F>
inline double integrate_adaptive(const F& f, double a, double b, double tol, int depth = 0) {
    double r, e;
    gk15(f, a, b, r, e);
    if (e <= tol || depth >= 52) return r;
    double m = 0.5 * (a + b);
    return integrate_adaptive(f, a, m, 0.5 * tol, depth + 1) +
           integrate_adaptive(f, m, b, 0.5 * tol, depth + 1);
}

} // namespace detail

/// log G(s, eta_u, eta_q): joint tail of a correlated standard bivariate
/// normal pair, correlation alpha(s). Conditional 1-D quadrature, peak-shifted
/// so extreme thresholds stay in range.
inline double log_joint_cap_prob(double s, double eta_u, double eta_q) {
    if (!(s > 0.0 && s < 2.0))
        throw std::domain_error("joint_cap_prob: s must lie in (0, 2), got " + std::to_string(s));
    if (!std::isfinite(eta_u) || !std::isfinite(eta_q))
        throw std::domain_error("joint_cap_prob: thresholds must be finite");
    auto [alpha, beta] = alpha_beta(s);
    // Condition on the variable with the larger threshold.
    double a = eta_u, b = eta_q;
    if (b > a) std::swap(a, b);

    // g(t) = log phi(a+t) - log phi(a) + log tail of Y | X = a+t.
    auto g = [&](double t) {
        double u = (b - alpha * (a + t)) / beta;
        return -0.5 * t * t - a * t + log_norm_tail(u);
    };

    // g is concave (sum of a concave quadratic and a log-concave tail of a
    // linear argument); ternary-search the peak.
    double t_hi = -a + std::sqrt(a * a + 400.0);
    if (alpha > 1e-12) {
        double t_sat = (b + 40.0 * beta) / alpha - a;
        if (t_sat > 0.0) t_hi += std::min(t_sat, 1e8);
    }
    double lo = 0.0, hi = t_hi;
    for (int it = 0; it < 300 && (hi - lo) > 1e-12 * (1.0 + hi); ++it) {
        double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        if (g(m1) < g(m2)) lo = m1; else hi = m2;
    }
    double tp = 0.5 * (lo + hi);
    double gmax = g(tp);

    // Cut where the integrand drops ~e^-50 below the peak (concavity gives
    // unique crossings on both sides).
    auto cross = [&](double inside, double outside) {
        for (int it = 0; it < 200; ++it) {
            double m = 0.5 * (inside + outside);
            if (g(m) > gmax - 50.0) inside = m; else outside = m;
            if (std::abs(outside - inside) < 1e-10 * (1.0 + std::abs(outside))) break;
        }
        return outside;
    };
    double t_left = 0.0;
    if (g(0.0) < gmax - 50.0) t_left = cross(tp, 0.0);
    double t_right = tp + 1.0;
    while (g(t_right) > gmax - 50.0) t_right = tp + 2.0 * (t_right - tp);
    t_right = cross(tp, t_right);

    auto integrand = [&](double t) { return std::exp(g(t) - gmax); };
    double J = detail::integrate_adaptive(integrand, t_left, t_right, 1e-13);
    return log_norm_pdf(a) + gmax + std::log(J);
}

/// Exact G(s, eta_u, eta_q); absolute error well below 1e-10.
inline double joint_cap_prob(double s, double eta_u, double eta_q) {
    return std::exp(log_joint_cap_prob(s, eta_u, eta_q));
}

struct LogExponents {
    double f_exp_u; ///< eta_u^2 / 2
    double f_exp_q; ///< eta_q^2 / 2
    double g_exp;   ///< (eta_u^2 + eta_q^2 - 2 alpha eta_u eta_q) / (2 beta^2)
};

/// Asymptotic negative-log probabilities of F and G (the eta -> infinity
/// regime the solver's closed forms come from).
inline LogExponents log_exponents(double s, double eta_u, double eta_q) {
    if (!(s > 0.0 && s < 2.0))
        throw std::domain_error("log_exponents: s must lie in (0, 2)");
    auto [alpha, beta] = alpha_beta(s);
    LogExponents e;
    e.f_exp_u = 0.5 * eta_u * eta_u;
    e.f_exp_q = 0.5 * eta_q * eta_q;
    e.g_exp = (eta_u * eta_u + eta_q * eta_q - 2.0 * alpha * eta_u * eta_q)
              / (2.0 * beta * beta);
    return e;
}

} // namespace lsf
