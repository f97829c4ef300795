#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lsf/gaussian.hpp"

namespace lsf {

/// A fully solved operating point on the time-space trade-off curve.
/// Query time scales as n^rho_q, space as n^(1+rho_u).
struct TradeoffPoint {
    double c = 0.0;
    double r = 0.0;
    double rho_q = 0.0;
    double rho_u = 0.0;
    double sigma_exp = 0.0; ///< F(eta_u)^K = n^-sigma_exp
    double tau_exp = 0.0;   ///< F(eta_q)^K = n^-tau_exp
    double eta_u = std::numeric_limits<double>::quiet_NaN();
    double eta_q = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t T = 0; ///< branching factor; 0 until solve_thresholds
    int K = 0;           ///< tree depth; 0 until solve_thresholds

    bool solved() const { return T > 0 && K > 0; }
};

enum class CurveSelector { FixQueryExp, FixSpaceExp, Balanced };

/// Infeasible exponent request; carries the feasible interval.
class InfeasibleError : public std::runtime_error {
public:
    InfeasibleError(const std::string& what, double lo, double hi)
        : std::runtime_error(what), feasible_lo(lo), feasible_hi(hi) {}
    double feasible_lo;
    double feasible_hi;
};

namespace detail {

struct CurveCoeffs {
    double alpha_r, beta_r, alpha_cr, beta_cr;
    double A; ///< 1 - alpha(r) alpha(cr)
    double B; ///< alpha(r) - alpha(cr)
    double C; ///< beta(r) beta(cr)
};

inline CurveCoeffs curve_coeffs(double r, double cr) {
    CurveCoeffs cc;
    auto ar = alpha_beta(r);
    auto acr = alpha_beta(cr);
    cc.alpha_r = ar.first;
    cc.beta_r = ar.second;
    cc.alpha_cr = acr.first;
    cc.beta_cr = acr.second;
    cc.A = 1.0 - cc.alpha_r * cc.alpha_cr;
    cc.B = cc.alpha_r - cc.alpha_cr;
    cc.C = cc.beta_r * cc.beta_cr;
    return cc;
}

inline void check_cr(double c, double r) {
    if (!(c > 1.0)) throw std::domain_error("approximation c must exceed 1");
    if (!(r > 0.0)) throw std::domain_error("distance r must be positive");
    if (!(c * r < 2.0))
        throw std::domain_error("cr = " + std::to_string(c * r) + " must be below 2");
}

} // namespace detail

/// Exponent pair -> (sigma_exp, tau_exp) via the balancing relations
///   sqrt(tau) = (beta(cr) - beta(r) sqrt(rho_q)) / (alpha(r) - alpha(cr))
///   sqrt(sigma) = alpha(cr) sqrt(tau) + beta(cr).
inline void attach_exponents(TradeoffPoint& p) {
    auto cc = detail::curve_coeffs(p.r, p.c * p.r);
    double sq = std::sqrt(p.rho_q);
    double st = (cc.beta_cr - cc.beta_r * sq) / cc.B;
    double ss = cc.alpha_cr * st + cc.beta_cr;
    p.tau_exp = st * st;
    p.sigma_exp = ss * ss;
}

/// The unique point on the curve
///   (1 - a(r)a(cr)) sqrt(rho_q) + (a(r) - a(cr)) sqrt(rho_u) = b(r) b(cr)
/// with the requested exponent fixed. Exponents only; call solve_thresholds
/// to obtain concrete parameters.
inline TradeoffPoint curve_point(double c, double r, double value, CurveSelector which) {
    detail::check_cr(c, r);
    auto cc = detail::curve_coeffs(r, c * r);
    TradeoffPoint p;
    p.c = c;
    p.r = r;
    switch (which) {
    case CurveSelector::FixQueryExp: {
        double hi = (cc.C / cc.A) * (cc.C / cc.A);
        if (!(value >= 0.0) || value > hi + 1e-15)
            throw InfeasibleError("rho_q = " + std::to_string(value) +
                                      " outside feasible [0, " + std::to_string(hi) + "]",
                                  0.0, hi);
        p.rho_q = value;
        double su = (cc.C - cc.A * std::sqrt(value)) / cc.B;
        p.rho_u = std::max(0.0, su * su);
        break;
    }
    case CurveSelector::FixSpaceExp: {
        double hi = (cc.C / cc.B) * (cc.C / cc.B);
        if (!(value >= 0.0) || value > hi + 1e-15)
            throw InfeasibleError("rho_u = " + std::to_string(value) +
                                      " outside feasible [0, " + std::to_string(hi) + "]",
                                  0.0, hi);
        p.rho_u = value;
        double sq = (cc.C - cc.B * std::sqrt(value)) / cc.A;
        p.rho_q = std::max(0.0, sq * sq);
        break;
    }
    case CurveSelector::Balanced: {
        double s = cc.C / (cc.A + cc.B);
        p.rho_q = p.rho_u = s * s;
        break;
    }
    }
    attach_exponents(p);
    return p;
}

/// Equality points of c^2 sqrt(rho_q) + (c^2-1) sqrt(rho_u) = sqrt(2c^2-1),
/// the curve attained on random instances (and, via the data-dependent tree,
/// on worst-case ones).
inline std::vector<std::pair<double, double>> random_curve(double c, int grid) {
    if (!(c > 1.0)) throw std::domain_error("random_curve: c must exceed 1");
    if (grid < 2) throw std::domain_error("random_curve: grid must be >= 2");
    double rhs = std::sqrt(2.0 * c * c - 1.0);
    double sq_max = rhs / (c * c);
    std::vector<std::pair<double, double>> out;
    out.reserve(grid);
    for (int i = 0; i < grid; ++i) {
        double sq = sq_max * double(i) / double(grid - 1);
        double su = (rhs - c * c * sq) / (c * c - 1.0);
        out.emplace_back(sq * sq, su * su);
    }
    return out;
}

/// Equality points of (c^2+1) sqrt(rho_q) + (c^2-1) sqrt(rho_u) = 2c, the
/// data-independent bound for worst-case instances.
inline std::vector<std::pair<double, double>> worst_case_curve(double c, int grid) {
    if (!(c > 1.0)) throw std::domain_error("worst_case_curve: c must exceed 1");
    if (grid < 2) throw std::domain_error("worst_case_curve: grid must be >= 2");
    double sq_max = 2.0 * c / (c * c + 1.0);
    std::vector<std::pair<double, double>> out;
    out.reserve(grid);
    for (int i = 0; i < grid; ++i) {
        double sq = sq_max * double(i) / double(grid - 1);
        double su = (2.0 * c - (c * c + 1.0) * sq) / (c * c - 1.0);
        out.emplace_back(sq * sq, su * su);
    }
    return out;
}

/// Default depth: the asymptotic choice K ~ sqrt(ln n), never below 1.
inline int default_depth(std::size_t n) {
    return std::max(1, int(std::lround(std::sqrt(std::log(double(n))))));
}

/// The success-probability constant in T = const / G(r, eta_u, eta_q).
/// 100 is the analysis value; smaller constants suffice empirically and are
/// worth exposing since T^K is the dominant desk-scale cost.
constexpr double kDefaultSuccessConstant = 100.0;

/// Fill in eta_u, eta_q, T for a curve point: monotone root-finding on exact
/// F (log-space, tolerance ~1e-14), then T = ceil(const / G(r, eta_u, eta_q)).
inline TradeoffPoint solve_thresholds(TradeoffPoint p, std::size_t n, int K,
                                      double success_constant = kDefaultSuccessConstant) {
    if (n < 2) throw std::domain_error("solve_thresholds: n must be >= 2");
    if (K < 1) throw std::domain_error("solve_thresholds: K must be >= 1");
    if (!(p.sigma_exp > 0.0))
        throw std::domain_error("solve_thresholds: sigma_exp must be > 0 "
                                "(F(eta_u)^K = 1 has no finite threshold)");
    if (!(p.tau_exp > 0.0))
        throw std::domain_error("solve_thresholds: tau_exp must be > 0");
    double ln_n = std::log(double(n));
    p.eta_u = inv_cap_prob_log(-p.sigma_exp * ln_n / K);
    p.eta_q = inv_cap_prob_log(-p.tau_exp * ln_n / K);
    p.K = K;
    double g = std::exp(log_joint_cap_prob(p.r, p.eta_u, p.eta_q));
    double t_real = success_constant / g;
    if (!(t_real < 2147483647.0))
        throw std::runtime_error("solve_thresholds: branching factor overflow (G = " +
                                 std::to_string(g) + ")");
    p.T = std::uint64_t(std::ceil(t_real));
    if (p.T == 0) p.T = 1;
    return p;
}

/// Per-node threshold selection for the data-dependent tree: project the
/// global target radially (in sqrt space) onto the curve of the node geometry
/// (s1 = r1/R, s2 = r*/R), then solve exactly as above. Degenerate geometries
/// are clamped rather than rejected; `scale` records the projection factor.
struct NodeThresholds {
    double eta_u = 0.0;
    double eta_q = 0.0;
    std::uint64_t T = 1;
    double sigma_exp = 0.0;
    double tau_exp = 0.0;
    double scale = 1.0;
    bool clamped = false;
};

inline NodeThresholds solve_node_thresholds(double s1, double s2, double rho_q, double rho_u,
                                            std::size_t n, int K,
                                            double success_constant = kDefaultSuccessConstant) {
    NodeThresholds nt;
    double s2c = std::min(s2, 2.0 * (1.0 - 1e-12));
    double s1c = std::min(std::max(s1, 1e-9), s2c * (1.0 - 1e-12));
    if (s2c != s2 || s1c != s1) nt.clamped = true;

    auto a1 = alpha_beta(s1c);
    auto a2 = alpha_beta(s2c);
    double A = 1.0 - a1.first * a2.first;
    double B = a1.first - a2.first;
    double C = a1.second * a2.second;

    double denom = A * std::sqrt(rho_q) + B * std::sqrt(rho_u);
    double x = denom > 0.0 ? C / denom : 1.0;
    if (x > 1.0) {
        x = 1.0;
        nt.clamped = true;
    }
    nt.scale = x;
    double sq = x * std::sqrt(rho_q);
    double st = (a2.second - a1.second * sq) / B;
    if (st < 0.0) {
        st = 0.0;
        nt.clamped = true;
    }
    double ss = a2.first * st + a2.second;
    if (ss < 0.0) {
        ss = 0.0;
        nt.clamped = true;
    }
    nt.tau_exp = st * st;
    nt.sigma_exp = ss * ss;

    double ln_n = std::log(double(n));
    double eta_u = nt.sigma_exp > 0.0 ? inv_cap_prob_log(-nt.sigma_exp * ln_n / K)
                                      : -std::numeric_limits<double>::infinity();
    double eta_q = nt.tau_exp > 0.0 ? inv_cap_prob_log(-nt.tau_exp * ln_n / K)
                                    : -std::numeric_limits<double>::infinity();
    // Filters stay valid for any threshold; floor at 0 keeps G well away from
    // 0/1 when a boundary child drives an exponent to zero.
    if (!(eta_u >= 0.0)) {
        eta_u = 0.0;
        nt.clamped = true;
    }
    if (!(eta_q >= 0.0)) {
        eta_q = 0.0;
        nt.clamped = true;
    }
    nt.eta_u = eta_u;
    nt.eta_q = eta_q;
    double g = std::exp(log_joint_cap_prob(s1c, eta_u, eta_q));
    double t_real = success_constant / g;
    if (!(t_real < 2147483647.0))
        throw std::runtime_error("solve_node_thresholds: branching factor overflow at s1 = " +
                                 std::to_string(s1c));
    nt.T = std::max<std::uint64_t>(1, std::uint64_t(std::ceil(t_real)));
    return nt;
}

} // namespace lsf
