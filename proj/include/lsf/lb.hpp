#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lsf {

// Computable lower-bound formulas: robust expansion of the hypercube, the
// one-probe space exponent, the list-of-points trade-off curve, and exact
// small-dimension machinery (noise operator, hypercontractive inequality)
// behind them. Exact enumeration is capped at d = 16; beyond that the module
// refuses rather than silently sampling.

constexpr std::size_t kMaxExactDim = 16;

/// Holder-dual pair for the hypercontractive inequality:
/// (p - 1)(q - 1) = sigma^2.
struct NoiseParams {
    double sigma = 0.0;
    double p = 1.0;
    double q = 1.0;

    NoiseParams(double sigma_noise, double p_, double q_) : sigma(sigma_noise), p(p_), q(q_) {
        if (!(sigma >= 0.0 && sigma < 1.0))
            throw std::domain_error("NoiseParams: sigma must lie in [0, 1)");
        if (!(p >= 1.0) || !(q >= 1.0))
            throw std::domain_error("NoiseParams: p, q must be >= 1");
        if (std::abs((p - 1.0) * (q - 1.0) - sigma * sigma) > 1e-12)
            throw std::domain_error("NoiseParams: (p-1)(q-1) must equal sigma^2");
    }

    /// Completes q from (sigma, p).
    static NoiseParams from_p(double sigma_noise, double p_) {
        if (!(p_ > 1.0)) throw std::domain_error("NoiseParams::from_p: p must exceed 1");
        return NoiseParams(sigma_noise, p_, 1.0 + sigma_noise * sigma_noise / (p_ - 1.0));
    }
};

/// gamma^q * m^(1 + q/p - q), the lower bound on Phi_r(1/m, gamma).
inline double robust_expansion_lb(double m, double gamma, const NoiseParams& np) {
    if (!(m >= 1.0)) throw std::domain_error("robust_expansion_lb: m must be >= 1");
    if (!(gamma > 0.0 && gamma <= 1.0))
        throw std::domain_error("robust_expansion_lb: gamma must lie in (0, 1]");
    return std::pow(gamma, np.q) * std::pow(m, 1.0 + np.q / np.p - np.q);
}

/// Space exponent of one-probe data structures: (c/(c-1))^2 = 1/sigma^2 with
/// sigma = 1 - 1/c. The o(1) term is schedule-dependent; see
/// one_probe_schedule_exponent.
inline double one_probe_space_exponent(double c) {
    if (!(c > 1.0)) throw std::domain_error("one_probe_space_exponent: c must exceed 1");
    double ratio = c / (c - 1.0);
    return ratio * ratio;
}

/// The finite-n exponent produced by the proof's parameter schedule
/// p = 1 + loglog n / log n, q = 1 + sigma^2 log n / loglog n; converges to
/// 1/sigma^2 from below (very slowly -- the o(1) is logarithmic).
inline double one_probe_schedule_exponent(double c, double log_n) {
    if (!(c > 1.0)) throw std::domain_error("one_probe_schedule_exponent: c must exceed 1");
    if (!(log_n > 1.0)) throw std::domain_error("one_probe_schedule_exponent: log n too small");
    double sigma = 1.0 - 1.0 / c;
    double ll = std::log(log_n);
    double p = 1.0 + ll / log_n;
    double q = 1.0 + sigma * sigma * log_n / ll;
    return p / (q * (p - 1.0));
}

/// List-of-points query exponent at space n^(1+rho_u):
/// (sqrt(2c-1)/c - sqrt(rho_u)(c-1)/c)^2, valid for
/// 0 <= rho_u <= (2c-1)/(c-1)^2; the rho_u = 0 regime gives (2c-1)/c^2.
inline double list_of_points_rho_q(double c, double rho_u) {
    if (!(c > 1.0)) throw std::domain_error("list_of_points_rho_q: c must exceed 1");
    double hi = (2.0 * c - 1.0) / ((c - 1.0) * (c - 1.0));
    if (!(rho_u >= 0.0) || rho_u > hi + 1e-15)
        throw std::domain_error("list_of_points_rho_q: rho_u outside [0, " + std::to_string(hi) +
                                "]");
    if (rho_u == 0.0) return (2.0 * c - 1.0) / (c * c);
    double v = std::sqrt(2.0 * c - 1.0) / c - std::sqrt(rho_u) * (c - 1.0) / c;
    return v * v;
}

namespace detail {

inline void check_exact_dim(std::size_t d, const char* who) {
    if (d == 0 || d > kMaxExactDim)
        throw std::domain_error(std::string(who) + ": exact enumeration needs 1 <= d <= " +
                                std::to_string(kMaxExactDim));
}

/// In-place Walsh-Hadamard transform (unnormalized).
inline void wht(std::vector<double>& a) {
    std::size_t n = a.size();
    for (std::size_t len = 1; len < n; len <<= 1)
        for (std::size_t i = 0; i < n; i += len << 1)
            for (std::size_t j = i; j < i + len; ++j) {
                double x = a[j], y = a[j + len];
                a[j] = x + y;
                a[j + len] = x - y;
            }
}

} // namespace detail

/// Exact noise operator on function tables over {-1,1}^d: each coordinate is
/// kept with probability sigma and rerandomized otherwise, so the level-k
/// Fourier coefficient scales by sigma^k. Linear; preserves constants.
inline std::vector<double> noise_operator_apply(const std::vector<double>& f, double sigma_noise,
                                                std::size_t d) {
    detail::check_exact_dim(d, "noise_operator_apply");
    if (f.size() != (std::size_t(1) << d))
        throw std::invalid_argument("noise_operator_apply: table size must be 2^d");
    if (!(sigma_noise >= 0.0 && sigma_noise <= 1.0))
        throw std::domain_error("noise_operator_apply: sigma must lie in [0, 1]");
    std::vector<double> a = f;
    detail::wht(a);
    for (std::size_t mask = 0; mask < a.size(); ++mask)
        a[mask] *= std::pow(sigma_noise, __builtin_popcountll(mask));
    detail::wht(a);
    double inv = 1.0 / double(a.size());
    for (auto& v : a) v *= inv;
    return a;
}

struct HypercontractiveResult {
    double lhs = 0.0; ///< <T_sigma chi_A, chi_B> under the uniform measure
    double rhs = 0.0; ///< |chi_A|_p |chi_B|_q
    bool holds = false;
};

/// Exact check of <T_sigma chi_A, chi_B> <= |chi_A|_p |chi_B|_q on the
/// d-cube, A and B given as indicator tables of size 2^d.
inline HypercontractiveResult hypercontractive_check(std::size_t d, double sigma_noise,
                                                     const std::vector<char>& in_a,
                                                     const std::vector<char>& in_b,
                                                     const NoiseParams& np) {
    detail::check_exact_dim(d, "hypercontractive_check");
    std::size_t size = std::size_t(1) << d;
    if (in_a.size() != size || in_b.size() != size)
        throw std::invalid_argument("hypercontractive_check: indicator size must be 2^d");
    std::size_t ca = 0, cb = 0;
    std::vector<double> fa(size);
    for (std::size_t x = 0; x < size; ++x) {
        fa[x] = in_a[x] ? 1.0 : 0.0;
        ca += in_a[x] ? 1 : 0;
        cb += in_b[x] ? 1 : 0;
    }
    if (ca == 0 || cb == 0)
        throw std::invalid_argument("hypercontractive_check: A and B must be nonempty");
    std::vector<double> tf = noise_operator_apply(fa, sigma_noise, d);
    HypercontractiveResult res;
    for (std::size_t x = 0; x < size; ++x)
        if (in_b[x]) res.lhs += tf[x];
    res.lhs /= double(size);
    double a = double(ca) / double(size);
    double b = double(cb) / double(size);
    res.rhs = std::pow(a, 1.0 / np.p) * std::pow(b, 1.0 / np.q);
    res.holds = res.lhs <= res.rhs + 1e-9;
    return res;
}

} // namespace lsf
