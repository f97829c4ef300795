#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "lsf/parallel.hpp"
#include "lsf/points.hpp"
#include "lsf/rng.hpp"

namespace lsf {

// Random planted instances: uniform datasets with queries planted next to a
// random dataset point, plus an adversarial clustered generator for the
// data-dependent tree. All generation is counter-seeded per point/query, so
// output is independent of generation order and thread count.

struct InstanceTruth {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> planted_pairs; // (query, dataset)
    double r = 0.0;
    double cr = 0.0;
    Space space = Space::Sphere;
    double slack = 0.0; ///< 1 - min non-planted query-point distance / cr (when measured)
    bool slack_measured = false;
    std::uint64_t seed = 0;
};

struct SphereInstance {
    PointSet points;
    PointSet queries;
    InstanceTruth truth;
};

struct HammingInstance {
    BitPointSet points;
    BitPointSet queries;
    InstanceTruth truth;
};

namespace detail {

inline void random_unit_vector(RandomStream& rs, float* out, std::size_t d) {
    std::vector<double> v(d);
    double nn = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        v[j] = rs.next_normal();
        nn += v[j] * v[j];
    }
    double inv = 1.0 / std::sqrt(nn);
    for (std::size_t j = 0; j < d; ++j) out[j] = static_cast<float>(v[j] * inv);
}

/// Unit vector at exact chord distance s from p: q = (1 - s^2/2) p + beta u
/// with u a uniform tangent direction.
inline void planted_on_cap(RandomStream& rs, const float* p, double s, float* out, std::size_t d) {
    std::vector<double> u(d);
    double dp = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        u[j] = rs.next_normal();
        dp += u[j] * p[j];
    }
    double nn = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        u[j] -= dp * p[j];
        nn += u[j] * u[j];
    }
    double inv = 1.0 / std::sqrt(nn);
    double a = 1.0 - 0.5 * s * s;
    double b = std::sqrt(std::max(0.0, 1.0 - a * a));
    for (std::size_t j = 0; j < d; ++j)
        out[j] = static_cast<float>(a * double(p[j]) + b * u[j] * inv);
}

inline void measure_slack(InstanceTruth& t, const PointSet& pts, const PointSet& qs) {
    std::vector<double> per_query(qs.n, std::numeric_limits<double>::infinity());
    parallel_for(qs.n, [&](std::size_t b, std::size_t e) {
        for (std::size_t qi = b; qi < e; ++qi) {
            std::uint32_t planted = t.planted_pairs[qi].second;
            for (std::size_t i = 0; i < pts.n; ++i) {
                if (i == planted) continue;
                per_query[qi] = std::min(per_query[qi], dist2(qs.row(qi), pts.row(i), pts.d));
            }
        }
    });
    double min_d = *std::min_element(per_query.begin(), per_query.end());
    t.slack = std::max(0.0, 1.0 - std::sqrt(min_d) / t.cr);
    t.slack_measured = true;
}

} // namespace detail

/// Uniform unit vectors; each query sits at chord distance exactly sqrt(2)/c
/// from a uniformly chosen dataset point.
inline SphereInstance gen_sphere(std::size_t n, std::size_t d, double c, std::size_t q_count,
                                 std::uint64_t seed, bool measure_slack = false) {
    if (n == 0 || d == 0 || q_count == 0)
        throw std::domain_error("gen_sphere: n, d, q_count must be positive");
    if (!(c > 1.0)) throw std::domain_error("gen_sphere: c must exceed 1");
    SphereInstance inst;
    inst.points = PointSet(n, d);
    inst.queries = PointSet(q_count, d);
    parallel_for(n, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            RandomStream rs(mix_key(seed, stream::points, i));
            detail::random_unit_vector(rs, inst.points.row(i), d);
        }
    });
    double s = kSqrt2 / c;
    inst.truth.r = s;
    inst.truth.cr = c * s; // = sqrt(2)
    inst.truth.space = Space::Sphere;
    inst.truth.seed = seed;
    inst.truth.planted_pairs.resize(q_count);
    parallel_for(q_count, [&](std::size_t b, std::size_t e) {
        for (std::size_t qi = b; qi < e; ++qi) {
            RandomStream rs(mix_key(seed, stream::queries, qi));
            std::uint32_t planted = std::uint32_t(rs.next_below(n));
            inst.truth.planted_pairs[qi] = {std::uint32_t(qi), planted};
            detail::planted_on_cap(rs, inst.points.row(planted), s, inst.queries.row(qi), d);
        }
    });
    if (measure_slack) detail::measure_slack(inst.truth, inst.points, inst.queries);
    return inst;
}

/// Uniform +/-1 points; queries flip each coordinate of a random dataset
/// point independently with probability 1/(2c).
inline HammingInstance gen_hamming(std::size_t n, std::size_t d, double c, std::size_t q_count,
                                   std::uint64_t seed) {
    if (n == 0 || d == 0 || q_count == 0)
        throw std::domain_error("gen_hamming: n, d, q_count must be positive");
    if (!(c > 1.0)) throw std::domain_error("gen_hamming: c must exceed 1");
    HammingInstance inst;
    inst.points = BitPointSet(n, d);
    inst.queries = BitPointSet(q_count, d);
    parallel_for(n, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            RandomStream rs(mix_key(seed, stream::points, i));
            std::uint64_t* row = inst.points.row(i);
            for (std::size_t w = 0; w < inst.points.words_per_row; ++w) row[w] = rs.next_u64();
            if (d % 64) row[inst.points.words_per_row - 1] &= (1ULL << (d % 64)) - 1;
        }
    });
    double flip = 1.0 / (2.0 * c);
    inst.truth.r = double(d) * flip;
    inst.truth.cr = c * inst.truth.r; // = d/2
    inst.truth.space = Space::Hamming;
    inst.truth.seed = seed;
    inst.truth.planted_pairs.resize(q_count);
    parallel_for(q_count, [&](std::size_t b, std::size_t e) {
        for (std::size_t qi = b; qi < e; ++qi) {
            RandomStream rs(mix_key(seed, stream::queries, qi));
            std::uint32_t planted = std::uint32_t(rs.next_below(n));
            inst.truth.planted_pairs[qi] = {std::uint32_t(qi), planted};
            const std::uint64_t* src = inst.points.row(planted);
            std::uint64_t* dst = inst.queries.row(qi);
            for (std::size_t w = 0; w < inst.points.words_per_row; ++w) dst[w] = src[w];
            for (std::size_t j = 0; j < d; ++j)
                if (rs.next_double() < flip) dst[j / 64] ^= (1ULL << (j % 64));
        }
    });
    return inst;
}

namespace detail {

/// Inverse-CDF table for the polar component t = <x, center> of a point
/// uniform on the cap {t >= t_min} of S^{d-1}; density (1-t^2)^((d-3)/2).
class CapSampler {
public:
    CapSampler(std::size_t d, double t_min) {
        int knots = 4097;
        std::vector<double> logw(knots), cdf(knots);
        double k = 0.5 * (double(d) - 3.0);
        double hi = 1.0 - 1e-12;
        for (int i = 0; i < knots; ++i) {
            double t = t_min + (hi - t_min) * double(i) / (knots - 1);
            ts_.push_back(t);
            logw[i] = k * std::log1p(-t * t);
        }
        double mx = *std::max_element(logw.begin(), logw.end());
        cdf[0] = 0.0;
        for (int i = 1; i < knots; ++i)
            cdf[i] = cdf[i - 1] + 0.5 * (std::exp(logw[i] - mx) + std::exp(logw[i - 1] - mx));
        for (int i = 0; i < knots; ++i) cdf[i] /= cdf[knots - 1];
        cdf_ = std::move(cdf);
    }

    double sample(double u) const {
        auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
        std::size_t i = std::min<std::size_t>(cdf_.size() - 1,
                                              std::size_t(it - cdf_.begin()));
        if (i == 0) return ts_[0];
        double c0 = cdf_[i - 1], c1 = cdf_[i];
        double frac = c1 > c0 ? (u - c0) / (c1 - c0) : 0.0;
        return ts_[i - 1] + frac * (ts_[i] - ts_[i - 1]);
    }

private:
    std::vector<double> ts_;
    std::vector<double> cdf_;
};

} // namespace detail

/// Adversarial clustered input: points split uniformly across n_clusters
/// spherical caps of chord radius `factor` around orthonormal centers, with
/// planted queries exactly as in gen_sphere.
inline SphereInstance gen_clustered(std::size_t n, std::size_t d, double c,
                                    std::size_t n_clusters, double factor, std::uint64_t seed,
                                    bool measure_slack = false, std::size_t q_count = 0) {
    if (n == 0 || d == 0 || n_clusters == 0)
        throw std::domain_error("gen_clustered: n, d, n_clusters must be positive");
    if (!(c > 1.0)) throw std::domain_error("gen_clustered: c must exceed 1");
    if (n_clusters > d)
        throw std::domain_error("gen_clustered: needs n_clusters <= d for orthonormal centers");
    if (!(factor > 0.0) || factor >= kSqrt2 - 0.15)
        throw std::domain_error("gen_clustered: cluster_radius_factor must lie in (0, sqrt(2)-0.15) "
                                "so clusters stay strictly denser than the background");

    SphereInstance inst;
    inst.points = PointSet(n, d);

    // Orthonormal cluster centers via Gram-Schmidt on Gaussian draws.
    std::vector<std::vector<double>> centers(n_clusters, std::vector<double>(d));
    {
        RandomStream rs(mix_key(seed, stream::clusters));
        for (std::size_t k = 0; k < n_clusters; ++k) {
            for (std::size_t j = 0; j < d; ++j) centers[k][j] = rs.next_normal();
            for (std::size_t m = 0; m < k; ++m) {
                double dp = 0.0;
                for (std::size_t j = 0; j < d; ++j) dp += centers[k][j] * centers[m][j];
                for (std::size_t j = 0; j < d; ++j) centers[k][j] -= dp * centers[m][j];
            }
            double nn = 0.0;
            for (std::size_t j = 0; j < d; ++j) nn += centers[k][j] * centers[k][j];
            double inv = 1.0 / std::sqrt(nn);
            for (std::size_t j = 0; j < d; ++j) centers[k][j] *= inv;
        }
    }

    double t_min = 1.0 - 0.5 * factor * factor; // chord radius -> min cosine
    detail::CapSampler cap(d, t_min);
    parallel_for(n, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            RandomStream rs(mix_key(seed, stream::points, i));
            std::size_t k = rs.next_below(n_clusters); // multinomial assignment
            double t = cap.sample(rs.next_double());
            // tangent direction orthogonal to the center
            std::vector<double> u(d);
            double dp = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                u[j] = rs.next_normal();
                dp += u[j] * centers[k][j];
            }
            double nn = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                u[j] -= dp * centers[k][j];
                nn += u[j] * u[j];
            }
            double beta = std::sqrt(std::max(0.0, 1.0 - t * t)) / std::sqrt(nn);
            for (std::size_t j = 0; j < d; ++j)
                inst.points.row(i)[j] = static_cast<float>(t * centers[k][j] + beta * u[j]);
        }
    });

    if (q_count == 0) q_count = std::max<std::size_t>(1, n / 8);
    inst.queries = PointSet(q_count, d);
    double s = kSqrt2 / c;
    inst.truth.r = s;
    inst.truth.cr = c * s;
    inst.truth.space = Space::Sphere;
    inst.truth.seed = seed;
    inst.truth.planted_pairs.resize(q_count);
    parallel_for(q_count, [&](std::size_t b, std::size_t e) {
        for (std::size_t qi = b; qi < e; ++qi) {
            RandomStream rs(mix_key(seed, stream::queries, qi));
            std::uint32_t planted = std::uint32_t(rs.next_below(n));
            inst.truth.planted_pairs[qi] = {std::uint32_t(qi), planted};
            detail::planted_on_cap(rs, inst.points.row(planted), s, inst.queries.row(qi), d);
        }
    });
    if (measure_slack) detail::measure_slack(inst.truth, inst.points, inst.queries);
    return inst;
}

} // namespace lsf
