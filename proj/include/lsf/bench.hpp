#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "lsf/dd_tree.hpp"
#include "lsf/filter_tree.hpp"
#include "lsf/instance.hpp"
#include "lsf/parallel.hpp"
#include "lsf/tradeoff.hpp"

namespace lsf {

// Benchmark loop: generate, build, query, measure. Reports are key=value
// lines (sorted) plus optional CSV series; every line is reproducible from
// (config, seed) except the time_* keys.

struct BenchConfig {
    std::string structure = "di";    // di | dd
    std::string instance = "sphere"; // sphere | clustered
    std::size_t n = 4096;
    std::size_t d = 512;
    std::size_t q_count = 500;
    double c = 2.0;
    double r = 0.0; // 0 = sqrt(2)/c
    std::string regime = "balanced"; // balanced | rho_q | rho_u
    double regime_value = 0.0;
    int K = 0; // 0 = default_depth(n)
    std::uint64_t seed = 1;
    double success_constant = 3.0; // paper analysis value is 100; see README
    bool exhaustive = false;
    std::size_t n_clusters = 4;
    double cluster_factor = 0.45;
    DDParams dd;
    std::vector<std::size_t> series;
    unsigned threads = 0;
};

struct BenchResult {
    std::map<std::string, std::string> kv;
    std::vector<std::string> csv; ///< series lines, already formatted
};

struct FitResult {
    double slope = 0.0;
    double r_squared = 0.0;
};

/// Least-squares slope in log-log space.
inline FitResult fit_exponent(const std::vector<std::pair<std::size_t, double>>& series) {
    if (series.size() < 3) throw std::domain_error("fit_exponent: need at least 3 points");
    for (std::size_t i = 1; i < series.size(); ++i)
        if (series[i].first <= series[i - 1].first)
            throw std::domain_error("fit_exponent: n must be strictly increasing");
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (auto& [n, w] : series) {
        if (!(w > 0.0)) throw std::domain_error("fit_exponent: work values must be positive");
        double x = std::log(double(n));
        double y = std::log(w);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    double m = double(series.size());
    double cov = sxy - sx * sy / m;
    double vx = sxx - sx * sx / m;
    double vy = syy - sy * sy / m;
    FitResult fr;
    fr.slope = cov / vx;
    fr.r_squared = vy > 0 ? (cov * cov) / (vx * vy) : 1.0;
    return fr;
}

namespace detail {

inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
inline std::string fmt(std::uint64_t v) { return std::to_string(v); }

template <typename T>
inline double mean_of(const std::vector<T>& v) {
    if (v.empty()) return 0.0;
    double s = 0;
    for (auto x : v) s += double(x);
    return s / double(v.size());
}

template <typename T>
inline double median_of(std::vector<T> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    std::size_t m = v.size() / 2;
    return v.size() % 2 ? double(v[m]) : 0.5 * (double(v[m - 1]) + double(v[m]));
}

struct RunStats {
    double recall = 0.0;       ///< fraction answered within cr
    double planted_rate = 0.0; ///< fraction returning the planted point itself
    double mean_nodes = 0.0, median_nodes = 0.0;
    double mean_scanned = 0.0, median_scanned = 0.0;
    double mean_far_scanned = 0.0;
    std::size_t stored_points = 0;
    std::size_t node_count = 0;
    double build_seconds = 0.0, query_seconds = 0.0;
    TradeoffPoint point;
};

inline RunStats run_one(const BenchConfig& cfg, std::size_t n_override = 0) {
    BenchConfig c = cfg;
    if (n_override) c.n = n_override;
    double r = c.r > 0.0 ? c.r : kSqrt2 / c.c;
    int K = c.K > 0 ? c.K : default_depth(c.n);

    SphereInstance inst =
        c.instance == "clustered"
            ? gen_clustered(c.n, c.d, c.c, c.n_clusters, c.cluster_factor, c.seed, false,
                            c.q_count)
            : gen_sphere(c.n, c.d, c.c, c.q_count, c.seed);
    std::size_t nq = std::min<std::size_t>(c.q_count, inst.queries.n);

    CurveSelector sel = CurveSelector::Balanced;
    if (c.regime == "rho_q") sel = CurveSelector::FixQueryExp;
    else if (c.regime == "rho_u") sel = CurveSelector::FixSpaceExp;
    TradeoffPoint pt = curve_point(c.c, r, c.regime_value, sel);

    RunStats rs;
    auto t0 = std::chrono::steady_clock::now();

    std::vector<std::uint64_t> nodes_v(nq), scanned_v(nq), far_v(nq);
    std::vector<char> hit(nq, 0), planted_hit(nq, 0);

    if (c.structure == "di") {
        TradeoffPoint solved = solve_thresholds(pt, c.n, K, c.success_constant);
        FilterTree tree = FilterTree::build(inst.points, solved, c.seed, c.threads);
        auto t1 = std::chrono::steady_clock::now();
        rs.build_seconds = std::chrono::duration<double>(t1 - t0).count();
        auto st = tree.stats();
        rs.stored_points = st.stored_points;
        rs.node_count = st.node_count;
        rs.point = solved;
        FilterQueryOptions opts;
        opts.exhaustive = c.exhaustive;
        parallel_for(nq, [&](std::size_t b, std::size_t e) {
            for (std::size_t qi = b; qi < e; ++qi) {
                auto qs = tree.query(inst.queries.row(qi), inst.truth.cr, opts);
                nodes_v[qi] = qs.nodes_visited;
                scanned_v[qi] = qs.points_scanned;
                far_v[qi] = qs.far_points_scanned;
                hit[qi] = qs.found >= 0 && qs.distance <= inst.truth.cr;
                planted_hit[qi] = qs.found == inst.truth.planted_pairs[qi].second;
            }
        }, c.threads);
        rs.query_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
    } else if (c.structure == "dd") {
        DDParams dp = c.dd;
        dp.rho_q = pt.rho_q;
        dp.rho_u = pt.rho_u;
        dp.K = K;
        dp.success_constant = c.success_constant;
        DDTree tree = DDTree::build(inst.points, c.c, r, dp, c.seed);
        auto t1 = std::chrono::steady_clock::now();
        rs.build_seconds = std::chrono::duration<double>(t1 - t0).count();
        rs.stored_points = tree.report().stored_points;
        rs.node_count = tree.report().node_count;
        rs.point = pt;
        parallel_for(nq, [&](std::size_t b, std::size_t e) {
            for (std::size_t qi = b; qi < e; ++qi) {
                auto qs = tree.query(inst.queries.row(qi));
                nodes_v[qi] = qs.nodes_visited;
                scanned_v[qi] = qs.points_scanned;
                far_v[qi] = qs.far_points_scanned;
                hit[qi] = qs.found >= 0 && qs.distance <= inst.truth.cr;
                planted_hit[qi] = qs.found == inst.truth.planted_pairs[qi].second;
            }
        }, c.threads);
        rs.query_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
    } else {
        throw std::domain_error("bench: unknown structure " + c.structure);
    }

    rs.recall = mean_of(std::vector<int>(hit.begin(), hit.end()));
    rs.planted_rate = mean_of(std::vector<int>(planted_hit.begin(), planted_hit.end()));
    rs.mean_nodes = mean_of(nodes_v);
    rs.median_nodes = median_of(nodes_v);
    rs.mean_scanned = mean_of(scanned_v);
    rs.median_scanned = median_of(scanned_v);
    rs.mean_far_scanned = mean_of(far_v);
    return rs;
}

} // namespace detail

inline BenchResult run_bench(const BenchConfig& cfg) {
    BenchResult out;
    auto& kv = out.kv;
    double r = cfg.r > 0.0 ? cfg.r : kSqrt2 / cfg.c;
    kv["config_structure"] = cfg.structure;
    kv["config_instance"] = cfg.instance;
    kv["config_n"] = std::to_string(cfg.n);
    kv["config_d"] = std::to_string(cfg.d);
    kv["config_q_count"] = std::to_string(cfg.q_count);
    kv["config_c"] = detail::fmt(cfg.c);
    kv["config_r"] = detail::fmt(r);
    kv["config_regime"] = cfg.regime;
    kv["config_regime_value"] = detail::fmt(cfg.regime_value);
    kv["config_K"] = std::to_string(cfg.K > 0 ? cfg.K : default_depth(cfg.n));
    kv["config_seed"] = std::to_string(cfg.seed);
    kv["config_success_constant"] = detail::fmt(cfg.success_constant);
    kv["config_exhaustive"] = cfg.exhaustive ? "1" : "0";
    if (cfg.instance == "clustered") {
        kv["config_n_clusters"] = std::to_string(cfg.n_clusters);
        kv["config_cluster_factor"] = detail::fmt(cfg.cluster_factor);
    }
    if (cfg.structure == "dd") {
        kv["config_dd_eps"] = detail::fmt(cfg.dd.eps);
        kv["config_dd_delta"] = detail::fmt(cfg.dd.delta);
        kv["config_dd_tau"] = detail::fmt(cfg.dd.cluster_tau);
        kv["config_dd_ball_depth_cap"] = std::to_string(cfg.dd.ball_depth_cap);
        kv["config_dd_line9_margin"] = detail::fmt(cfg.dd.line9_margin);
    }

    detail::RunStats rs = detail::run_one(cfg);
    kv["recall"] = detail::fmt(rs.recall);
    kv["planted_rate"] = detail::fmt(rs.planted_rate);
    kv["nodes_visited_mean"] = detail::fmt(rs.mean_nodes);
    kv["nodes_visited_median"] = detail::fmt(rs.median_nodes);
    kv["points_scanned_mean"] = detail::fmt(rs.mean_scanned);
    kv["points_scanned_median"] = detail::fmt(rs.median_scanned);
    kv["far_points_scanned_mean"] = detail::fmt(rs.mean_far_scanned);
    kv["stored_points"] = std::to_string(rs.stored_points);
    kv["node_count"] = std::to_string(rs.node_count);
    kv["rho_q"] = detail::fmt(rs.point.rho_q);
    kv["rho_u"] = detail::fmt(rs.point.rho_u);
    kv["sigma_exp"] = detail::fmt(rs.point.sigma_exp);
    kv["tau_exp"] = detail::fmt(rs.point.tau_exp);
    if (rs.point.solved()) {
        kv["eta_u"] = detail::fmt(rs.point.eta_u);
        kv["eta_q"] = detail::fmt(rs.point.eta_q);
        kv["T"] = std::to_string(rs.point.T);
    }
    kv["time_build_seconds"] = detail::fmt(rs.build_seconds);
    kv["time_query_seconds"] = detail::fmt(rs.query_seconds);

    if (!cfg.series.empty()) {
        std::vector<std::pair<std::size_t, double>> pts;
        out.csv.push_back("series_n,scanned_mean,far_scanned_mean,nodes_mean");
        for (std::size_t n : cfg.series) {
            detail::RunStats s = detail::run_one(cfg, n);
            pts.emplace_back(n, std::max(s.mean_scanned, 1e-9));
            out.csv.push_back(std::to_string(n) + "," + detail::fmt(s.mean_scanned) + "," +
                              detail::fmt(s.mean_far_scanned) + "," + detail::fmt(s.mean_nodes));
        }
        FitResult fr = fit_exponent(pts);
        kv["series_slope"] = detail::fmt(fr.slope);
        kv["series_r_squared"] = detail::fmt(fr.r_squared);
    }
    return out;
}

inline std::string report_to_string(const BenchResult& res) {
    std::string s;
    for (const auto& [k, v] : res.kv) s += k + " = " + v + "\n";
    for (const auto& line : res.csv) s += line + "\n";
    return s;
}

} // namespace lsf
