#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsf/filter_tree.hpp"
#include "lsf/points.hpp"
#include "lsf/reductions.hpp"
#include "lsf/rng.hpp"
#include "lsf/seb.hpp"
#include "lsf/tradeoff.hpp"

namespace lsf {

// The data-dependent decision tree: spheres are processed by carving dense
// clusters into enclosing balls and handling the pseudo-random remainder with
// one Gaussian cap layer; balls are discretized into thin annuli and reduced
// back to spheres with projected distance thresholds.

/// Distance between a point on the sphere of radius R1 and the radial
/// projection onto that sphere of a point at radius R2 and distance r.
inline double project_distance(double R1, double R2, double r) {
    if (!(R1 > 0.0) || !(R2 > 0.0))
        throw std::domain_error("project_distance: radii must be positive");
    if (r < std::abs(R1 - R2) - 1e-12)
        throw std::domain_error("project_distance: no configuration with r < |R1 - R2|");
    double arg = r * r - (R1 - R2) * (R1 - R2);
    return std::sqrt(R1 * std::max(0.0, arg) / R2);
}

struct DDParams {
    double rho_q = 0.0;
    double rho_u = 0.0;
    int K = 0; ///< 0 picks default_depth(n)
    double eps = 0.15;          ///< dense-cluster cap radius (sqrt(2)-eps) R
    double delta = 0.0125;      ///< annulus width, in units of r1
    double cluster_tau = 0.02;  ///< dense-cluster fraction of the entry point count
    int ball_depth_cap = 8;
    double line9_margin = 0.02; ///< carve when LHS < RHS * (1 + margin)
    double eps_cover = 0.05;    ///< widening of the candidate-center ball
    /// Floor on the carve threshold max(ceil(tau m), this): tau m drops below
    /// 1 in small subsets, where a lone close pair is not a dense cluster.
    std::size_t min_cluster_points = 8;
    double success_constant = kDefaultSuccessConstant;
    std::size_t jl_dim = 0; ///< lifted pipeline only; 0 = skip projection
    double lift_R = 0.0;    ///< 0 = grid_lift default
    enum class Lift { Auto, Never, Always } lift = Lift::Auto;
    bool debug_checks = false;

    void validate() const {
        if (!(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0) ||
            !(cluster_tau > 0.0 && cluster_tau < 1.0))
            throw std::domain_error("DDParams: eps, delta, cluster_tau must lie in (0,1)");
        if (ball_depth_cap < 1) throw std::domain_error("DDParams: ball_depth_cap must be >= 1");
        if (!(rho_q >= 0.0 && rho_u >= 0.0) || (rho_q == 0.0 && rho_u == 0.0))
            throw std::domain_error("DDParams: target exponents unset");
    }
};

enum class DDNodeKind : std::uint8_t { SphereInner = 0, BallInner = 1, LeafList = 2, SinglePoint = 3 };
enum class SinglePointReason : std::uint8_t { None = 0, BaseCase2 = 1, TrivialBall = 2, Singleton = 3 };

struct DDFrame {
    std::vector<float> center; ///< working-space coordinates
    double R = 0.0;
    double r1 = 0.0;
    double r2 = 0.0;
};

struct DDNode {
    DDNodeKind kind = DDNodeKind::LeafList;
    SinglePointReason sp_reason = SinglePointReason::None;
    std::int32_t level = 0;
    std::uint32_t frame = 0;
    // SphereInner
    std::uint64_t key = 0;
    double eta_u = 0.0, eta_q = 0.0;
    std::uint64_t T = 0;
    double s1 = 0.0, s2_eff = 0.0, x_scale = 1.0;
    std::vector<std::uint32_t> cluster_children;
    std::vector<std::uint32_t> cap_children;
    std::vector<std::uint64_t> cap_slots;
    // BallInner
    double ann_width = 0.0;
    struct BallChild {
        std::uint32_t annulus; ///< data annulus index i
        std::uint32_t qdist;   ///< snapped query distance index j
        std::uint32_t child;
    };
    std::vector<BallChild> ball_children;
    // LeafList / SinglePoint store original dataset indices
    std::vector<std::uint32_t> points;
    std::uint32_t single_point = 0;
};

struct DDBuildReport {
    std::size_t node_count = 0;
    std::size_t stored_points = 0;
    std::size_t carve_events = 0;
    std::size_t max_ball_depth = 0;
    bool carve_postcondition_ok = true; ///< only meaningful with debug_checks
};

struct DDQueryStats {
    std::int64_t found = -1;
    double distance = 0.0; ///< original-space distance of the returned point
    std::uint64_t nodes_visited = 0;
    std::uint64_t points_scanned = 0;
    std::uint64_t far_points_scanned = 0;
    std::uint64_t ball_rejects = 0;
    std::uint64_t cluster_descents = 0;
};

struct DDInvariantReport {
    bool ok = true;
    double min_ratio_over_c = std::numeric_limits<double>::infinity(); ///< min (r2/r1)/c
    double max_r2_over_cr = 0.0; ///< max r2 / (c * r1_root)
    std::size_t max_ball_depth = 0;
    std::size_t bad_leaf_levels = 0;
    std::size_t bad_single_points = 0;
    std::size_t inner_nodes = 0;
};

class DDTree {
public:
    double c() const { return c_; }
    double r() const { return r_; }
    const DDParams& params() const { return params_; }
    const DDBuildReport& report() const { return report_; }
    const std::vector<DDNode>& nodes() const { return nodes_; }
    const std::vector<DDFrame>& frames() const { return frames_; }
    const std::vector<std::uint32_t>& roots() const { return roots_; }
    bool lifted() const { return lifted_; }

    void attach(const PointSet& data) {
        if (data.n != n_ || data.d != d_orig_)
            throw std::invalid_argument("DDTree::attach: dataset shape mismatch");
        data_ = &data;
    }
    const PointSet& dataset() const {
        if (!data_) throw std::logic_error("DDTree: no dataset attached");
        return *data_;
    }

    static DDTree build(const PointSet& data, double c, double r, DDParams params,
                        std::uint64_t seed);

    DDQueryStats query(const float* q) const;

    DDInvariantReport check_invariants(double tol = 0.05) const;

    void save(const std::string& path) const;
    static DDTree load(const std::string& path);

private:
    const PointSet* data_ = nullptr;
    double c_ = 0.0, r_ = 0.0;
    DDParams params_;
    std::uint64_t seed_ = 0;
    std::size_t n_ = 0, d_orig_ = 0;
    bool lifted_ = false;
    double scale_ = 1.0; ///< lifted pipeline rescale (1/r)
    JlMap jl_;
    bool has_jl_ = false;
    GridLift grid_;
    std::vector<std::size_t> cube_root_; ///< per grid cube, index into roots_
    std::vector<DDFrame> frames_;
    std::vector<DDNode> nodes_;
    std::vector<std::uint32_t> roots_;
    DDBuildReport report_;

    struct BuildCtx {
        PointSet work; ///< working coordinates; ball snapping appends rows
        std::vector<std::uint32_t> orig;
        std::size_t n_global = 0;
    };

    std::uint32_t process_sphere(BuildCtx& ctx, std::vector<std::uint32_t> rows,
                                 std::uint32_t frame_id, int level, std::uint64_t key,
                                 int ball_depth);
    std::uint32_t process_ball(BuildCtx& ctx, const std::vector<std::uint32_t>& rows,
                               std::vector<double> center, double R, double r1, double r2,
                               int level, std::uint64_t key, int ball_depth);
    std::uint32_t make_leaf(BuildCtx& ctx, const std::vector<std::uint32_t>& rows,
                            std::uint32_t frame_id, int level);
    std::uint32_t make_single(BuildCtx& ctx, std::uint32_t row, std::uint32_t frame_id, int level,
                              SinglePointReason why);

    bool query_rec(std::uint32_t id, const std::vector<float>& q_cur, const float* q_orig,
                   DDQueryStats& st, std::vector<float>& zbuf) const;
};

inline std::uint32_t DDTree::make_leaf(BuildCtx& ctx, const std::vector<std::uint32_t>& rows,
                                       std::uint32_t frame_id, int level) {
    DDNode nd;
    nd.kind = DDNodeKind::LeafList;
    nd.level = level;
    nd.frame = frame_id;
    nd.points.reserve(rows.size());
    for (auto rw : rows) nd.points.push_back(ctx.orig[rw]);
    nodes_.push_back(std::move(nd));
    report_.stored_points += rows.size();
    return std::uint32_t(nodes_.size() - 1);
}

inline std::uint32_t DDTree::make_single(BuildCtx& ctx, std::uint32_t row, std::uint32_t frame_id,
                                         int level, SinglePointReason why) {
    DDNode nd;
    nd.kind = DDNodeKind::SinglePoint;
    nd.sp_reason = why;
    nd.level = level;
    nd.frame = frame_id;
    nd.single_point = ctx.orig[row];
    nodes_.push_back(std::move(nd));
    report_.stored_points += 1;
    return std::uint32_t(nodes_.size() - 1);
}

inline std::uint32_t DDTree::process_sphere(BuildCtx& ctx, std::vector<std::uint32_t> rows,
                                            std::uint32_t frame_id, int level, std::uint64_t key,
                                            int ball_depth) {
    const DDFrame frame = frames_[frame_id]; // copy: frames_ may reallocate below
    if (level == params_.K) return make_leaf(ctx, rows, frame_id, level);
    if (rows.size() == 1) return make_single(ctx, rows[0], frame_id, level, SinglePointReason::Singleton);
    if (frame.r2 >= 2.0 * frame.R)
        return make_single(ctx, rows[0], frame_id, level, SinglePointReason::BaseCase2);

    double s1 = frame.r1 / frame.R;
    double s2_raw = std::min(frame.r2 / frame.R, 2.0 * (1.0 - 1e-12));
    auto a1 = alpha_beta(std::min(s1, 2.0));
    auto a2 = alpha_beta(s2_raw);
    double lhs = (1.0 - a1.first * a2.first) * std::sqrt(params_.rho_q) +
                 (a1.first - a2.first) * std::sqrt(params_.rho_u);
    double rhs = a1.second * a2.second;
    bool carve = lhs < rhs * (1.0 + params_.line9_margin);

    DDNode nd;
    nd.kind = DDNodeKind::SphereInner;
    nd.level = level;
    nd.frame = frame_id;
    nd.key = key;
    std::uint32_t id;

    double s2_eff = s2_raw;
    if (carve) {
        std::size_t m = rows.size();
        std::size_t thresh = std::max<std::size_t>(
            std::size_t(std::ceil(params_.cluster_tau * double(m))), params_.min_cluster_points);
        double rhat = (kSqrt2 - params_.eps) * frame.R * (1.0 + params_.eps_cover);
        double rhat2 = rhat * rhat;
        // Deterministic candidate order: ascending original index.
        std::sort(rows.begin(), rows.end(), [&](std::uint32_t a, std::uint32_t b) {
            return ctx.orig[a] < ctx.orig[b];
        });
        std::size_t carved_count = 0;
        bool found_cluster = true;
        while (found_cluster && rows.size() >= std::max<std::size_t>(thresh, 2)) {
            found_cluster = false;
            for (std::size_t ci = 0; ci < rows.size() && !found_cluster; ++ci) {
                const float* cand = ctx.work.row(rows[ci]);
                std::size_t cnt = 0;
                for (auto rw : rows)
                    if (dist2(ctx.work.row(rw), cand, ctx.work.d) <= rhat2) ++cnt;
                if (cnt < thresh) continue;
                found_cluster = true;
                std::vector<std::uint32_t> cluster, rest;
                for (auto rw : rows) {
                    if (dist2(ctx.work.row(rw), cand, ctx.work.d) <= rhat2)
                        cluster.push_back(rw);
                    else
                        rest.push_back(rw);
                }
                Ball seb = smallest_enclosing_ball(ctx.work, cluster);
                ++report_.carve_events;
                ++carved_count;
                std::uint32_t ball = process_ball(ctx, cluster, seb.center, seb.radius, frame.r1,
                                                  frame.r2, level,
                                                  mix_key(key, 0xba11, carved_count), ball_depth + 1);
                nd.cluster_children.push_back(ball);
                rows.swap(rest);
            }
        }
        if (params_.debug_checks) {
            for (std::size_t ci = 0; ci < rows.size(); ++ci) {
                std::size_t cnt = 0;
                for (auto rw : rows)
                    if (dist2(ctx.work.row(rw), ctx.work.row(rows[ci]), ctx.work.d) <= rhat2) ++cnt;
                if (cnt >= thresh) report_.carve_postcondition_ok = false;
            }
        }
        s2_eff = kSqrt2; // r* = sqrt(2) R
    }

    nd.s1 = s1;
    nd.s2_eff = s2_eff;
    if (!rows.empty()) {
        NodeThresholds nt = solve_node_thresholds(s1, s2_eff, params_.rho_q, params_.rho_u,
                                                  ctx.n_global, params_.K,
                                                  params_.success_constant);
        nd.eta_u = nt.eta_u;
        nd.eta_q = nt.eta_q;
        nd.T = nt.T;
        nd.x_scale = nt.scale;
        double thr = nt.eta_u * frame.R;
        const bool centered = norm(frame.center.data(), ctx.work.d) > 0.0;
        std::vector<float> zbuf(ctx.work.d);
        std::vector<std::uint32_t> filtered;
        nodes_.push_back(nd); // reserve our slot before children
        id = std::uint32_t(nodes_.size() - 1);
        std::vector<std::uint32_t> caps;
        std::vector<std::uint64_t> slots;
        for (std::uint64_t slot = 1; slot <= nt.T; ++slot) {
            std::uint64_t ck = mix_key(key, slot);
            RandomStream rs(ck);
            rs.fill_normals(zbuf.data(), ctx.work.d);
            double zo = centered ? dot(zbuf.data(), frame.center.data(), ctx.work.d) : 0.0;
            filter_subset(ctx.work, rows, zbuf.data(), zo, thr, filtered);
            if (!filtered.empty()) {
                caps.push_back(process_sphere(ctx, filtered, frame_id, level + 1, ck, ball_depth));
                slots.push_back(slot);
            }
        }
        nodes_[id].cap_children = std::move(caps);
        nodes_[id].cap_slots = std::move(slots);
        // cluster children were attached to nd before the push
        return id;
    }
    nodes_.push_back(nd);
    return std::uint32_t(nodes_.size() - 1);
}

inline std::uint32_t DDTree::process_ball(BuildCtx& ctx, const std::vector<std::uint32_t>& rows,
                                          std::vector<double> center, double R, double r1,
                                          double r2, int level, std::uint64_t key,
                                          int ball_depth) {
    if (ball_depth > params_.ball_depth_cap)
        throw std::runtime_error("dd_build: ProcessBall depth exceeded ball_depth_cap = " +
                                 std::to_string(params_.ball_depth_cap));
    report_.max_ball_depth = std::max(report_.max_ball_depth, std::size_t(ball_depth));

    DDFrame bframe;
    bframe.center.assign(center.begin(), center.end());
    bframe.R = R;
    bframe.r1 = r1;
    bframe.r2 = r2;
    frames_.push_back(bframe);
    std::uint32_t frame_id = std::uint32_t(frames_.size() - 1);

    if (rows.size() == 1) return make_single(ctx, rows[0], frame_id, level, SinglePointReason::Singleton);
    if (r1 + 2.0 * R <= r2)
        return make_single(ctx, rows[0], frame_id, level, SinglePointReason::TrivialBall);

    std::size_t d = ctx.work.d;
    double w = params_.delta * r1;

    // Snap radii outward to multiples of w; this moves any point by less than
    // w and any pairwise distance by at most 2 delta r1.
    std::map<std::uint32_t, std::vector<std::uint32_t>> annuli; // i -> new rows
    for (auto rw : rows) {
        double ri = 0.0;
        {
            const float* p = ctx.work.row(rw);
            for (std::size_t j = 0; j < d; ++j) {
                double diff = double(p[j]) - center[j];
                ri += diff * diff;
            }
        }
        ri = std::sqrt(ri);
        std::uint32_t i = std::max<std::uint32_t>(1, std::uint32_t(std::ceil(ri / w - 1e-12)));
        double target = double(i) * w;
        std::uint32_t nrow = std::uint32_t(ctx.work.n);
        ctx.work.data.resize(ctx.work.data.size() + d); // may reallocate
        ctx.work.n += 1;
        const float* p = ctx.work.row(rw);
        float* out = ctx.work.row(nrow);
        if (ri > 0.0) {
            double sc = target / ri;
            for (std::size_t j = 0; j < d; ++j)
                out[j] = static_cast<float>(center[j] + sc * (double(p[j]) - center[j]));
        } else {
            for (std::size_t j = 0; j < d; ++j) out[j] = static_cast<float>(center[j]);
            out[0] = static_cast<float>(center[0] + target);
        }
        ctx.orig.push_back(ctx.orig[rw]);
        annuli[i].push_back(nrow);
    }

    DDNode nd;
    nd.kind = DDNodeKind::BallInner;
    nd.level = level;
    nd.frame = frame_id;
    nd.ann_width = w;
    nodes_.push_back(nd);
    std::uint32_t id = std::uint32_t(nodes_.size() - 1);

    std::uint32_t j_max = std::uint32_t(std::ceil((R + r1 + 2.0 * w) / w));
    std::vector<DDNode::BallChild> children;
    double near_arg = r1 + 2.0 * w;
    double far_arg = r2 - 2.0 * w;
    for (auto& [i, ann_rows] : annuli) {
        double R1 = double(i) * w;
        for (std::uint32_t j = 1; j <= j_max; ++j) {
            double gap = w * double(i > j ? i - j : j - i);
            if (gap > near_arg + 1e-12) continue;
            double R2 = double(j) * w;
            double r1t, r2t;
            if (near_arg >= R1 + R2) {
                r1t = r2t = 2.0 * R1; // thresholds cover the child sphere
            } else {
                r1t = project_distance(R1, R2, near_arg);
                r2t = far_arg >= R1 + R2 ? 2.0 * R1 : project_distance(R1, R2, far_arg);
            }
            DDFrame cframe;
            cframe.center = bframe.center;
            cframe.R = R1;
            cframe.r1 = r1t;
            cframe.r2 = r2t;
            frames_.push_back(cframe);
            std::uint32_t cf = std::uint32_t(frames_.size() - 1);
            std::uint32_t child =
                process_sphere(ctx, ann_rows, cf, level, mix_key(key, i, j), ball_depth);
            children.push_back({i, j, child});
        }
    }
    nodes_[id].ball_children = std::move(children);
    return id;
}

inline DDTree DDTree::build(const PointSet& data, double c, double r, DDParams params,
                            std::uint64_t seed) {
    if (data.n == 0) throw std::invalid_argument("dd_build: empty dataset");
    if (!(c > 1.0)) throw std::domain_error("dd_build: c must exceed 1");
    if (!(r > 0.0)) throw std::domain_error("dd_build: r must be positive");
    if (params.K == 0) params.K = default_depth(data.n);
    params.validate();

    DDTree t;
    t.data_ = &data;
    t.c_ = c;
    t.r_ = r;
    t.params_ = params;
    t.seed_ = seed;
    t.n_ = data.n;
    t.d_orig_ = data.d;

    bool unit = true;
    for (std::size_t i = 0; i < data.n && unit; ++i)
        unit = std::abs(norm(data.row(i), data.d) - 1.0) <= 1e-4;
    bool direct = params.lift == DDParams::Lift::Never ||
                  (params.lift == DDParams::Lift::Auto && unit && c * r < 2.0);

    std::uint64_t root_key = mix_key(seed, stream::tree);
    if (direct) {
        if (!unit)
            throw std::invalid_argument("dd_build: direct sphere mode requires unit-norm points");
        t.lifted_ = false;
        BuildCtx ctx;
        ctx.work = data; // copy; ball snapping appends derived rows
        ctx.orig.resize(data.n);
        for (std::size_t i = 0; i < data.n; ++i) ctx.orig[i] = std::uint32_t(i);
        ctx.n_global = data.n;
        DDFrame root;
        root.center.assign(data.d, 0.0f);
        root.R = 1.0;
        root.r1 = r;
        root.r2 = c * r;
        t.frames_.push_back(root);
        std::vector<std::uint32_t> all(data.n);
        for (std::size_t i = 0; i < data.n; ++i) all[i] = std::uint32_t(i);
        t.roots_.push_back(t.process_sphere(ctx, all, 0, 0, root_key, 0));
    } else {
        t.lifted_ = true;
        t.scale_ = 1.0 / r;
        PointSet scaled(data.n, data.d);
        for (std::size_t i = 0; i < data.n * data.d; ++i)
            scaled.data[i] = static_cast<float>(double(data.data[i]) * t.scale_);
        const PointSet* stage = &scaled;
        PointSet projected;
        if (params.jl_dim > 0 && params.jl_dim < data.d) {
            auto pr = jl_project(scaled, params.jl_dim, mix_key(seed, stream::jl));
            projected = std::move(pr.first);
            t.jl_ = std::move(pr.second);
            t.has_jl_ = true;
            stage = &projected;
        }
        t.grid_ = grid_lift(*stage, mix_key(seed, stream::grid), params.lift_R);
        for (std::size_t ci = 0; ci < t.grid_.cubes.size(); ++ci) {
            const auto& cube = t.grid_.cubes[ci];
            BuildCtx ctx;
            ctx.work = cube.lifted;
            ctx.orig = cube.orig;
            ctx.n_global = data.n;
            DDFrame root;
            root.center.assign(ctx.work.d, 0.0f);
            root.R = t.grid_.R;
            root.r1 = 1.0;
            root.r2 = c;
            t.frames_.push_back(root);
            std::vector<std::uint32_t> all(ctx.work.n);
            for (std::size_t i = 0; i < ctx.work.n; ++i) all[i] = std::uint32_t(i);
            t.cube_root_.push_back(t.roots_.size());
            t.roots_.push_back(t.process_sphere(ctx, all, std::uint32_t(t.frames_.size() - 1), 0,
                                                mix_key(root_key, ci), 0));
        }
    }
    t.report_.node_count = t.nodes_.size();
    return t;
}

inline bool DDTree::query_rec(std::uint32_t id, const std::vector<float>& q_cur,
                              const float* q_orig, DDQueryStats& st,
                              std::vector<float>& zbuf) const {
    const DDNode& nd = nodes_[id];
    const DDFrame& frame = frames_[nd.frame];
    const PointSet& data = dataset();
    double cr = c_ * r_;
    ++st.nodes_visited;
    std::size_t d = q_cur.size();
    switch (nd.kind) {
    case DDNodeKind::LeafList: {
        for (auto pidx : nd.points) {
            ++st.points_scanned;
            double dd = dist(data.row(pidx), q_orig, data.d);
            if (dd <= cr) {
                st.found = pidx;
                st.distance = dd;
                return true;
            }
            ++st.far_points_scanned;
        }
        return false;
    }
    case DDNodeKind::SinglePoint: {
        ++st.points_scanned;
        double dd = dist(data.row(nd.single_point), q_orig, data.d);
        if (dd <= cr) {
            st.found = nd.single_point;
            st.distance = dd;
            return true;
        }
        ++st.far_points_scanned;
        return false;
    }
    case DDNodeKind::BallInner: {
        double dq = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            double diff = double(q_cur[j]) - double(frame.center[j]);
            dq += diff * diff;
        }
        dq = std::sqrt(dq);
        if (dq > frame.R + frame.r1 + 1e-9) {
            ++st.ball_rejects;
            return false;
        }
        std::uint32_t jq =
            std::max<std::uint32_t>(1, std::uint32_t(std::ceil(dq / nd.ann_width - 1e-12)));
        for (const auto& bc : nd.ball_children) {
            if (bc.qdist != jq) continue;
            double R1 = double(bc.annulus) * nd.ann_width;
            std::vector<float> qp(d);
            if (dq > 0.0) {
                double sc = R1 / dq;
                for (std::size_t j = 0; j < d; ++j)
                    qp[j] = static_cast<float>(double(frame.center[j]) +
                                               sc * (double(q_cur[j]) - double(frame.center[j])));
            } else {
                for (std::size_t j = 0; j < d; ++j) qp[j] = frame.center[j];
                qp[0] = static_cast<float>(double(frame.center[0]) + R1);
            }
            if (query_rec(bc.child, qp, q_orig, st, zbuf)) return true;
        }
        return false;
    }
    case DDNodeKind::SphereInner: {
        for (auto cl : nd.cluster_children) {
            ++st.cluster_descents;
            if (query_rec(cl, q_cur, q_orig, st, zbuf)) return true;
        }
        if (nd.T == 0) return false;
        const bool centered = norm(frame.center.data(), d) > 0.0;
        double thr = nd.eta_q * frame.R;
        for (std::size_t k = 0; k < nd.cap_children.size(); ++k) {
            std::uint64_t ck = mix_key(nd.key, nd.cap_slots[k]);
            RandomStream rs(ck);
            rs.fill_normals(zbuf.data(), d);
            double zo = centered ? dot(zbuf.data(), frame.center.data(), d) : 0.0;
            if (dot(zbuf.data(), q_cur.data(), d) - zo >= thr) {
                if (query_rec(nd.cap_children[k], q_cur, q_orig, st, zbuf)) return true;
            }
        }
        return false;
    }
    }
    return false;
}

inline DDQueryStats DDTree::query(const float* q) const {
    DDQueryStats st;
    if (!lifted_) {
        std::vector<float> q_cur(q, q + d_orig_);
        std::vector<float> zbuf(d_orig_);
        query_rec(roots_[0], q_cur, q, st, zbuf);
        return st;
    }
    std::vector<float> scaled(d_orig_);
    for (std::size_t j = 0; j < d_orig_; ++j)
        scaled[j] = static_cast<float>(double(q[j]) * scale_);
    std::vector<float> staged;
    if (has_jl_) {
        staged.resize(jl_.out_dim);
        jl_.apply(scaled.data(), staged.data());
    } else {
        staged = scaled;
    }
    auto hit = grid_.lift_query(staged.data());
    if (!hit) return st;
    std::vector<float> zbuf(grid_.d + 1);
    query_rec(roots_[cube_root_[hit->first]], hit->second, q, st, zbuf);
    return st;
}

inline DDInvariantReport DDTree::check_invariants(double tol) const {
    DDInvariantReport rep;
    double r_root = lifted_ ? 1.0 : r_;
    struct Item {
        std::uint32_t id;
        std::size_t balls;
    };
    std::vector<Item> stack;
    for (auto rt : roots_) stack.push_back({rt, 0});
    while (!stack.empty()) {
        auto [id, balls] = stack.back();
        stack.pop_back();
        const DDNode& nd = nodes_[id];
        const DDFrame& f = frames_[nd.frame];
        rep.max_ball_depth = std::max(rep.max_ball_depth, balls);
        switch (nd.kind) {
        case DDNodeKind::LeafList:
            if (nd.level != params_.K) {
                ++rep.bad_leaf_levels;
                rep.ok = false;
            }
            break;
        case DDNodeKind::SinglePoint:
            if (nd.sp_reason == SinglePointReason::None) {
                ++rep.bad_single_points;
                rep.ok = false;
            }
            break;
        case DDNodeKind::SphereInner: {
            ++rep.inner_nodes;
            double ratio = f.r1 > 0.0 ? f.r2 / f.r1 : std::numeric_limits<double>::infinity();
            rep.min_ratio_over_c = std::min(rep.min_ratio_over_c, ratio / c_);
            rep.max_r2_over_cr = std::max(rep.max_r2_over_cr, f.r2 / (c_ * r_root));
            for (auto cl : nd.cluster_children) stack.push_back({cl, balls + 1});
            for (auto cp : nd.cap_children) stack.push_back({cp, balls});
            break;
        }
        case DDNodeKind::BallInner: {
            ++rep.inner_nodes;
            double ratio = f.r1 > 0.0 ? f.r2 / f.r1 : std::numeric_limits<double>::infinity();
            rep.min_ratio_over_c = std::min(rep.min_ratio_over_c, ratio / c_);
            rep.max_r2_over_cr = std::max(rep.max_r2_over_cr, f.r2 / (c_ * r_root));
            for (const auto& bc : nd.ball_children) stack.push_back({bc.child, balls});
            break;
        }
        }
    }
    if (rep.min_ratio_over_c < 1.0 - tol) rep.ok = false;
    if (rep.max_r2_over_cr > 1.0 + tol) rep.ok = false;
    if (rep.max_ball_depth > std::size_t(params_.ball_depth_cap)) rep.ok = false;
    return rep;
}

} // namespace lsf
