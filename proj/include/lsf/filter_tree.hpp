#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsf/parallel.hpp"
#include "lsf/points.hpp"
#include "lsf/rng.hpp"
#include "lsf/tradeoff.hpp"

namespace lsf {

// The data-independent Gaussian spherical-cap tree. Nodes do not store their
// Gaussian vectors: each node's vector is regenerated from its counter key,
// which keeps the serialized tree small and the build parallelizable with
// bit-identical output. Vectors of inner levels are cached after build since
// those nodes are few and hot.

/// Keep indices of `subset` whose centered projection clears the threshold.
/// Shared with the data-dependent tree so both filter bit-identically.
[[gnu::noinline]] inline void filter_subset(const PointSet& data,
                                            const std::vector<std::uint32_t>& subset,
                                            const float* z, double z_center, double thr,
                                            std::vector<std::uint32_t>& out) {
    out.clear();
    for (std::uint32_t idx : subset)
        if (dot(z, data.row(idx), data.d) - z_center >= thr) out.push_back(idx);
}

struct FilterNode {
    std::uint64_t key = 0;
    std::uint32_t child_begin = 0;
    std::uint32_t child_count = 0;
    std::uint32_t leaf_begin = 0;
    std::uint32_t leaf_count = 0;
    std::int32_t zoff = -1; ///< offset into the z cache, -1 = regenerate
    std::uint8_t level = 0;
};

struct FilterBuildStats {
    std::size_t node_count = 0;
    std::size_t leaf_count = 0;
    std::size_t stored_points = 0;
};

struct FilterQueryStats {
    std::int64_t found = -1; ///< dataset index, -1 = none
    double distance = 0.0;
    std::uint64_t nodes_visited = 0;
    std::uint64_t leaves_visited = 0;
    std::uint64_t points_scanned = 0;
    std::uint64_t far_points_scanned = 0; ///< scanned points beyond cr
};

struct FilterQueryOptions {
    double eta_q_override = std::numeric_limits<double>::quiet_NaN();
    bool exhaustive = false; ///< scan everything reached instead of stopping at the first hit
};

class FilterTree {
public:
    FilterTree() = default;

    const TradeoffPoint& params() const { return params_; }
    std::uint64_t seed() const { return seed_; }
    const std::vector<FilterNode>& nodes() const { return nodes_; }
    const std::vector<std::uint32_t>& child_ids() const { return child_ids_; }
    const std::vector<std::uint32_t>& leaf_points() const { return leaf_points_; }
    std::size_t dim() const { return d_; }
    std::size_t dataset_size() const { return n_; }

    void attach(const PointSet& data) {
        if (data.n != n_ || data.d != d_)
            throw std::invalid_argument("FilterTree::attach: dataset shape mismatch");
        data_ = &data;
    }
    const PointSet& dataset() const {
        if (!data_) throw std::logic_error("FilterTree: no dataset attached");
        return *data_;
    }

    FilterBuildStats stats() const {
        FilterBuildStats s;
        s.node_count = nodes_.size();
        s.stored_points = leaf_points_.size();
        for (const auto& nd : nodes_)
            if (nd.level == params_.K) ++s.leaf_count;
        return s;
    }

    /// Fills `z` (d floats) with the node's Gaussian vector.
    void node_vector(const FilterNode& nd, float* z) const {
        if (nd.zoff >= 0) {
            std::copy_n(zcache_.data() + std::size_t(nd.zoff), d_, z);
        } else {
            RandomStream rs(nd.key);
            rs.fill_normals(z, d_);
        }
    }

    static FilterTree build(const PointSet& data, const TradeoffPoint& params,
                            std::uint64_t seed, unsigned threads = 0);

    FilterQueryStats query(const float* q, double cr,
                           const FilterQueryOptions& opts = {}) const;

    /// Exact replay: every stored point satisfies the ancestor threshold
    /// condition under the regenerated vectors.
    bool verify_structure() const;

    void save(const std::string& path) const;
    static FilterTree load(const std::string& path);

private:
    friend class DDTree;
    const PointSet* data_ = nullptr;
    TradeoffPoint params_;
    std::uint64_t seed_ = 0;
    std::size_t n_ = 0, d_ = 0;
    std::vector<FilterNode> nodes_; ///< nodes_[0] is the root
    std::vector<std::uint32_t> child_ids_;
    std::vector<std::uint32_t> leaf_points_;
    std::vector<float> zcache_;

    struct Arena {
        std::vector<FilterNode> nodes;
        std::vector<std::uint32_t> child_ids;
        std::vector<std::uint32_t> leaf_points;
        std::vector<std::uint32_t> root_children;
    };

    static std::uint32_t build_rec(Arena& ar, const PointSet& data, const TradeoffPoint& p,
                                   std::uint64_t key, int level,
                                   const std::vector<std::uint32_t>& subset,
                                   std::vector<std::vector<std::uint32_t>>& scratch,
                                   std::vector<float>& zbuf) {
        std::uint32_t id = std::uint32_t(ar.nodes.size());
        ar.nodes.push_back(FilterNode{});
        ar.nodes[id].key = key;
        ar.nodes[id].level = std::uint8_t(level);
        if (level == p.K) {
            ar.nodes[id].leaf_begin = std::uint32_t(ar.leaf_points.size());
            ar.nodes[id].leaf_count = std::uint32_t(subset.size());
            ar.leaf_points.insert(ar.leaf_points.end(), subset.begin(), subset.end());
            return id;
        }
        std::vector<std::uint32_t> children;
        auto& filtered = scratch[std::size_t(level)];
        for (std::uint64_t slot = 1; slot <= p.T; ++slot) {
            std::uint64_t ck = mix_key(key, slot);
            RandomStream rs(ck);
            rs.fill_normals(zbuf.data(), data.d);
            filter_subset(data, subset, zbuf.data(), 0.0, p.eta_u, filtered);
            if (!filtered.empty())
                children.push_back(build_rec(ar, data, p, ck, level + 1, filtered, scratch, zbuf));
        }
        ar.nodes[id].child_begin = std::uint32_t(ar.child_ids.size());
        ar.nodes[id].child_count = std::uint32_t(children.size());
        ar.child_ids.insert(ar.child_ids.end(), children.begin(), children.end());
        return id;
    }

    void build_zcache();
};

inline FilterTree FilterTree::build(const PointSet& data, const TradeoffPoint& params,
                                    std::uint64_t seed, unsigned threads) {
    if (data.n == 0) throw std::invalid_argument("FilterTree::build: empty dataset");
    if (!params.solved())
        throw std::invalid_argument("FilterTree::build: params lack eta/T/K; run solve_thresholds");
    require_unit_norm(data);

    FilterTree t;
    t.params_ = params;
    t.seed_ = seed;
    t.n_ = data.n;
    t.d_ = data.d;
    t.data_ = &data;

    std::uint64_t root_key = mix_key(seed, stream::tree);
    std::vector<std::uint32_t> all(data.n);
    for (std::size_t i = 0; i < data.n; ++i) all[i] = std::uint32_t(i);

    if (threads == 0) threads = worker_count();
    std::size_t chunks = std::min<std::size_t>(params.T, std::size_t(threads) * 4);
    if (chunks == 0) chunks = 1;
    std::vector<Arena> arenas(chunks);
    parallel_for(chunks, [&](std::size_t cb, std::size_t ce) {
        for (std::size_t ci = cb; ci < ce; ++ci) {
            Arena& ar = arenas[ci];
            std::vector<std::vector<std::uint32_t>> scratch(std::size_t(params.K) + 1);
            std::vector<float> zbuf(data.d);
            std::vector<std::uint32_t> filtered;
            std::uint64_t lo = 1 + ci * params.T / chunks;
            std::uint64_t hi = ci < chunks - 1 ? (ci + 1) * params.T / chunks : params.T;
            for (std::uint64_t slot = lo; slot <= hi; ++slot) {
                std::uint64_t ck = mix_key(root_key, slot);
                RandomStream rs(ck);
                rs.fill_normals(zbuf.data(), data.d);
                filter_subset(data, all, zbuf.data(), 0.0, params.eta_u, filtered);
                if (!filtered.empty())
                    ar.root_children.push_back(
                        build_rec(ar, data, params, ck, 1, filtered, scratch, zbuf));
            }
        }
    }, threads);

    // Merge arenas in slot order; index fixups keep the result identical to a
    // sequential build.
    t.nodes_.push_back(FilterNode{});
    t.nodes_[0].key = root_key;
    t.nodes_[0].level = 0;
    std::vector<std::uint32_t> root_children;
    for (auto& ar : arenas) {
        std::uint32_t node_off = std::uint32_t(t.nodes_.size());
        std::uint32_t child_off = std::uint32_t(t.child_ids_.size());
        std::uint32_t leaf_off = std::uint32_t(t.leaf_points_.size());
        for (auto nd : ar.nodes) {
            nd.child_begin += child_off;
            nd.leaf_begin += leaf_off;
            t.nodes_.push_back(nd);
        }
        for (auto cid : ar.child_ids) t.child_ids_.push_back(cid + node_off);
        t.leaf_points_.insert(t.leaf_points_.end(), ar.leaf_points.begin(), ar.leaf_points.end());
        for (auto rc : ar.root_children) root_children.push_back(rc + node_off);
    }
    t.nodes_[0].child_begin = std::uint32_t(t.child_ids_.size());
    t.nodes_[0].child_count = std::uint32_t(root_children.size());
    t.child_ids_.insert(t.child_ids_.end(), root_children.begin(), root_children.end());

    t.build_zcache();
    return t;
}

inline void FilterTree::build_zcache() {
    std::size_t inner = 0;
    for (auto& nd : nodes_)
        if (nd.level > 0 && nd.level < params_.K) ++inner;
    zcache_.assign(inner * d_, 0.0f);
    std::size_t off = 0;
    for (auto& nd : nodes_) {
        if (nd.level > 0 && nd.level < params_.K) {
            nd.zoff = std::int32_t(off);
            RandomStream rs(nd.key);
            rs.fill_normals(zcache_.data() + off, d_);
            off += d_;
        } else {
            nd.zoff = -1;
        }
    }
}

inline FilterQueryStats FilterTree::query(const float* q, double cr,
                                          const FilterQueryOptions& opts) const {
    const PointSet& data = dataset();
    double eta_q = std::isnan(opts.eta_q_override) ? params_.eta_q : opts.eta_q_override;
    FilterQueryStats st;
    std::vector<float> zbuf(d_);
    std::vector<std::uint32_t> stack;
    stack.push_back(0);
    while (!stack.empty()) {
        std::uint32_t id = stack.back();
        stack.pop_back();
        const FilterNode& nd = nodes_[id];
        ++st.nodes_visited;
        if (nd.level == params_.K) {
            ++st.leaves_visited;
            for (std::uint32_t k = 0; k < nd.leaf_count; ++k) {
                std::uint32_t pidx = leaf_points_[nd.leaf_begin + k];
                ++st.points_scanned;
                double dd = dist(data.row(pidx), q, d_);
                if (dd <= cr) {
                    if (st.found < 0) {
                        st.found = pidx;
                        st.distance = dd;
                    }
                    if (!opts.exhaustive) return st;
                } else {
                    ++st.far_points_scanned;
                }
            }
            continue;
        }
        // Children were appended in ascending slot order; push in reverse so
        // the DFS visits them in slot order.
        for (std::uint32_t k = nd.child_count; k > 0; --k) {
            std::uint32_t cid = child_ids_[nd.child_begin + k - 1];
            const FilterNode& ch = nodes_[cid];
            node_vector(ch, zbuf.data());
            if (dot(zbuf.data(), q, d_) >= eta_q) stack.push_back(cid);
        }
    }
    return st;
}

inline bool FilterTree::verify_structure() const {
    const PointSet& data = dataset();
    std::vector<float> zbuf(d_);
    // DFS carrying the path of node ids.
    struct Frame {
        std::uint32_t id;
        std::uint32_t next_child = 0;
    };
    std::vector<Frame> path;
    path.push_back({0});
    while (!path.empty()) {
        Frame& f = path.back();
        const FilterNode& nd = nodes_[f.id];
        if (nd.level == params_.K) {
            for (std::uint32_t k = 0; k < nd.leaf_count; ++k) {
                const float* p = data.row(leaf_points_[nd.leaf_begin + k]);
                for (std::size_t a = 1; a < path.size(); ++a) {
                    const FilterNode& anc = nodes_[path[a].id];
                    node_vector(anc, zbuf.data());
                    if (!(dot(zbuf.data(), p, d_) - 0.0 >= params_.eta_u)) return false;
                }
            }
            path.pop_back();
            continue;
        }
        if (f.next_child < nd.child_count) {
            std::uint32_t cid = child_ids_[nd.child_begin + f.next_child];
            ++f.next_child;
            path.push_back({cid});
        } else {
            path.pop_back();
        }
    }
    return true;
}

namespace detail {

inline void write_u64(std::FILE* f, std::uint64_t v) { std::fwrite(&v, 8, 1, f); }
inline void write_u32(std::FILE* f, std::uint32_t v) { std::fwrite(&v, 4, 1, f); }
inline void write_f64(std::FILE* f, double v) { std::fwrite(&v, 8, 1, f); }
inline std::uint64_t read_u64(std::FILE* f) {
    std::uint64_t v;
    if (std::fread(&v, 8, 1, f) != 1) throw std::runtime_error("truncated tree file");
    return v;
}
inline std::uint32_t read_u32(std::FILE* f) {
    std::uint32_t v;
    if (std::fread(&v, 4, 1, f) != 1) throw std::runtime_error("truncated tree file");
    return v;
}
inline double read_f64(std::FILE* f) {
    double v;
    if (std::fread(&v, 8, 1, f) != 1) throw std::runtime_error("truncated tree file");
    return v;
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};

} // namespace detail

constexpr std::uint32_t kFilterTreeMagic = 0x4c534654; // "LSFT"
constexpr std::uint32_t kTreeFormatVersion = 1;

inline void FilterTree::save(const std::string& path) const {
    std::unique_ptr<std::FILE, detail::FileCloser> f(std::fopen(path.c_str(), "wb"));
    if (!f) throw std::runtime_error("cannot write " + path);
    detail::write_u32(f.get(), kFilterTreeMagic);
    detail::write_u32(f.get(), kTreeFormatVersion);
    detail::write_u64(f.get(), seed_);
    detail::write_u64(f.get(), n_);
    detail::write_u64(f.get(), d_);
    detail::write_f64(f.get(), params_.c);
    detail::write_f64(f.get(), params_.r);
    detail::write_f64(f.get(), params_.rho_q);
    detail::write_f64(f.get(), params_.rho_u);
    detail::write_f64(f.get(), params_.sigma_exp);
    detail::write_f64(f.get(), params_.tau_exp);
    detail::write_f64(f.get(), params_.eta_u);
    detail::write_f64(f.get(), params_.eta_q);
    detail::write_u64(f.get(), params_.T);
    detail::write_u32(f.get(), std::uint32_t(params_.K));
    detail::write_u64(f.get(), nodes_.size());
    detail::write_u64(f.get(), child_ids_.size());
    detail::write_u64(f.get(), leaf_points_.size());
    for (const auto& nd : nodes_) {
        detail::write_u64(f.get(), nd.key);
        detail::write_u32(f.get(), nd.child_begin);
        detail::write_u32(f.get(), nd.child_count);
        detail::write_u32(f.get(), nd.leaf_begin);
        detail::write_u32(f.get(), nd.leaf_count);
        detail::write_u32(f.get(), nd.level);
    }
    std::fwrite(child_ids_.data(), 4, child_ids_.size(), f.get());
    std::fwrite(leaf_points_.data(), 4, leaf_points_.size(), f.get());
}

inline FilterTree FilterTree::load(const std::string& path) {
    std::unique_ptr<std::FILE, detail::FileCloser> f(std::fopen(path.c_str(), "rb"));
    if (!f) throw std::runtime_error("cannot read " + path);
    if (detail::read_u32(f.get()) != kFilterTreeMagic)
        throw std::runtime_error(path + ": not a filter tree file");
    if (detail::read_u32(f.get()) != kTreeFormatVersion)
        throw std::runtime_error(path + ": unsupported tree format version");
    FilterTree t;
    t.seed_ = detail::read_u64(f.get());
    t.n_ = detail::read_u64(f.get());
    t.d_ = detail::read_u64(f.get());
    t.params_.c = detail::read_f64(f.get());
    t.params_.r = detail::read_f64(f.get());
    t.params_.rho_q = detail::read_f64(f.get());
    t.params_.rho_u = detail::read_f64(f.get());
    t.params_.sigma_exp = detail::read_f64(f.get());
    t.params_.tau_exp = detail::read_f64(f.get());
    t.params_.eta_u = detail::read_f64(f.get());
    t.params_.eta_q = detail::read_f64(f.get());
    t.params_.T = detail::read_u64(f.get());
    t.params_.K = int(detail::read_u32(f.get()));
    std::size_t nn = detail::read_u64(f.get());
    std::size_t nc = detail::read_u64(f.get());
    std::size_t nl = detail::read_u64(f.get());
    t.nodes_.resize(nn);
    for (auto& nd : t.nodes_) {
        nd.key = detail::read_u64(f.get());
        nd.child_begin = detail::read_u32(f.get());
        nd.child_count = detail::read_u32(f.get());
        nd.leaf_begin = detail::read_u32(f.get());
        nd.leaf_count = detail::read_u32(f.get());
        nd.level = std::uint8_t(detail::read_u32(f.get()));
    }
    t.child_ids_.resize(nc);
    if (nc && std::fread(t.child_ids_.data(), 4, nc, f.get()) != nc)
        throw std::runtime_error("truncated tree file");
    t.leaf_points_.resize(nl);
    if (nl && std::fread(t.leaf_points_.data(), 4, nl, f.get()) != nl)
        throw std::runtime_error("truncated tree file");
    t.build_zcache();
    return t;
}

} // namespace lsf
