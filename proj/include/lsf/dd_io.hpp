#pragma once

// Serialization for DDTree: same envelope as the filter tree (magic, version,
// params, flat sections), distinct node-kind tags. Working coordinates are
// not persisted; queries only need frames, thresholds, keys and the lift
// transform, plus the original dataset supplied at load time.

#include "lsf/dd_tree.hpp"

namespace lsf {

constexpr std::uint32_t kDDTreeMagic = 0x4c534454; // "LSDT"

namespace detail {

inline void write_vec_f32(std::FILE* f, const std::vector<float>& v) {
    write_u64(f, v.size());
    std::fwrite(v.data(), 4, v.size(), f);
}
inline std::vector<float> read_vec_f32(std::FILE* f) {
    std::vector<float> v(read_u64(f));
    if (!v.empty() && std::fread(v.data(), 4, v.size(), f) != v.size())
        throw std::runtime_error("truncated tree file");
    return v;
}
inline void write_vec_f64(std::FILE* f, const std::vector<double>& v) {
    write_u64(f, v.size());
    std::fwrite(v.data(), 8, v.size(), f);
}
inline std::vector<double> read_vec_f64(std::FILE* f) {
    std::vector<double> v(read_u64(f));
    if (!v.empty() && std::fread(v.data(), 8, v.size(), f) != v.size())
        throw std::runtime_error("truncated tree file");
    return v;
}
inline void write_vec_u32(std::FILE* f, const std::vector<std::uint32_t>& v) {
    write_u64(f, v.size());
    std::fwrite(v.data(), 4, v.size(), f);
}
inline std::vector<std::uint32_t> read_vec_u32(std::FILE* f) {
    std::vector<std::uint32_t> v(read_u64(f));
    if (!v.empty() && std::fread(v.data(), 4, v.size(), f) != v.size())
        throw std::runtime_error("truncated tree file");
    return v;
}
inline void write_vec_u64(std::FILE* f, const std::vector<std::uint64_t>& v) {
    write_u64(f, v.size());
    std::fwrite(v.data(), 8, v.size(), f);
}
inline std::vector<std::uint64_t> read_vec_u64(std::FILE* f) {
    std::vector<std::uint64_t> v(read_u64(f));
    if (!v.empty() && std::fread(v.data(), 8, v.size(), f) != v.size())
        throw std::runtime_error("truncated tree file");
    return v;
}

} // namespace detail

inline void DDTree::save(const std::string& path) const {
    std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot write " + path);
    std::FILE* f = fp.get();
    detail::write_u32(f, kDDTreeMagic);
    detail::write_u32(f, kTreeFormatVersion);
    detail::write_f64(f, c_);
    detail::write_f64(f, r_);
    detail::write_u64(f, seed_);
    detail::write_u64(f, n_);
    detail::write_u64(f, d_orig_);
    detail::write_f64(f, params_.rho_q);
    detail::write_f64(f, params_.rho_u);
    detail::write_u32(f, std::uint32_t(params_.K));
    detail::write_f64(f, params_.eps);
    detail::write_f64(f, params_.delta);
    detail::write_f64(f, params_.cluster_tau);
    detail::write_u32(f, std::uint32_t(params_.ball_depth_cap));
    detail::write_f64(f, params_.line9_margin);
    detail::write_f64(f, params_.eps_cover);
    detail::write_u64(f, params_.min_cluster_points);
    detail::write_f64(f, params_.success_constant);
    detail::write_u32(f, lifted_ ? 1 : 0);
    if (lifted_) {
        detail::write_f64(f, scale_);
        detail::write_u32(f, has_jl_ ? 1 : 0);
        if (has_jl_) {
            detail::write_u64(f, jl_.in_dim);
            detail::write_u64(f, jl_.out_dim);
            detail::write_u32(f, jl_.mode == JlMode::Identity ? 1 : 0);
            detail::write_vec_f32(f, jl_.matrix);
        }
        detail::write_f64(f, grid_.side);
        detail::write_f64(f, grid_.R);
        detail::write_u64(f, grid_.d);
        detail::write_vec_f64(f, grid_.shift);
        detail::write_u64(f, grid_.cubes.size());
        for (const auto& cube : grid_.cubes) {
            detail::write_u64(f, cube.id.size());
            std::fwrite(cube.id.data(), 8, cube.id.size(), f);
            detail::write_vec_f64(f, cube.translation);
            detail::write_f64(f, cube.max_local_norm);
        }
        std::vector<std::uint64_t> cr(cube_root_.begin(), cube_root_.end());
        detail::write_vec_u64(f, cr);
    }
    detail::write_u64(f, frames_.size());
    for (const auto& fr : frames_) {
        detail::write_vec_f32(f, fr.center);
        detail::write_f64(f, fr.R);
        detail::write_f64(f, fr.r1);
        detail::write_f64(f, fr.r2);
    }
    detail::write_u64(f, nodes_.size());
    for (const auto& nd : nodes_) {
        detail::write_u32(f, std::uint32_t(nd.kind));
        detail::write_u32(f, std::uint32_t(nd.sp_reason));
        detail::write_u32(f, std::uint32_t(nd.level));
        detail::write_u32(f, nd.frame);
        detail::write_u64(f, nd.key);
        detail::write_f64(f, nd.eta_u);
        detail::write_f64(f, nd.eta_q);
        detail::write_u64(f, nd.T);
        detail::write_f64(f, nd.s1);
        detail::write_f64(f, nd.s2_eff);
        detail::write_f64(f, nd.x_scale);
        detail::write_vec_u32(f, nd.cluster_children);
        detail::write_vec_u32(f, nd.cap_children);
        detail::write_vec_u64(f, nd.cap_slots);
        detail::write_f64(f, nd.ann_width);
        detail::write_u64(f, nd.ball_children.size());
        for (const auto& bc : nd.ball_children) {
            detail::write_u32(f, bc.annulus);
            detail::write_u32(f, bc.qdist);
            detail::write_u32(f, bc.child);
        }
        detail::write_vec_u32(f, nd.points);
        detail::write_u32(f, nd.single_point);
    }
    detail::write_vec_u32(f, roots_);
}

inline DDTree DDTree::load(const std::string& path) {
    std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("cannot read " + path);
    std::FILE* f = fp.get();
    if (detail::read_u32(f) != kDDTreeMagic)
        throw std::runtime_error(path + ": not a dd tree file");
    if (detail::read_u32(f) != kTreeFormatVersion)
        throw std::runtime_error(path + ": unsupported tree format version");
    DDTree t;
    t.c_ = detail::read_f64(f);
    t.r_ = detail::read_f64(f);
    t.seed_ = detail::read_u64(f);
    t.n_ = detail::read_u64(f);
    t.d_orig_ = detail::read_u64(f);
    t.params_.rho_q = detail::read_f64(f);
    t.params_.rho_u = detail::read_f64(f);
    t.params_.K = int(detail::read_u32(f));
    t.params_.eps = detail::read_f64(f);
    t.params_.delta = detail::read_f64(f);
    t.params_.cluster_tau = detail::read_f64(f);
    t.params_.ball_depth_cap = int(detail::read_u32(f));
    t.params_.line9_margin = detail::read_f64(f);
    t.params_.eps_cover = detail::read_f64(f);
    t.params_.min_cluster_points = detail::read_u64(f);
    t.params_.success_constant = detail::read_f64(f);
    t.lifted_ = detail::read_u32(f) != 0;
    if (t.lifted_) {
        t.scale_ = detail::read_f64(f);
        t.has_jl_ = detail::read_u32(f) != 0;
        if (t.has_jl_) {
            t.jl_.in_dim = detail::read_u64(f);
            t.jl_.out_dim = detail::read_u64(f);
            t.jl_.mode = detail::read_u32(f) ? JlMode::Identity : JlMode::Gaussian;
            t.jl_.matrix = detail::read_vec_f32(f);
        }
        t.grid_.side = detail::read_f64(f);
        t.grid_.R = detail::read_f64(f);
        t.grid_.d = detail::read_u64(f);
        t.grid_.shift = detail::read_vec_f64(f);
        std::size_t ncubes = detail::read_u64(f);
        for (std::size_t ci = 0; ci < ncubes; ++ci) {
            GridLift::Cube cube;
            cube.id.resize(detail::read_u64(f));
            if (!cube.id.empty() &&
                std::fread(cube.id.data(), 8, cube.id.size(), f) != cube.id.size())
                throw std::runtime_error("truncated tree file");
            cube.translation = detail::read_vec_f64(f);
            cube.max_local_norm = detail::read_f64(f);
            t.grid_.index[cube.id] = t.grid_.cubes.size();
            t.grid_.cubes.push_back(std::move(cube));
        }
        auto cr = detail::read_vec_u64(f);
        t.cube_root_.assign(cr.begin(), cr.end());
    }
    std::size_t nframes = detail::read_u64(f);
    t.frames_.resize(nframes);
    for (auto& fr : t.frames_) {
        fr.center = detail::read_vec_f32(f);
        fr.R = detail::read_f64(f);
        fr.r1 = detail::read_f64(f);
        fr.r2 = detail::read_f64(f);
    }
    std::size_t nnodes = detail::read_u64(f);
    t.nodes_.resize(nnodes);
    for (auto& nd : t.nodes_) {
        nd.kind = DDNodeKind(detail::read_u32(f));
        nd.sp_reason = SinglePointReason(detail::read_u32(f));
        nd.level = std::int32_t(detail::read_u32(f));
        nd.frame = detail::read_u32(f);
        nd.key = detail::read_u64(f);
        nd.eta_u = detail::read_f64(f);
        nd.eta_q = detail::read_f64(f);
        nd.T = detail::read_u64(f);
        nd.s1 = detail::read_f64(f);
        nd.s2_eff = detail::read_f64(f);
        nd.x_scale = detail::read_f64(f);
        nd.cluster_children = detail::read_vec_u32(f);
        nd.cap_children = detail::read_vec_u32(f);
        nd.cap_slots = detail::read_vec_u64(f);
        nd.ann_width = detail::read_f64(f);
        std::size_t nbc = detail::read_u64(f);
        nd.ball_children.resize(nbc);
        for (auto& bc : nd.ball_children) {
            bc.annulus = detail::read_u32(f);
            bc.qdist = detail::read_u32(f);
            bc.child = detail::read_u32(f);
        }
        nd.points = detail::read_vec_u32(f);
        nd.single_point = detail::read_u32(f);
    }
    t.roots_ = detail::read_vec_u32(f);
    t.report_.node_count = t.nodes_.size();
    return t;
}

} // namespace lsf
