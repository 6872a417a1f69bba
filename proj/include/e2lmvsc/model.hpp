#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "e2lmvsc/autodiff.hpp"
#include "e2lmvsc/dataio.hpp"
#include "e2lmvsc/param.hpp"
#include "e2lmvsc/rng.hpp"

namespace e2lmvsc {

struct ModelConfig {
    std::vector<Eigen::Index> view_dims;
    Eigen::Index n = 0;
    int k = 2;
    Eigen::Index d = 20;
    Eigen::Index hidden = 200;

    int num_views() const { return static_cast<int>(view_dims.size()); }
};

struct ModelState {
    ModelConfig cfg;
    ParamMap params;
};

namespace model_detail {

inline Mat glorot(RngStream& rng, Eigen::Index out, Eigen::Index in) {
    const double b = std::sqrt(6.0 / static_cast<double>(in + out));
    return rng.uniform_matrix(out, in, -b, b);
}

inline void add_affine(ModelState& st, RngStream& rng, const std::string& prefix,
                       Eigen::Index out, Eigen::Index in) {
    st.params.emplace(prefix + ".W", Param(glorot(rng, out, in)));
    st.params.emplace(prefix + ".b", Param(Mat::Zero(out, 1)));
}

} // namespace model_detail

inline ModelState init_model(const ModelConfig& cfg, RngStream rng) {
    ModelState st;
    st.cfg = cfg;
    const auto d = cfg.d;
    const auto h = cfg.hidden;
    const int v_count = cfg.num_views();
    using model_detail::add_affine;

    for (int v = 0; v < v_count; ++v) {
        const std::string ev = "enc" + std::to_string(v);
        RngStream r = rng.derive(10 + v);
        add_affine(st, r, ev + ".backbone", h, cfg.view_dims[v]);
        add_affine(st, r, ev + ".s_head", d, h);
        add_affine(st, r, ev + ".c_head", d, h);
        const std::string dv = "dec" + std::to_string(v);
        add_affine(st, r, dv + ".l1", h, 3 * d);
        add_affine(st, r, dv + ".l2", cfg.view_dims[v], h);
    }
    {
        RngStream r = rng.derive(1);
        st.params.emplace("C", Param(0.01 * r.normal_matrix(d, cfg.n)));
    }
    {
        RngStream r = rng.derive(2);
        add_affine(st, r, "assign.l1", h, d);
        add_affine(st, r, "assign.l2", cfg.k, h);
    }
    {
        RngStream r = rng.derive(3);
        add_affine(st, r, "ib.unified.l1", h, static_cast<Eigen::Index>(v_count + 1) * d);
        add_affine(st, r, "ib.unified.mu", d, h);
        add_affine(st, r, "ib.unified.lv", d, h);
        add_affine(st, r, "ib.pred_c.l1", h, d);
        add_affine(st, r, "ib.pred_c.mu", d, h);
        add_affine(st, r, "ib.pred_c.lv", d, h);
        for (int v = 0; v < v_count; ++v) {
            const std::string pv = "ib.pred_d" + std::to_string(v);
            add_affine(st, r, pv + ".l1", h, d);
            add_affine(st, r, pv + ".mu", d, h);
            add_affine(st, r, pv + ".lv", d, h);
        }
    }
    // theta_s = softplus(theta_raw) starts at 0.1
    st.params.emplace("theta_raw",
                      Param(Mat::Constant(1, 1, std::log(std::expm1(0.1)))));
    return st;
}

// Per-pass view of the parameters as autodiff leaves. After backward(),
// scatter_grads() accumulates leaf gradients into Param.grad.
class ParamGraph {
public:
    explicit ParamGraph(ModelState& st) : state_(&st) {}

    ad::Var leaf(const std::string& name) {
        auto it = leaves_.find(name);
        if (it != leaves_.end()) return it->second;
        auto pit = state_->params.find(name);
        if (pit == state_->params.end()) throw Error("unknown parameter: " + name);
        ad::Var v = ad::Var::leaf(pit->second.value);
        leaves_.emplace(name, v);
        return v;
    }

    void scatter_grads() {
        for (auto& [name, var] : leaves_)
            if (var.has_grad()) state_->params.at(name).grad += var.grad();
    }

private:
    ModelState* state_;
    std::map<std::string, ad::Var> leaves_;
};

inline ad::Var affine(ParamGraph& g, const std::string& prefix, const ad::Var& x) {
    return ad::add_colvec(ad::matmul(g.leaf(prefix + ".W"), x), g.leaf(prefix + ".b"));
}

// (D_v, R_v): complementary and superfluous latent representations
inline std::pair<ad::Var, ad::Var> encode_view(ParamGraph& g, int v, const ad::Var& x_v) {
    const std::string ev = "enc" + std::to_string(v);
    ad::Var h = ad::sigmoid(affine(g, ev + ".backbone", x_v));
    ad::Var d_v = ad::sigmoid(affine(g, ev + ".c_head", h));
    ad::Var r_v = ad::sigmoid(affine(g, ev + ".s_head", h));
    return {d_v, r_v};
}

inline ad::Var decode_view(ParamGraph& g, int v, const ad::Var& c, const ad::Var& d_v,
                           const ad::Var& r_v) {
    const std::string dv = "dec" + std::to_string(v);
    ad::Var z = ad::concat_rows({c, d_v, r_v});
    ad::Var h = ad::sigmoid(affine(g, dv + ".l1", z));
    return ad::sigmoid(affine(g, dv + ".l2", h));
}

// Q (n x K, row-stochastic) from a d x n representation; shared parameters.
inline ad::Var cluster_assign(ParamGraph& g, const ad::Var& rep) {
    ad::Var h = ad::sigmoid(affine(g, "assign.l1", rep));
    ad::Var logits = affine(g, "assign.l2", h);
    return ad::transpose(ad::softmax_cols(logits));
}

struct GaussianHead {
    ad::Var mu;
    ad::Var log_var;
};

inline GaussianHead gaussian_head(ParamGraph& g, const std::string& prefix, const ad::Var& x) {
    ad::Var h = ad::sigmoid(affine(g, prefix + ".l1", x));
    return {affine(g, prefix + ".mu", h), ad::clamp(affine(g, prefix + ".lv", h), -10.0, 10.0)};
}

struct ForwardBundle {
    std::vector<ad::Var> d_views, r_views, xhat;
    ad::Var c;
    ad::Var d_glob, r_glob;
    ad::Var q, q_d, q_r; // n x K
    GaussianHead unified;
    ad::Var u; // d x n
    std::vector<GaussianHead> pred_d;
    GaussianHead pred_c;
    ad::Var theta_s;
};

inline std::pair<ad::Var, ad::Var> global_private_reps(const std::vector<ad::Var>& d_views,
                                                       const std::vector<ad::Var>& r_views) {
    return {ad::mean_of(d_views), ad::mean_of(r_views)};
}

// Unified posterior over [c_i; d_i^1; ...; d_i^V]; U is a reparameterized
// sample when noise is supplied, otherwise the posterior mean.
inline void ib_forward(ParamGraph& g, ForwardBundle& b, const Mat* noise) {
    std::vector<ad::Var> parts{b.c};
    for (const auto& d_v : b.d_views) parts.push_back(d_v);
    b.unified = gaussian_head(g, "ib.unified", ad::concat_rows(parts));
    if (noise) {
        ad::Var std_dev = ad::exp(ad::scale(b.unified.log_var, 0.5));
        b.u = ad::add(b.unified.mu, ad::cwise_mul(std_dev, ad::Var::constant(*noise)));
    } else {
        b.u = b.unified.mu;
    }
    b.pred_d.clear();
    for (std::size_t v = 0; v < b.d_views.size(); ++v)
        b.pred_d.push_back(gaussian_head(g, "ib.pred_d" + std::to_string(v), b.d_views[v]));
    b.pred_c = gaussian_head(g, "ib.pred_c", b.c);
}

// Full forward pass. noise == nullptr gives the deterministic inference
// path (U = posterior mean).
inline ForwardBundle forward(ParamGraph& g, const ModelState& st, const MultiViewDataset& ds,
                             const Mat* noise) {
    ForwardBundle b;
    b.c = g.leaf("C");
    for (int v = 0; v < st.cfg.num_views(); ++v) {
        ad::Var x_v = ad::Var::constant(ds.views[v]);
        auto [d_v, r_v] = encode_view(g, v, x_v);
        b.d_views.push_back(d_v);
        b.r_views.push_back(r_v);
        b.xhat.push_back(decode_view(g, v, b.c, d_v, r_v));
    }
    auto [d_glob, r_glob] = global_private_reps(b.d_views, b.r_views);
    b.d_glob = d_glob;
    b.r_glob = r_glob;
    b.q = cluster_assign(g, b.c);
    b.q_d = cluster_assign(g, d_glob);
    b.q_r = cluster_assign(g, r_glob);
    ib_forward(g, b, noise);
    b.theta_s = ad::softplus(g.leaf("theta_raw"));
    return b;
}

// Autoencoder-only forward for pretraining.
inline ForwardBundle forward_autoencoder(ParamGraph& g, const ModelState& st,
                                         const MultiViewDataset& ds) {
    ForwardBundle b;
    b.c = g.leaf("C");
    for (int v = 0; v < st.cfg.num_views(); ++v) {
        ad::Var x_v = ad::Var::constant(ds.views[v]);
        auto [d_v, r_v] = encode_view(g, v, x_v);
        b.d_views.push_back(d_v);
        b.r_views.push_back(r_v);
        b.xhat.push_back(decode_view(g, v, b.c, d_v, r_v));
    }
    return b;
}

} // namespace e2lmvsc
