#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "e2lmvsc/gradcheck.hpp"
#include "e2lmvsc/losses.hpp"
#include "e2lmvsc/model.hpp"

namespace e2lmvsc {

enum class LossKind { Recon, Ortho, SS, IB, Dis, Rel, Total };

inline const char* loss_kind_name(LossKind k) {
    switch (k) {
        case LossKind::Recon: return "recon";
        case LossKind::Ortho: return "ortho";
        case LossKind::SS: return "ss";
        case LossKind::IB: return "ib";
        case LossKind::Dis: return "dis";
        case LossKind::Rel: return "rel";
        case LossKind::Total: return "total";
    }
    return "?";
}

struct GradCheckInstance {
    MultiViewDataset ds;
    ModelState state;
    Mat noise; // frozen reparameterization draw
    std::vector<int> pseudo;
    LossWeights weights;
};

inline GradCheckInstance make_gradcheck_instance(std::uint64_t seed, Eigen::Index n = 12,
                                                 int views = 2, Eigen::Index d = 3, int k = 3,
                                                 Eigen::Index hidden = 17) {
    RngStream rng(seed, 0x6C);
    GradCheckInstance inst;
    inst.ds.n = n;
    inst.ds.k = k;
    for (int v = 0; v < views; ++v) {
        RngStream rv = rng.derive(v);
        inst.ds.views.push_back(rv.uniform_matrix(4 + v, n, 0.0, 1.0));
        inst.ds.view_names.push_back("v" + std::to_string(v));
    }
    ModelConfig mc;
    for (const auto& view : inst.ds.views) mc.view_dims.push_back(view.rows());
    mc.n = n;
    mc.k = k;
    mc.d = d;
    mc.hidden = hidden;
    inst.state = init_model(mc, rng.derive(100));
    RngStream rn = rng.derive(200);
    inst.noise = rn.normal_matrix(d, n);
    RngStream rl = rng.derive(300);
    inst.pseudo.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
        inst.pseudo[i] = static_cast<int>(rl.uniform_index(k));
    return inst;
}

inline GradReport check_loss_gradients(GradCheckInstance& inst, LossKind kind, double tol,
                                       std::uint64_t probe_seed = 0) {
    auto loss_fn = [&](bool with_grad) -> double {
        if (with_grad)
            for (auto& [name, p] : inst.state.params) p.zero_grad();
        ParamGraph g(inst.state);
        ForwardBundle b = forward(g, inst.state, inst.ds, &inst.noise);
        ad::Var loss;
        switch (kind) {
            case LossKind::Recon: loss = losses::loss_recon(inst.ds.views, b.xhat); break;
            case LossKind::Ortho: loss = losses::loss_ortho(b.c, b.d_views, b.r_views); break;
            case LossKind::SS: loss = losses::loss_ss(b.q, b.q_d, b.q_r); break;
            case LossKind::IB:
                loss = losses::loss_ib(b.unified.mu, b.unified.log_var, b.u, b.pred_d, b.pred_c);
                break;
            case LossKind::Dis:
                loss = losses::loss_dis(b.u, inst.pseudo, inst.ds.k, inst.weights.epsilon_sq);
                break;
            case LossKind::Rel: loss = losses::loss_rel(b.u, b.theta_s); break;
            case LossKind::Total:
                loss = losses::loss_total(inst.ds.views, b, inst.pseudo, inst.ds.k, inst.weights);
                break;
        }
        if (with_grad) {
            loss.backward();
            g.scatter_grads();
        }
        return loss.item();
    };
    RngStream probe(probe_seed, 0x6C);
    return grad_check(loss_fn, inst.state.params, probe, tol);
}

} // namespace e2lmvsc
