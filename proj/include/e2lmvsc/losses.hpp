#pragma once

#include <cmath>
#include <vector>

#include "e2lmvsc/affinity.hpp"
#include "e2lmvsc/autodiff.hpp"
#include "e2lmvsc/errors.hpp"
#include "e2lmvsc/model.hpp"

namespace e2lmvsc {

struct LossWeights {
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    double lambda3 = 1.0;
    double lambda4 = 1.0;
    double epsilon_sq = 0.5;
};

struct LossBreakdown {
    double aes = 0.0;   // recon + ortho
    double ortho = 0.0; // reported separately for ablations
    double ss = 0.0;
    double ib = 0.0;
    double dis = 0.0;
    double rel = 0.0;
    double total = 0.0;
};

namespace losses {

using ad::Var;

// sum_v || X^v - Xhat^v ||_F^2
inline Var loss_recon(const std::vector<Mat>& x_all, const std::vector<Var>& xhat_all) {
    if (x_all.size() != xhat_all.size()) throw ShapeMismatch("loss_recon: view count mismatch");
    Var acc;
    for (std::size_t v = 0; v < x_all.size(); ++v) {
        if (x_all[v].rows() != xhat_all[v].value().rows() ||
            x_all[v].cols() != xhat_all[v].value().cols())
            throw ShapeMismatch("loss_recon: shape mismatch in view " + std::to_string(v));
        Var term = ad::sum_sq(ad::sub(ad::Var::constant(x_all[v]), xhat_all[v]));
        acc = acc.valid() ? ad::add(acc, term) : term;
    }
    return acc;
}

namespace detail {

// sum_i <a_i, b_i>^2 over sample columns
inline Var col_dot_sq(const Var& a, const Var& b) {
    Mat ones = Mat::Ones(1, a.value().rows());
    Var dots = ad::matmul(ad::Var::constant(ones), ad::cwise_mul(a, b)); // 1 x n
    return ad::sum_sq(dots);
}

} // namespace detail

// (1/n) sum_v ( <c,d>^2 + <c,r>^2 + <d,r>^2 ) with per-sample column dots
inline Var loss_ortho(const Var& c, const std::vector<Var>& d_all, const std::vector<Var>& r_all) {
    const auto n = static_cast<double>(c.value().cols());
    Var acc;
    for (std::size_t v = 0; v < d_all.size(); ++v) {
        Var term = ad::add(ad::add(detail::col_dot_sq(c, d_all[v]), detail::col_dot_sq(c, r_all[v])),
                           detail::col_dot_sq(d_all[v], r_all[v]));
        acc = acc.valid() ? ad::add(acc, term) : term;
    }
    return ad::scale(acc, 1.0 / n);
}

// || Q - Q^D ||_F^2 - || Q - Q^R ||_F^2
inline Var loss_ss(const Var& q, const Var& q_d, const Var& q_r) {
    if (q.value().rows() != q_d.value().rows() || q.value().cols() != q_d.value().cols() ||
        q.value().rows() != q_r.value().rows() || q.value().cols() != q_r.value().cols())
        throw ShapeMismatch("loss_ss: shape mismatch");
    return ad::sub(ad::sum_sq(ad::sub(q, q_d)), ad::sum_sq(ad::sub(q, q_r)));
}

namespace detail {

// sum over all entries of log N(x ; mu, diag e^{log_var})
inline Var logpdf_sum(const Var& x, const Var& mu, const Var& log_var) {
    const auto count = static_cast<double>(x.value().size());
    Var diff = ad::sub(x, mu);
    Var quad = ad::cwise_mul(ad::cwise_mul(diff, diff), ad::exp(ad::scale(log_var, -1.0)));
    Var s = ad::add(ad::scale(ad::sum(quad), -0.5), ad::scale(ad::sum(log_var), -0.5));
    return ad::add_scalar(s, -0.5 * std::log(2.0 * M_PI) * count);
}

// sum over samples of KL( N(mu_i, diag e^{lv_i}) || N(0, I) )
inline Var kl_sum(const Var& mu, const Var& log_var) {
    Var t = ad::sub(ad::add(ad::cwise_mul(mu, mu), ad::exp(log_var)), log_var);
    return ad::scale(ad::sum(ad::add_scalar(t, -1.0)), 0.5);
}

} // namespace detail

// (1/n) sum_i [ V * KL_i - sum_v log r(u_i | d_i^v) - log t(u_i | c_i) ]
inline Var loss_ib(const Var& mu_u, const Var& log_var_u, const Var& u_sample,
                   const std::vector<GaussianHead>& pred_d, const GaussianHead& pred_c) {
    const auto n = static_cast<double>(mu_u.value().cols());
    const auto v_count = static_cast<double>(pred_d.size());
    Var acc = ad::scale(detail::kl_sum(mu_u, log_var_u), v_count);
    for (const auto& head : pred_d)
        acc = ad::sub(acc, detail::logpdf_sum(u_sample, head.mu, head.log_var));
    acc = ad::sub(acc, detail::logpdf_sum(u_sample, pred_c.mu, pred_c.log_var));
    return ad::scale(acc, 1.0 / n);
}

// R(U) = 1/2 ln det(I + d/(n eps^2) U U^T)
inline Var coding_rate_global(const Var& u, double epsilon_sq) {
    const auto d = static_cast<double>(u.value().rows());
    const auto n = static_cast<double>(u.value().cols());
    const double alpha = d / (n * epsilon_sq);
    Var gram = ad::matmul(u, ad::transpose(u));
    Var a = ad::add(ad::Var::constant(Mat::Identity(u.value().rows(), u.value().rows())),
                    ad::scale(gram, alpha));
    return ad::scale(ad::logdet_spd(a), 0.5);
}

// R^c(U, Pi) = sum_k n_k/(2n) ln det(I + d/(n_k eps^2) U Pi^k U^T)
inline Var coding_rate_local(const Var& u, const std::vector<int>& labels, int k,
                             double epsilon_sq) {
    const auto d = static_cast<double>(u.value().rows());
    const auto n = static_cast<double>(u.value().cols());
    if (static_cast<Eigen::Index>(labels.size()) != u.value().cols())
        throw BadLabel("coding_rate_local: labels length mismatch");
    for (int l : labels)
        if (l < 0 || l >= k) throw BadLabel("coding_rate_local: label outside [0,K)");
    Var acc;
    for (int c = 0; c < k; ++c) {
        std::vector<Eigen::Index> idx;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == c) idx.push_back(static_cast<Eigen::Index>(i));
        if (idx.empty()) continue; // empty pseudo-cluster contributes 0
        const auto nk = static_cast<double>(idx.size());
        Var uk = ad::select_cols(u, idx);
        Var gram = ad::matmul(uk, ad::transpose(uk));
        Var a = ad::add(ad::Var::constant(Mat::Identity(u.value().rows(), u.value().rows())),
                        ad::scale(gram, d / (nk * epsilon_sq)));
        Var term = ad::scale(ad::logdet_spd(a), nk / (2.0 * n));
        acc = acc.valid() ? ad::add(acc, term) : term;
    }
    if (!acc.valid()) acc = ad::Var::scalar(0.0);
    return acc;
}

// L_Dis = -R(U) + R^c(U, Pi), Pi fixed
inline Var loss_dis(const Var& u, const std::vector<int>& labels, int k, double epsilon_sq) {
    return ad::sub(coding_rate_local(u, labels, k, epsilon_sq), coding_rate_global(u, epsilon_sq));
}

inline Var loss_rel(const Var& u, const Var& theta_s, Eigen::Index block = 256) {
    return ad::relation_loss(u, theta_s, block);
}

// L = L_AEs + l1 L_SS + l2 L_IB + l3 L_Dis + l4 L_Rel, with
// L_AEs = recon + ortho.
inline Var loss_total(const std::vector<Mat>& x_all, const ForwardBundle& b,
                      const std::vector<int>& pseudo, int k, const LossWeights& w,
                      LossBreakdown* out = nullptr, Eigen::Index block = 256) {
    Var recon = loss_recon(x_all, b.xhat);
    Var ortho = loss_ortho(b.c, b.d_views, b.r_views);
    Var ss = loss_ss(b.q, b.q_d, b.q_r);
    Var ib = loss_ib(b.unified.mu, b.unified.log_var, b.u, b.pred_d, b.pred_c);
    Var dis = loss_dis(b.u, pseudo, k, w.epsilon_sq);
    Var rel = loss_rel(b.u, b.theta_s, block);
    Var total = ad::add(ad::add(recon, ortho),
                        ad::add(ad::add(ad::scale(ss, w.lambda1), ad::scale(ib, w.lambda2)),
                                ad::add(ad::scale(dis, w.lambda3), ad::scale(rel, w.lambda4))));
    if (out) {
        out->aes = recon.item() + ortho.item();
        out->ortho = ortho.item();
        out->ss = ss.item();
        out->ib = ib.item();
        out->dis = dis.item();
        out->rel = rel.item();
        out->total = total.item();
    }
    return total;
}

} // namespace losses

} // namespace e2lmvsc
