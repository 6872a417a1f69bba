#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include <Eigen/Core>

#include "e2lmvsc/autodiff.hpp"
#include "e2lmvsc/errors.hpp"
#include "e2lmvsc/linalg.hpp"

namespace e2lmvsc {

// sgn(<u_j, u_i>) * max(0, |<u_j, u_i>| - theta_s)
inline double soft_threshold(double dot, double theta_s) {
    const double mag = std::abs(dot) - theta_s;
    if (mag <= 0.0) return 0.0;
    return dot >= 0.0 ? mag : -mag;
}

inline double relation_coefficient(const Vec& u_i, const Vec& u_j, double theta_s) {
    if (u_i.size() != u_j.size()) throw ShapeMismatch("relation_coefficient: length mismatch");
    return soft_threshold(u_j.dot(u_i), theta_s);
}

struct AffinityStats {
    std::size_t peak_transient_bytes = 0;
};

// Self-expressive matrix S from U (columns are samples). Computed in
// block x block tiles; transient memory beyond S is one Gram tile.
inline Mat materialize_affinity(const Mat& u, double theta_s, Eigen::Index block,
                                AffinityStats* stats = nullptr) {
    if (block < 1) throw ShapeMismatch("materialize_affinity: block must be >= 1");
    const Eigen::Index n = u.cols();
    Mat s(n, n);
    std::size_t peak = 0;
    for (Eigen::Index i0 = 0; i0 < n; i0 += block) {
        const Eigen::Index bi = std::min(block, n - i0);
        for (Eigen::Index j0 = i0; j0 < n; j0 += block) {
            const Eigen::Index bj = std::min(block, n - j0);
            // entry-wise dots keep the summation order independent of the
            // tiling, so every block size yields bitwise-identical S
            Mat gram(bi, bj);
            for (Eigen::Index b = 0; b < bj; ++b)
                for (Eigen::Index a = 0; a < bi; ++a)
                    gram(a, b) = u.col(i0 + a).dot(u.col(j0 + b));
            peak = std::max(peak, static_cast<std::size_t>(gram.size()) * sizeof(double));
            for (Eigen::Index b = 0; b < bj; ++b) {
                for (Eigen::Index a = 0; a < bi; ++a) {
                    const Eigen::Index i = i0 + a;
                    const Eigen::Index j = j0 + b;
                    if (i == j) {
                        s(i, i) = 0.0;
                        continue;
                    }
                    const double v = soft_threshold(gram(a, b), theta_s);
                    s(i, j) = v;
                    s(j, i) = v;
                }
            }
        }
    }
    if (stats) stats->peak_transient_bytes = peak;
    return s;
}

namespace ad {

// L_Rel = sum_j || u_j - sum_{i != j} s_ij u_i ||^2 + sum_{j, i != j} s_ij^2
// with s_ij = soft_threshold(<u_i, u_j>, theta_s). Forward and backward walk
// column blocks of S so no n x n buffer outlives a block. The backward rule
// is hand-derived (S recomputed per block from U and theta).
inline Var relation_loss(const Var& u, const Var& theta_s, Eigen::Index block = 256) {
    const Mat& uv = u.value();
    const double th = theta_s.item();
    const Eigen::Index n = uv.cols();
    if (n < 2) throw ShapeMismatch("relation_loss: need at least 2 samples");

    Mat us = Mat::Zero(uv.rows(), n); // U * S, accumulated per block
    double penalty = 0.0;
    for (Eigen::Index j0 = 0; j0 < n; j0 += block) {
        const Eigen::Index b = std::min(block, n - j0);
        Mat g = uv.transpose() * uv.middleCols(j0, b); // n x b
        for (Eigen::Index c = 0; c < b; ++c)
            for (Eigen::Index i = 0; i < n; ++i)
                g(i, c) = (i == j0 + c) ? 0.0 : soft_threshold(g(i, c), th);
        us.middleCols(j0, b) = uv * g;
        penalty += g.squaredNorm();
    }
    Mat resid = uv - us;
    const double loss = resid.squaredNorm() + penalty;

    auto node = detail::make(
        Mat::Constant(1, 1, loss), {u.node(), theta_s.node()},
        [resid = std::move(resid), th, block](Node& nd) {
            const Mat& uv = nd.parents[0]->value;
            const Eigen::Index n = uv.cols();
            const double gout = nd.grad(0, 0);
            Mat gu = 2.0 * resid; // direct path, E * (I - S)^T accumulated below
            double gtheta = 0.0;
            for (Eigen::Index j0 = 0; j0 < n; j0 += block) {
                const Eigen::Index b = std::min(block, n - j0);
                Mat gram = uv.transpose() * uv.middleCols(j0, b);
                Mat sblk(n, b), dg(n, b);
                for (Eigen::Index c = 0; c < b; ++c) {
                    for (Eigen::Index i = 0; i < n; ++i) {
                        const double raw = gram(i, c);
                        const bool active = (i != j0 + c) && std::abs(raw) > th;
                        sblk(i, c) = active ? soft_threshold(raw, th) : 0.0;
                        dg(i, c) = active ? 1.0 : 0.0;
                    }
                }
                // dL/dS = -2 U^T E + 2 S on active entries
                Mat ds = -2.0 * (uv.transpose() * resid.middleCols(j0, b)) + 2.0 * sblk;
                for (Eigen::Index c = 0; c < b; ++c)
                    for (Eigen::Index i = 0; i < n; ++i) {
                        if (dg(i, c) == 0.0) {
                            ds(i, c) = 0.0;
                        } else {
                            gtheta -= ds(i, c) * (gram(i, c) >= 0.0 ? 1.0 : -1.0);
                        }
                    }
                // E-path: -2 E S^T, accumulated as  -2 E_blk S_blk^T
                gu.noalias() -= 2.0 * resid.middleCols(j0, b) * sblk.transpose();
                // G-path: U (dG + dG^T)
                gu.middleCols(j0, b).noalias() += uv * ds;
                gu.noalias() += uv.middleCols(j0, b) * ds.transpose();
            }
            detail::accumulate(*nd.parents[0], gout * gu);
            detail::accumulate(*nd.parents[1], Mat::Constant(1, 1, gout * gtheta));
        });
    return Var(node);
}

} // namespace ad

} // namespace e2lmvsc
