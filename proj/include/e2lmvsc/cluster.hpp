#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "e2lmvsc/errors.hpp"
#include "e2lmvsc/linalg.hpp"
#include "e2lmvsc/rng.hpp"

namespace e2lmvsc {

struct PartitionLabels {
    std::vector<int> labels;
    int k = 0;
};

struct ClusterMetrics {
    double acc = 0.0;
    double nmi = 0.0;
    double pur = 0.0;
    double fscore = 0.0;
};

// argmax per row, ties broken by lowest index
inline PartitionLabels pseudo_labels(const Mat& q) {
    PartitionLabels out;
    out.k = static_cast<int>(q.cols());
    out.labels.resize(q.rows());
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
        int best = 0;
        for (Eigen::Index c = 1; c < q.cols(); ++c)
            if (q(i, c) > q(i, best)) best = static_cast<int>(c);
        out.labels[i] = best;
    }
    return out;
}

struct KMeansOptions {
    int restarts = 10;
    int max_iter = 300;
    double tol = 1e-6;
};

// Lloyd with k-means++ seeding; best of `restarts` runs by WCSS, ties
// broken by restart index. Points are rows of x.
inline PartitionLabels kmeans(const Mat& x, int k, RngStream rng, KMeansOptions opt = {}) {
    const Eigen::Index n = x.rows();
    if (n < k) throw ShapeMismatch("kmeans: n < K");
    PartitionLabels best;
    double best_wcss = std::numeric_limits<double>::infinity();

    for (int restart = 0; restart < opt.restarts; ++restart) {
        RngStream r = rng.derive(restart);
        // k-means++ seeding
        Mat centers(k, x.cols());
        std::vector<double> dist2(n, std::numeric_limits<double>::infinity());
        centers.row(0) = x.row(static_cast<Eigen::Index>(r.uniform_index(n)));
        for (int c = 1; c < k; ++c) {
            double total = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double d = (x.row(i) - centers.row(c - 1)).squaredNorm();
                dist2[i] = std::min(dist2[i], d);
                total += dist2[i];
            }
            Eigen::Index pick = 0;
            if (total > 0.0) {
                double target = r.uniform() * total;
                double acc = 0.0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    acc += dist2[i];
                    if (acc >= target) {
                        pick = i;
                        break;
                    }
                    pick = i;
                }
            } else {
                pick = static_cast<Eigen::Index>(r.uniform_index(n));
            }
            centers.row(c) = x.row(pick);
        }

        std::vector<int> assign(n, 0);
        for (int iter = 0; iter < opt.max_iter; ++iter) {
            for (Eigen::Index i = 0; i < n; ++i) {
                int bc = 0;
                double bd = (x.row(i) - centers.row(0)).squaredNorm();
                for (int c = 1; c < k; ++c) {
                    const double d = (x.row(i) - centers.row(c)).squaredNorm();
                    if (d < bd) {
                        bd = d;
                        bc = c;
                    }
                }
                assign[i] = bc;
            }
            Mat next = Mat::Zero(k, x.cols());
            std::vector<Eigen::Index> counts(k, 0);
            for (Eigen::Index i = 0; i < n; ++i) {
                next.row(assign[i]) += x.row(i);
                counts[assign[i]] += 1;
            }
            for (int c = 0; c < k; ++c) {
                if (counts[c] > 0) {
                    next.row(c) /= static_cast<double>(counts[c]);
                } else {
                    // reseed empty cluster to the farthest point
                    Eigen::Index far = 0;
                    double fd = -1.0;
                    for (Eigen::Index i = 0; i < n; ++i) {
                        const double d = (x.row(i) - centers.row(assign[i])).squaredNorm();
                        if (d > fd) {
                            fd = d;
                            far = i;
                        }
                    }
                    next.row(c) = x.row(far);
                }
            }
            const double shift = (next - centers).rowwise().norm().maxCoeff();
            centers = next;
            if (shift < opt.tol) break;
        }
        // final assignment and objective
        double wcss = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            int bc = 0;
            double bd = (x.row(i) - centers.row(0)).squaredNorm();
            for (int c = 1; c < k; ++c) {
                const double d = (x.row(i) - centers.row(c)).squaredNorm();
                if (d < bd) {
                    bd = d;
                    bc = c;
                }
            }
            assign[i] = bc;
            wcss += bd;
        }
        if (wcss < best_wcss) {
            best_wcss = wcss;
            best.labels = assign;
            best.k = k;
        }
    }
    return best;
}

// Normalized-Laplacian spectral clustering of a symmetric affinity.
inline PartitionLabels spectral_cluster(const Mat& s, int k, RngStream rng,
                                        KMeansOptions opt = {}) {
    require_symmetric(s);
    const Eigen::Index n = s.rows();
    Mat a = 0.5 * (s.cwiseAbs() + s.cwiseAbs().transpose());
    Vec deg = a.rowwise().sum().array() + 1e-8;
    Vec dinv = deg.array().rsqrt();
    Mat lap = Mat::Identity(n, n) - dinv.asDiagonal() * a * dinv.asDiagonal();
    auto [vals, vecs] = sym_eig_smallest(0.5 * (lap + lap.transpose()), k);
    // unit-normalize rows; zero rows stay zero
    for (Eigen::Index i = 0; i < n; ++i) {
        const double nrm = vecs.row(i).norm();
        if (nrm > 0.0) vecs.row(i) /= nrm;
    }
    return kmeans(vecs, k, rng, opt);
}

// Minimum-cost perfect assignment via the potentials algorithm.
// Returns assignment[row] = col and the total cost.
inline std::pair<std::vector<int>, double> hungarian(const Mat& cost) {
    if (cost.rows() != cost.cols()) throw ShapeMismatch("hungarian: square matrix required");
    if (!cost.allFinite()) throw ShapeMismatch("hungarian: non-finite cost");
    const int n = static_cast<int>(cost.rows());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = -1;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> assignment(n, -1);
    double total = 0.0;
    for (int j = 1; j <= n; ++j) {
        assignment[p[j] - 1] = j - 1;
        total += cost(p[j] - 1, j - 1);
    }
    return {assignment, total};
}

namespace metric_detail {

inline void check_lengths(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw LengthMismatch("label vectors differ in length");
    if (a.empty()) throw LengthMismatch("empty label vectors");
}

inline int num_classes(const std::vector<int>& v) {
    return *std::max_element(v.begin(), v.end()) + 1;
}

inline std::vector<std::vector<Eigen::Index>> contingency(const std::vector<int>& pred,
                                                          const std::vector<int>& truth) {
    const int kp = num_classes(pred);
    const int kt = num_classes(truth);
    std::vector<std::vector<Eigen::Index>> table(kp, std::vector<Eigen::Index>(kt, 0));
    for (std::size_t i = 0; i < pred.size(); ++i) table[pred[i]][truth[i]] += 1;
    return table;
}

} // namespace metric_detail

inline double metric_acc(const std::vector<int>& pred, const std::vector<int>& truth) {
    metric_detail::check_lengths(pred, truth);
    const auto table = metric_detail::contingency(pred, truth);
    const int k = std::max(static_cast<int>(table.size()), static_cast<int>(table[0].size()));
    Mat cost = Mat::Zero(k, k);
    for (std::size_t i = 0; i < table.size(); ++i)
        for (std::size_t j = 0; j < table[i].size(); ++j)
            cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                -static_cast<double>(table[i][j]);
    auto [assignment, total] = hungarian(cost);
    (void)assignment;
    return -total / static_cast<double>(pred.size());
}

inline double metric_nmi(const std::vector<int>& pred, const std::vector<int>& truth) {
    metric_detail::check_lengths(pred, truth);
    const auto table = metric_detail::contingency(pred, truth);
    const auto n = static_cast<double>(pred.size());
    const std::size_t kp = table.size();
    const std::size_t kt = table[0].size();
    std::vector<double> rp(kp, 0.0), rt(kt, 0.0);
    for (std::size_t i = 0; i < kp; ++i)
        for (std::size_t j = 0; j < kt; ++j) {
            rp[i] += static_cast<double>(table[i][j]);
            rt[j] += static_cast<double>(table[i][j]);
        }
    double hp = 0.0, ht = 0.0, mi = 0.0;
    for (double c : rp)
        if (c > 0) hp -= c / n * std::log(c / n);
    for (double c : rt)
        if (c > 0) ht -= c / n * std::log(c / n);
    for (std::size_t i = 0; i < kp; ++i)
        for (std::size_t j = 0; j < kt; ++j)
            if (table[i][j] > 0) {
                const double pij = static_cast<double>(table[i][j]) / n;
                mi += pij * std::log(pij / (rp[i] / n * rt[j] / n));
            }
    if (hp <= 0.0 || ht <= 0.0) {
        // degenerate partitions: 1 when the groupings coincide, else 0
        bool same = true;
        for (std::size_t i = 1; i < pred.size() && same; ++i)
            for (std::size_t j = 0; j < i && same; ++j)
                same = (pred[i] == pred[j]) == (truth[i] == truth[j]);
        return same ? 1.0 : 0.0;
    }
    return mi / std::sqrt(hp * ht);
}

inline double metric_purity(const std::vector<int>& pred, const std::vector<int>& truth) {
    metric_detail::check_lengths(pred, truth);
    const auto table = metric_detail::contingency(pred, truth);
    Eigen::Index matched = 0;
    for (const auto& row : table) matched += *std::max_element(row.begin(), row.end());
    return static_cast<double>(matched) / static_cast<double>(pred.size());
}

// pairwise-pair-counting F-measure
inline double metric_fscore(const std::vector<int>& pred, const std::vector<int>& truth) {
    metric_detail::check_lengths(pred, truth);
    if (pred.size() < 2) throw LengthMismatch("fscore needs at least 2 samples");
    const auto table = metric_detail::contingency(pred, truth);
    auto pairs = [](double c) { return c * (c - 1.0) / 2.0; };
    double tp = 0.0, same_pred = 0.0, same_truth = 0.0;
    std::vector<double> rp(table.size(), 0.0), rt(table[0].size(), 0.0);
    for (std::size_t i = 0; i < table.size(); ++i)
        for (std::size_t j = 0; j < table[i].size(); ++j) {
            tp += pairs(static_cast<double>(table[i][j]));
            rp[i] += static_cast<double>(table[i][j]);
            rt[j] += static_cast<double>(table[i][j]);
        }
    for (double c : rp) same_pred += pairs(c);
    for (double c : rt) same_truth += pairs(c);
    const double p = same_pred > 0.0 ? tp / same_pred : 0.0;
    const double r = same_truth > 0.0 ? tp / same_truth : 0.0;
    if (p + r == 0.0) return 0.0;
    return 2.0 * p * r / (p + r);
}

inline ClusterMetrics all_metrics(const std::vector<int>& pred, const std::vector<int>& truth) {
    return {metric_acc(pred, truth), metric_nmi(pred, truth), metric_purity(pred, truth),
            metric_fscore(pred, truth)};
}

} // namespace e2lmvsc
