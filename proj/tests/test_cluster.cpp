#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "e2lmvsc/cluster.hpp"

using namespace e2lmvsc;

namespace {

std::vector<int> random_labels(RngStream& rng, std::size_t n, int k) {
    std::vector<int> out(n);
    for (auto& l : out) l = static_cast<int>(rng.uniform_index(k));
    return out;
}

// true iff two labelings induce the same partition
bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if ((a[i] == a[j]) != (b[i] == b[j])) return false;
    return true;
}

double brute_force_assignment(const Mat& cost) {
    const int n = static_cast<int>(cost.rows());
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (int i = 0; i < n; ++i) total += cost(i, perm[i]);
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

double wcss_of(const Mat& x, const std::vector<int>& assign, int k) {
    Mat centers = Mat::Zero(k, x.cols());
    std::vector<int> counts(k, 0);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        centers.row(assign[i]) += x.row(i);
        counts[assign[i]] += 1;
    }
    for (int c = 0; c < k; ++c)
        if (counts[c]) centers.row(c) /= counts[c];
    double wcss = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        wcss += (x.row(i) - centers.row(assign[i])).squaredNorm();
    return wcss;
}

// direct-definition oracles
double oracle_nmi(const std::vector<int>& pred, const std::vector<int>& truth) {
    const auto n = static_cast<double>(pred.size());
    const int kp = *std::max_element(pred.begin(), pred.end()) + 1;
    const int kt = *std::max_element(truth.begin(), truth.end()) + 1;
    std::vector<std::vector<double>> joint(kp, std::vector<double>(kt, 0.0));
    for (std::size_t i = 0; i < pred.size(); ++i) joint[pred[i]][truth[i]] += 1.0 / n;
    std::vector<double> pp(kp, 0.0), pt(kt, 0.0);
    for (int i = 0; i < kp; ++i)
        for (int j = 0; j < kt; ++j) {
            pp[i] += joint[i][j];
            pt[j] += joint[i][j];
        }
    double hp = 0.0, ht = 0.0, mi = 0.0;
    for (double p : pp)
        if (p > 0) hp -= p * std::log(p);
    for (double p : pt)
        if (p > 0) ht -= p * std::log(p);
    for (int i = 0; i < kp; ++i)
        for (int j = 0; j < kt; ++j)
            if (joint[i][j] > 0) mi += joint[i][j] * std::log(joint[i][j] / (pp[i] * pt[j]));
    if (hp <= 0.0 || ht <= 0.0) return same_partition(pred, truth) ? 1.0 : 0.0;
    return mi / std::sqrt(hp * ht);
}

double oracle_fscore(const std::vector<int>& pred, const std::vector<int>& truth) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        for (std::size_t j = 0; j < i; ++j) {
            const bool sp = pred[i] == pred[j];
            const bool st = truth[i] == truth[j];
            if (sp && st) tp += 1;
            else if (sp) fp += 1;
            else if (st) fn += 1;
        }
    if (tp == 0) return 0.0;
    const double p = tp / (tp + fp);
    const double r = tp / (tp + fn);
    return 2 * p * r / (p + r);
}

double oracle_purity(const std::vector<int>& pred, const std::vector<int>& truth) {
    const int kp = *std::max_element(pred.begin(), pred.end()) + 1;
    double matched = 0.0;
    for (int c = 0; c < kp; ++c) {
        std::vector<int> counts(*std::max_element(truth.begin(), truth.end()) + 1, 0);
        for (std::size_t i = 0; i < pred.size(); ++i)
            if (pred[i] == c) counts[truth[i]] += 1;
        matched += *std::max_element(counts.begin(), counts.end());
    }
    return matched / static_cast<double>(pred.size());
}

double oracle_acc(const std::vector<int>& pred, const std::vector<int>& truth) {
    const int k = std::max(*std::max_element(pred.begin(), pred.end()),
                           *std::max_element(truth.begin(), truth.end())) +
                  1;
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    int best = 0;
    do {
        int hits = 0;
        for (std::size_t i = 0; i < pred.size(); ++i)
            if (perm[pred[i]] == truth[i]) ++hits;
        best = std::max(best, hits);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(best) / static_cast<double>(pred.size());
}

Mat block_affinity(const std::vector<int>& membership) {
    const auto n = static_cast<Eigen::Index>(membership.size());
    Mat s = Mat::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j && membership[i] == membership[j]) s(i, j) = 1.0;
    return s;
}

} // namespace

TEST_CASE("pseudo_labels argmax with lowest-index tie rule") {
    Mat q(2, 3);
    q << 0.1, 0.7, 0.2, 0.5, 0.5, 0.0;
    PartitionLabels pl = pseudo_labels(q);
    CHECK(pl.labels == std::vector<int>{1, 0});
    CHECK(pl.k == 3);

    RngStream rng(3);
    Mat r = rng.uniform_matrix(40, 5, 0.0, 1.0);
    PartitionLabels prl = pseudo_labels(r);
    for (Eigen::Index i = 0; i < 40; ++i) {
        Eigen::Index best;
        r.row(i).maxCoeff(&best);
        // Eigen's maxCoeff also returns the first maximum
        CHECK(prl.labels[i] == static_cast<int>(best));
    }
}

TEST_CASE("kmeans: exact split of well-separated 1-D groups") {
    Mat x(4, 1);
    x << 0.0, 0.1, 10.0, 10.1;
    PartitionLabels pl = kmeans(x, 2, RngStream(1));
    CHECK(pl.labels[0] == pl.labels[1]);
    CHECK(pl.labels[2] == pl.labels[3]);
    CHECK(pl.labels[0] != pl.labels[2]);
}

TEST_CASE("kmeans objective matches exhaustive 2-partition enumeration") {
    RngStream rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const auto n = static_cast<Eigen::Index>(4 + rng.uniform_index(5)); // 4..8
        Mat x = rng.normal_matrix(n, 2);
        double best = std::numeric_limits<double>::infinity();
        for (int mask = 1; mask < (1 << n) - 1; ++mask) {
            std::vector<int> assign(n);
            for (Eigen::Index i = 0; i < n; ++i) assign[i] = (mask >> i) & 1;
            best = std::min(best, wcss_of(x, assign, 2));
        }
        KMeansOptions opt;
        opt.restarts = 20;
        PartitionLabels pl = kmeans(x, 2, RngStream(100 + trial), opt);
        CHECK(wcss_of(x, pl.labels, 2) <= best + 1e-9);
    }
}

TEST_CASE("kmeans determinism") {
    RngStream rng(6);
    Mat x = rng.normal_matrix(30, 3);
    PartitionLabels a = kmeans(x, 4, RngStream(9));
    PartitionLabels b = kmeans(x, 4, RngStream(9));
    CHECK(a.labels == b.labels);
}

TEST_CASE("spectral_cluster: block-diagonal exact recovery") {
    std::vector<int> truth = {0, 0, 0, 1, 1, 1, 1};
    Mat s = block_affinity(truth);
    PartitionLabels pl = spectral_cluster(s, 2, RngStream(1));
    CHECK(metric_acc(pl.labels, truth) == 1.0);

    // three components, uneven sizes
    std::vector<int> t3;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 3 + 2 * c; ++i) t3.push_back(c);
    PartitionLabels p3 = spectral_cluster(block_affinity(t3), 3, RngStream(2));
    CHECK(metric_acc(p3.labels, t3) == 1.0);
}

TEST_CASE("spectral_cluster: permutation invariance") {
    std::vector<int> truth = {0, 0, 0, 0, 1, 1, 1, 2, 2, 2, 2, 2};
    Mat s = block_affinity(truth);
    const Eigen::Index n = s.rows();
    // fixed permutation
    std::vector<Eigen::Index> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    RngStream pr(4);
    for (Eigen::Index i = n - 1; i > 0; --i)
        std::swap(perm[i], perm[static_cast<Eigen::Index>(pr.uniform_index(i + 1))]);
    Mat sp(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) sp(perm[i], perm[j]) = s(i, j);
    PartitionLabels a = spectral_cluster(s, 3, RngStream(7));
    PartitionLabels b = spectral_cluster(sp, 3, RngStream(7));
    std::vector<int> b_unpermuted(n);
    for (Eigen::Index i = 0; i < n; ++i) b_unpermuted[i] = b.labels[perm[i]];
    CHECK(same_partition(a.labels, b_unpermuted));
}

TEST_CASE("spectral_cluster: K=1 and error paths") {
    std::vector<int> truth = {0, 0, 0, 0};
    PartitionLabels pl = spectral_cluster(block_affinity(truth), 1, RngStream(1));
    CHECK(pl.labels == std::vector<int>{0, 0, 0, 0});

    Mat asym(2, 2);
    asym << 0.0, 1.0, 0.5, 0.0;
    CHECK_THROWS_AS(spectral_cluster(asym, 2, RngStream(1)), AsymmetricInput);
}

TEST_CASE("hungarian worked examples") {
    Mat c2(2, 2);
    c2 << 1, 2, 2, 1;
    auto [a2, t2] = hungarian(c2);
    CHECK(t2 == Catch::Approx(2.0));
    CHECK(a2 == std::vector<int>{0, 1});

    Mat c3(3, 3);
    c3 << 4, 1, 3, 2, 0, 5, 3, 2, 2;
    auto [a3, t3] = hungarian(c3);
    CHECK(t3 == Catch::Approx(5.0));
    CHECK(a3 == std::vector<int>{1, 0, 2});
}

TEST_CASE("hungarian equals factorial brute force for K <= 7") {
    RngStream rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        const auto k = static_cast<Eigen::Index>(2 + rng.uniform_index(6)); // 2..7
        Mat cost = rng.uniform_matrix(k, k, -5.0, 5.0);
        auto [assign, total] = hungarian(cost);
        CHECK(total == Catch::Approx(brute_force_assignment(cost)).margin(1e-10));
        // assignment is a permutation achieving the reported total
        std::vector<char> seen(k, 0);
        double recomputed = 0.0;
        for (Eigen::Index i = 0; i < k; ++i) {
            REQUIRE(assign[i] >= 0);
            REQUIRE(assign[i] < k);
            CHECK(!seen[assign[i]]);
            seen[assign[i]] = 1;
            recomputed += cost(i, assign[i]);
        }
        CHECK(recomputed == Catch::Approx(total).margin(1e-12));
    }
}

TEST_CASE("metric worked values") {
    CHECK(metric_acc({0, 0, 1, 1}, {1, 1, 0, 0}) == 1.0);
    CHECK(metric_acc({0, 1, 0, 1}, {0, 0, 1, 1}) == Catch::Approx(0.5));
    CHECK(metric_nmi({0, 1, 0, 1}, {0, 0, 1, 1}) == Catch::Approx(0.0).margin(1e-12));
    CHECK(metric_purity({0, 0, 1, 1}, {0, 1, 1, 1}) == Catch::Approx(0.75));
    CHECK(metric_fscore({0, 0, 0, 1}, {0, 0, 1, 1}) == Catch::Approx(0.4));

    std::vector<int> x = {0, 1, 2, 1, 0};
    CHECK(metric_acc(x, x) == 1.0);
    CHECK(metric_nmi(x, x) == Catch::Approx(1.0));
    CHECK(metric_purity(x, x) == 1.0);
    CHECK(metric_fscore(x, x) == Catch::Approx(1.0));
}

TEST_CASE("metrics match direct-definition oracles on random labelings") {
    RngStream rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 2 + static_cast<int>(rng.uniform_index(4));
        const std::size_t n = 6 + rng.uniform_index(30);
        std::vector<int> pred = random_labels(rng, n, k);
        std::vector<int> truth = random_labels(rng, n, k);
        const double acc = metric_acc(pred, truth);
        const double nmi = metric_nmi(pred, truth);
        const double pur = metric_purity(pred, truth);
        const double f = metric_fscore(pred, truth);
        CHECK(acc == Catch::Approx(oracle_acc(pred, truth)).margin(1e-12));
        CHECK(nmi == Catch::Approx(oracle_nmi(pred, truth)).margin(1e-12));
        CHECK(pur == Catch::Approx(oracle_purity(pred, truth)).margin(1e-12));
        CHECK(f == Catch::Approx(oracle_fscore(pred, truth)).margin(1e-12));
        // range and ordering properties
        for (double m : {acc, nmi, pur, f}) {
            CHECK(m >= 0.0);
            CHECK(m <= 1.0);
        }
        CHECK(pur >= acc - 1e-12);
    }
}

TEST_CASE("metrics invariant under relabeling of cluster ids") {
    RngStream rng(13);
    std::vector<int> pred = random_labels(rng, 25, 4);
    std::vector<int> truth = random_labels(rng, 25, 4);
    const std::vector<int> remap = {2, 0, 3, 1};
    std::vector<int> pred2(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) pred2[i] = remap[pred[i]];
    CHECK(metric_acc(pred2, truth) == Catch::Approx(metric_acc(pred, truth)).margin(1e-12));
    CHECK(metric_nmi(pred2, truth) == Catch::Approx(metric_nmi(pred, truth)).margin(1e-12));
    CHECK(metric_purity(pred2, truth) == Catch::Approx(metric_purity(pred, truth)).margin(1e-12));
    CHECK(metric_fscore(pred2, truth) == Catch::Approx(metric_fscore(pred, truth)).margin(1e-12));
}

TEST_CASE("metric error paths") {
    CHECK_THROWS_AS(metric_acc({0, 1}, {0, 1, 0}), LengthMismatch);
    CHECK_THROWS_AS(metric_fscore({0}, {0}), LengthMismatch);
}
