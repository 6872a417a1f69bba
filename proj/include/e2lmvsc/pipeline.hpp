#pragma once

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "e2lmvsc/affinity.hpp"
#include "e2lmvsc/checkpoint.hpp"
#include "e2lmvsc/cluster.hpp"
#include "e2lmvsc/dataio.hpp"
#include "e2lmvsc/losses.hpp"
#include "e2lmvsc/model.hpp"
#include "e2lmvsc/param.hpp"

namespace e2lmvsc {

struct TrainConfig {
    Eigen::Index d = 20;
    Eigen::Index hidden = 200;
    double lr_pretrain = 1e-3;
    double lr_finetune = 1e-4;
    int epochs_pretrain = 1000;
    int epochs_finetune = 300;
    LossWeights weights;
    std::uint64_t seed = 0;
    int eval_every = 0; // 0: only final evaluation
    Eigen::Index affinity_block = 256;
    int kmeans_restarts = 10;
    int kmeans_max_iter = 300;
    double kmeans_tol = 1e-6;
    bool export_affinity = false;

    KMeansOptions kmeans_options() const {
        return {kmeans_restarts, kmeans_max_iter, kmeans_tol};
    }
};

inline TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {}) {
    TrainConfig c = base;
    c.d = j.value("d", c.d);
    c.hidden = j.value("hidden", c.hidden);
    c.lr_pretrain = j.value("lr_pretrain", c.lr_pretrain);
    c.lr_finetune = j.value("lr_finetune", c.lr_finetune);
    c.epochs_pretrain = j.value("epochs_pretrain", c.epochs_pretrain);
    c.epochs_finetune = j.value("epochs_finetune", c.epochs_finetune);
    c.weights.lambda1 = j.value("lambda1", c.weights.lambda1);
    c.weights.lambda2 = j.value("lambda2", c.weights.lambda2);
    c.weights.lambda3 = j.value("lambda3", c.weights.lambda3);
    c.weights.lambda4 = j.value("lambda4", c.weights.lambda4);
    c.weights.epsilon_sq = j.value("epsilon_sq", c.weights.epsilon_sq);
    c.seed = j.value("seed", c.seed);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.affinity_block = j.value("affinity_block", c.affinity_block);
    c.kmeans_restarts = j.value("kmeans_restarts", c.kmeans_restarts);
    c.kmeans_max_iter = j.value("kmeans_max_iter", c.kmeans_max_iter);
    c.kmeans_tol = j.value("kmeans_tol", c.kmeans_tol);
    c.export_affinity = j.value("export_affinity", c.export_affinity);
    return c;
}

inline nlohmann::json config_to_json(const TrainConfig& c) {
    return {{"d", c.d},
            {"hidden", c.hidden},
            {"lr_pretrain", c.lr_pretrain},
            {"lr_finetune", c.lr_finetune},
            {"epochs_pretrain", c.epochs_pretrain},
            {"epochs_finetune", c.epochs_finetune},
            {"lambda1", c.weights.lambda1},
            {"lambda2", c.weights.lambda2},
            {"lambda3", c.weights.lambda3},
            {"lambda4", c.weights.lambda4},
            {"epsilon_sq", c.weights.epsilon_sq},
            {"seed", c.seed},
            {"eval_every", c.eval_every},
            {"affinity_block", c.affinity_block},
            {"kmeans_restarts", c.kmeans_restarts},
            {"kmeans_max_iter", c.kmeans_max_iter},
            {"kmeans_tol", c.kmeans_tol},
            {"export_affinity", c.export_affinity}};
}

struct EvalSnapshot {
    int epoch = 0;
    ClusterMetrics metrics;
};

struct RunReport {
    std::vector<LossBreakdown> history; // fine-tune epochs, in order
    std::vector<std::optional<ClusterMetrics>> history_metrics;
    std::vector<EvalSnapshot> snapshots;
    std::optional<ClusterMetrics> final_metrics;
    std::vector<int> predicted;
    double pretrain_seconds = 0.0;
    double finetune_seconds = 0.0;
    nlohmann::json config_echo;
    std::uint64_t seed = 0;
    bool complete = true;
};

namespace pipeline_detail {

inline bool is_pretrain_param(const std::string& name) {
    return name == "C" || name.rfind("enc", 0) == 0 || name.rfind("dec", 0) == 0;
}

// relative change over a 20-epoch window
class EarlyStop {
public:
    bool update(double loss) {
        window_.push_back(loss);
        if (window_.size() <= 20) return false;
        const double prev = window_[window_.size() - 21];
        const double rel = std::abs(loss - prev) / std::max(1.0, std::abs(prev));
        return rel < 1e-7;
    }

private:
    std::vector<double> window_;
};

} // namespace pipeline_detail

inline ModelState pretrain(const MultiViewDataset& ds, const TrainConfig& cfg) {
    ModelConfig mc;
    for (const auto& v : ds.views) mc.view_dims.push_back(v.rows());
    mc.n = ds.n;
    mc.k = ds.k;
    mc.d = cfg.d;
    mc.hidden = cfg.hidden;
    ModelState st = init_model(mc, RngStream(cfg.seed, 1));

    pipeline_detail::EarlyStop stop;
    ModelState last_good = st;
    for (int epoch = 0; epoch < cfg.epochs_pretrain; ++epoch) {
        ParamGraph g(st);
        ForwardBundle b = forward_autoencoder(g, st, ds);
        ad::Var loss = ad::add(losses::loss_recon(ds.views, b.xhat),
                               losses::loss_ortho(b.c, b.d_views, b.r_views));
        if (!std::isfinite(loss.item())) {
            st = last_good;
            throw NonFiniteLoss("pretrain: non-finite loss at epoch " + std::to_string(epoch));
        }
        last_good = st;
        loss.backward();
        g.scatter_grads();
        for (auto& [name, p] : st.params) {
            if (pipeline_detail::is_pretrain_param(name))
                adam_step(p, cfg.lr_pretrain);
            else
                p.zero_grad();
        }
        if (stop.update(loss.item())) break;
    }
    return st;
}

struct FinetuneResult {
    Mat affinity;
    Mat embeddings; // inference-mode U, d x n
};

inline FinetuneResult finetune(const MultiViewDataset& ds, ModelState& st, const TrainConfig& cfg,
                               RunReport& report,
                               const std::optional<std::vector<int>>& truth = std::nullopt) {
    RngStream noise_rng(cfg.seed, 2);
    pipeline_detail::EarlyStop stop;
    ModelState last_good = st;

    auto eval_now = [&](int epoch) -> std::optional<ClusterMetrics> {
        if (!truth) return std::nullopt;
        ParamGraph g(st);
        ForwardBundle b = forward(g, st, ds, nullptr);
        Mat s = materialize_affinity(b.u.value(), b.theta_s.item(), cfg.affinity_block);
        PartitionLabels labels = spectral_cluster(s, ds.k, RngStream(cfg.seed, 3),
                                                  cfg.kmeans_options());
        return all_metrics(labels.labels, *truth);
    };

    for (int epoch = 0; epoch < cfg.epochs_finetune; ++epoch) {
        Mat noise = noise_rng.normal_matrix(cfg.d, ds.n);
        ParamGraph g(st);
        ForwardBundle b = forward(g, st, ds, &noise);
        // pseudo-labels refreshed once per epoch, detached from gradients
        PartitionLabels pseudo = pseudo_labels(b.q.value());
        LossBreakdown breakdown;
        ad::Var loss = losses::loss_total(ds.views, b, pseudo.labels, ds.k, cfg.weights,
                                          &breakdown, cfg.affinity_block);
        if (!std::isfinite(breakdown.total)) {
            st = last_good;
            report.complete = false;
            throw NonFiniteLoss("finetune: non-finite loss at epoch " + std::to_string(epoch));
        }
        last_good = st;
        loss.backward();
        g.scatter_grads();
        for (auto& [name, p] : st.params) adam_step(p, cfg.lr_finetune);
        report.history.push_back(breakdown);
        if (cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0) {
            auto m = eval_now(epoch);
            report.history_metrics.push_back(m);
            if (m) report.snapshots.push_back({epoch, *m});
        } else {
            report.history_metrics.push_back(std::nullopt);
        }
        if (stop.update(breakdown.total)) break;
    }

    // inference-mode U (posterior mean, no sampling)
    ParamGraph g(st);
    ForwardBundle b = forward(g, st, ds, nullptr);
    FinetuneResult result;
    result.embeddings = b.u.value();
    result.affinity = materialize_affinity(b.u.value(), b.theta_s.item(), cfg.affinity_block);
    return result;
}

inline PartitionLabels evaluate_labels(const Mat& s, int k, const TrainConfig& cfg) {
    return spectral_cluster(s, k, RngStream(cfg.seed, 3), cfg.kmeans_options());
}

namespace pipeline_detail {

inline void write_metrics_json(const ClusterMetrics& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << std::fixed << std::setprecision(6);
    out << "{\n"
        << "  \"acc\": " << m.acc << ",\n"
        << "  \"nmi\": " << m.nmi << ",\n"
        << "  \"pur\": " << m.pur << ",\n"
        << "  \"fscore\": " << m.fscore << "\n"
        << "}\n";
}

inline void write_history_csv(const RunReport& r, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    const bool any_metrics = !r.snapshots.empty();
    out << "epoch,aes,ortho,ss,ib,dis,rel,total";
    if (any_metrics) out << ",acc,nmi,pur,fscore";
    out << '\n';
    out.precision(17);
    for (std::size_t e = 0; e < r.history.size(); ++e) {
        const auto& h = r.history[e];
        out << e << ',' << h.aes << ',' << h.ortho << ',' << h.ss << ',' << h.ib << ',' << h.dis
            << ',' << h.rel << ',' << h.total;
        if (any_metrics) {
            std::optional<ClusterMetrics> m;
            if (e < r.history_metrics.size()) m = r.history_metrics[e];
            if (m)
                out << ',' << m->acc << ',' << m->nmi << ',' << m->pur << ',' << m->fscore;
            else
                out << ",,,,";
        }
        out << '\n';
    }
}

inline void write_labels_csv(const std::vector<int>& labels, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (int l : labels) out << l << '\n';
}

} // namespace pipeline_detail

inline RunReport run_experiment(const std::filesystem::path& data_dir, const TrainConfig& cfg,
                                const std::filesystem::path& out_dir, bool pretrain_only = false) {
    namespace fs = std::filesystem;
    using clock = std::chrono::steady_clock;
    fs::create_directories(out_dir);

    MultiViewDataset ds = normalize_minmax(load_dataset(data_dir));

    RunReport report;
    report.seed = cfg.seed;
    report.config_echo = config_to_json(cfg);

    auto t0 = clock::now();
    ModelState st = pretrain(ds, cfg);
    report.pretrain_seconds = std::chrono::duration<double>(clock::now() - t0).count();

    if (pretrain_only) {
        save_checkpoint(st, RngStream(cfg.seed, 2), out_dir / "checkpoint.bin");
        return report;
    }

    auto t1 = clock::now();
    FinetuneResult ft = finetune(ds, st, cfg, report, ds.labels);
    report.finetune_seconds = std::chrono::duration<double>(clock::now() - t1).count();

    PartitionLabels pred = evaluate_labels(ft.affinity, ds.k, cfg);
    report.predicted = pred.labels;
    if (ds.labels) report.final_metrics = all_metrics(pred.labels, *ds.labels);

    save_checkpoint(st, RngStream(cfg.seed, 2), out_dir / "checkpoint.bin");
    pipeline_detail::write_labels_csv(pred.labels, out_dir / "labels_pred.csv");
    pipeline_detail::write_history_csv(report, out_dir / "history.csv");
    export_matrix(ft.embeddings.transpose(), out_dir / "embeddings_u.csv", "csv");
    if (report.final_metrics)
        pipeline_detail::write_metrics_json(*report.final_metrics, out_dir / "metrics.json");
    if (cfg.export_affinity)
        export_matrix(ft.affinity, out_dir / "affinity.f64bin", "f64bin");
    return report;
}

} // namespace e2lmvsc
