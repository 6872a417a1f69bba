#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "e2lmvsc/cluster.hpp"
#include "e2lmvsc/dataio.hpp"
#include "e2lmvsc/loss_gradcheck.hpp"
#include "e2lmvsc/pipeline.hpp"

namespace {

constexpr int kExitBadInput = 2;
constexpr int kExitNumerical = 3;

void apply_thread_cap() {
    if (const char* env = std::getenv("E2LMVSC_THREADS")) {
        const int cap = std::atoi(env);
        if (cap > 0) Eigen::setNbThreads(cap);
    } else {
        Eigen::setNbThreads(1);
    }
}

std::vector<int> read_label_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw e2lmvsc::MissingFile("cannot open " + path);
    std::vector<int> labels;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) labels.push_back(std::stoi(line));
    return labels;
}

} // namespace

int main(int argc, char** argv) {
    using namespace e2lmvsc;
    apply_thread_cap();

    CLI::App app{"E2LMVSC: efficient and effective large-scale multi-view subspace clustering"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic multi-view dataset");
    std::string synth_out;
    SynthSpec spec;
    synth->add_option("--out", synth_out, "Output dataset directory")->required();
    synth->add_option("--n", spec.n, "Number of samples");
    synth->add_option("--views", spec.views, "Number of views");
    synth->add_option("--clusters", spec.k, "Number of clusters");
    synth->add_option("--shared-dim", spec.shared_dim, "Shared latent dimensions");
    synth->add_option("--private-dim", spec.private_dim, "Per-view private dimensions");
    synth->add_option("--noise-dim", spec.noise_dim, "Pure-noise dimensions per view");
    synth->add_option("--noise-scale", spec.noise_scale, "Noise scale");
    synth->add_option("--seed", spec.seed, "Random seed");

    // train
    auto* train = app.add_subcommand("train", "Pretrain, fine-tune and evaluate");
    std::string train_data, train_out, config_file;
    bool pretrain_only = false, export_affinity = false;
    std::uint64_t train_seed = 0;
    bool seed_given = false;
    train->add_option("--data", train_data, "Dataset directory")->required();
    train->add_option("--out", train_out, "Output directory")->required();
    train->add_option("--config", config_file, "JSON config file");
    auto* seed_opt = train->add_option("--seed", train_seed, "Random seed (overrides config)");
    train->add_flag("--pretrain-only", pretrain_only, "Stop after pretraining");
    train->add_flag("--export-affinity", export_affinity, "Write affinity.f64bin");

    // eval
    auto* eval = app.add_subcommand("eval", "Compute metrics for predicted vs true labels");
    std::string pred_file, truth_file;
    eval->add_option("--pred", pred_file, "Predicted labels file")->required();
    eval->add_option("--truth", truth_file, "Ground-truth labels file")->required();

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of all loss gradients");
    std::uint64_t gc_seed = 0;
    double gc_tol = 1e-4;
    gc->add_option("--seed", gc_seed, "Random seed");
    gc->add_option("--tol", gc_tol, "Relative-error tolerance");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitBadInput;
    }

    try {
        if (*synth) {
            MultiViewDataset ds = synth_generate(spec);
            save_dataset(ds, synth_out);
            std::cout << "wrote dataset: n=" << ds.n << " views=" << ds.num_views()
                      << " k=" << ds.k << " -> " << synth_out << "\n";
        } else if (*train) {
            TrainConfig cfg;
            if (!config_file.empty()) {
                std::ifstream in(config_file);
                if (!in) throw MissingFile("cannot open " + config_file);
                nlohmann::json j;
                in >> j;
                cfg = config_from_json(j, cfg);
            }
            seed_given = seed_opt->count() > 0;
            if (seed_given) cfg.seed = train_seed;
            if (export_affinity) cfg.export_affinity = true;
            RunReport report = run_experiment(train_data, cfg, train_out, pretrain_only);
            if (report.final_metrics) {
                const auto& m = *report.final_metrics;
                std::cout << std::fixed << std::setprecision(6) << "acc=" << m.acc
                          << " nmi=" << m.nmi << " pur=" << m.pur << " fscore=" << m.fscore
                          << "\n";
            } else if (!pretrain_only) {
                std::cout << "no ground truth: wrote labels only\n";
            }
        } else if (*eval) {
            const auto pred = read_label_file(pred_file);
            const auto truth = read_label_file(truth_file);
            const ClusterMetrics m = all_metrics(pred, truth);
            std::cout << std::fixed << std::setprecision(6) << "{\n  \"acc\": " << m.acc
                      << ",\n  \"nmi\": " << m.nmi << ",\n  \"pur\": " << m.pur
                      << ",\n  \"fscore\": " << m.fscore << "\n}\n";
        } else if (*gc) {
            bool all_pass = true;
            for (LossKind kind : {LossKind::Recon, LossKind::Ortho, LossKind::SS, LossKind::IB,
                                  LossKind::Dis, LossKind::Rel, LossKind::Total}) {
                GradCheckInstance inst = make_gradcheck_instance(gc_seed);
                GradReport report = check_loss_gradients(inst, kind, gc_tol, gc_seed);
                std::cout << "loss_" << loss_kind_name(kind) << ": "
                          << (report.pass ? "PASS" : "FAIL")
                          << " (max rel err " << report.worst() << ")\n";
                all_pass = all_pass && report.pass;
            }
            if (!all_pass) return kExitNumerical;
        }
    } catch (const NonFiniteLoss& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const NonFiniteGradient& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const NotPositiveDefinite& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadInput;
    }
    return 0;
}
