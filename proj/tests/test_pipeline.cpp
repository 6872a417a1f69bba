#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "e2lmvsc/pipeline.hpp"

using namespace e2lmvsc;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("e2lmvsc_pipe_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

MultiViewDataset small_data(std::uint64_t seed) {
    SynthSpec spec;
    spec.n = 40;
    spec.views = 2;
    spec.k = 3;
    spec.shared_dim = 4;
    spec.private_dim = 1;
    spec.noise_dim = 1;
    spec.seed = seed;
    return synth_generate(spec);
}

TrainConfig small_cfg() {
    TrainConfig cfg;
    cfg.d = 4;
    cfg.hidden = 10;
    cfg.epochs_pretrain = 4;
    cfg.epochs_finetune = 4;
    cfg.seed = 5;
    return cfg;
}

bool params_identical(const ModelState& a, const ModelState& b) {
    if (a.params.size() != b.params.size()) return false;
    for (const auto& [name, p] : a.params) {
        auto it = b.params.find(name);
        if (it == b.params.end()) return false;
        const Param& q = it->second;
        if (p.step_count != q.step_count) return false;
        if (!(p.value.array() == q.value.array()).all()) return false;
        if (!(p.grad.array() == q.grad.array()).all()) return false;
        if (!(p.adam_m.array() == q.adam_m.array()).all()) return false;
        if (!(p.adam_v.array() == q.adam_v.array()).all()) return false;
    }
    return true;
}

double ae_loss(ModelState& st, const MultiViewDataset& ds) {
    ParamGraph g(st);
    ForwardBundle b = forward_autoencoder(g, st, ds);
    return ad::add(losses::loss_recon(ds.views, b.xhat),
                   losses::loss_ortho(b.c, b.d_views, b.r_views))
        .item();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("pretrain is bit-deterministic") {
    MultiViewDataset ds = small_data(1);
    TrainConfig cfg = small_cfg();
    ModelState a = pretrain(ds, cfg);
    ModelState b = pretrain(ds, cfg);
    CHECK(params_identical(a, b));
}

TEST_CASE("pretraining reduces the autoencoder loss") {
    MultiViewDataset ds = small_data(2);
    TrainConfig cfg = small_cfg();
    cfg.epochs_pretrain = 0;
    ModelState init = pretrain(ds, cfg);
    const double before = ae_loss(init, ds);
    cfg.epochs_pretrain = 1;
    ModelState one = pretrain(ds, cfg);
    const double after_one = ae_loss(one, ds);
    cfg.epochs_pretrain = 20;
    ModelState many = pretrain(ds, cfg);
    const double after_many = ae_loss(many, ds);
    CHECK(after_one < before);
    CHECK(after_many < after_one);
}

TEST_CASE("finetune with all lambdas zero continues pretraining bit-exactly") {
    MultiViewDataset ds = small_data(3);
    TrainConfig cfg = small_cfg();
    cfg.lr_finetune = cfg.lr_pretrain;
    cfg.weights.lambda1 = cfg.weights.lambda2 = 0.0;
    cfg.weights.lambda3 = cfg.weights.lambda4 = 0.0;

    cfg.epochs_pretrain = 2;
    ModelState split = pretrain(ds, cfg);
    cfg.epochs_finetune = 3;
    RunReport report;
    finetune(ds, split, cfg, report);

    cfg.epochs_pretrain = 5;
    ModelState straight = pretrain(ds, cfg);

    // the networks the autoencoder objective touches must match exactly
    for (const auto& [name, p] : straight.params) {
        if (!pipeline_detail::is_pretrain_param(name)) continue;
        INFO(name);
        CHECK((p.value.array() == split.params.at(name).value.array()).all());
    }
    // and the recorded total equals the pure autoencoder objective
    for (const auto& h : report.history) {
        CHECK(h.total == h.aes);
        CHECK(h.ss == Catch::Approx(h.ss)); // finite
    }
}

TEST_CASE("finetune affinity is symmetric with zero diagonal") {
    MultiViewDataset ds = small_data(4);
    TrainConfig cfg = small_cfg();
    ModelState st = pretrain(ds, cfg);
    RunReport report;
    FinetuneResult ft = finetune(ds, st, cfg, report);
    CHECK((ft.affinity.array() == ft.affinity.transpose().array()).all());
    CHECK((ft.affinity.diagonal().array() == 0.0).all());
    CHECK(ft.embeddings.rows() == cfg.d);
    CHECK(ft.embeddings.cols() == ds.n);
    CHECK(static_cast<int>(report.history.size()) == cfg.epochs_finetune);
}

TEST_CASE("checkpoint round-trip is bit-exact and resumes identically") {
    MultiViewDataset ds = small_data(5);
    TrainConfig cfg = small_cfg();
    ModelState st = pretrain(ds, cfg);
    auto dir = temp_dir("ckpt");
    RngStream cursor(cfg.seed, 2, 123);
    save_checkpoint(st, cursor, dir / "checkpoint.bin");
    auto [loaded, rng] = load_checkpoint(dir / "checkpoint.bin");

    CHECK(params_identical(st, loaded));
    CHECK(loaded.cfg.view_dims == st.cfg.view_dims);
    CHECK(loaded.cfg.n == st.cfg.n);
    CHECK(loaded.cfg.k == st.cfg.k);
    CHECK(rng.seed() == cursor.seed());
    CHECK(rng.stream_id() == cursor.stream_id());
    CHECK(rng.counter() == cursor.counter());

    // one fine-tune epoch from the original and the restored state agree
    TrainConfig one = cfg;
    one.epochs_finetune = 1;
    RunReport ra, rb;
    finetune(ds, st, one, ra);
    finetune(ds, loaded, one, rb);
    CHECK(params_identical(st, loaded));
    REQUIRE(ra.history.size() == 1);
    CHECK(ra.history[0].total == rb.history[0].total);
}

TEST_CASE("checkpoint rejects foreign files") {
    auto dir = temp_dir("ckpt_bad");
    std::ofstream(dir / "junk.bin") << "not a checkpoint";
    CHECK_THROWS_AS(load_checkpoint(dir / "junk.bin"), IoError);
    CHECK_THROWS_AS(load_checkpoint(dir / "absent.bin"), MissingFile);
}

TEST_CASE("run_experiment writes byte-identical outputs across runs") {
    auto data_dir = temp_dir("exp_data");
    save_dataset(small_data(6), data_dir, "f64bin");
    TrainConfig cfg = small_cfg();
    cfg.export_affinity = true;

    auto out_a = temp_dir("exp_a");
    auto out_b = temp_dir("exp_b");
    RunReport ra = run_experiment(data_dir, cfg, out_a);
    RunReport rb = run_experiment(data_dir, cfg, out_b);

    CHECK(slurp(out_a / "metrics.json") == slurp(out_b / "metrics.json"));
    CHECK(slurp(out_a / "labels_pred.csv") == slurp(out_b / "labels_pred.csv"));
    CHECK(slurp(out_a / "history.csv") == slurp(out_b / "history.csv"));
    CHECK(slurp(out_a / "affinity.f64bin") == slurp(out_b / "affinity.f64bin"));
    REQUIRE(ra.final_metrics.has_value());
    CHECK(ra.final_metrics->acc == rb.final_metrics->acc);
    CHECK(ra.predicted == rb.predicted);
    CHECK(fs::exists(out_a / "embeddings_u.csv"));
    CHECK(fs::exists(out_a / "checkpoint.bin"));

    // metrics.json carries the four fixed-precision keys
    const std::string mj = slurp(out_a / "metrics.json");
    for (const char* key : {"\"acc\"", "\"nmi\"", "\"pur\"", "\"fscore\""})
        CHECK(mj.find(key) != std::string::npos);
}

TEST_CASE("eval_every records metric snapshots") {
    MultiViewDataset ds = small_data(7);
    TrainConfig cfg = small_cfg();
    cfg.epochs_finetune = 4;
    cfg.eval_every = 2;
    ModelState st = pretrain(ds, cfg);
    RunReport report;
    finetune(ds, st, cfg, report, ds.labels);
    CHECK(report.snapshots.size() == 2);
    CHECK(report.snapshots[0].epoch == 1);
    CHECK(report.snapshots[1].epoch == 3);
    for (const auto& snap : report.snapshots) {
        CHECK(snap.metrics.acc >= 0.0);
        CHECK(snap.metrics.acc <= 1.0);
    }
}

TEST_CASE("config JSON round-trip and partial override") {
    TrainConfig cfg = small_cfg();
    cfg.weights.lambda3 = 0.25;
    cfg.kmeans_restarts = 7;
    TrainConfig back = config_from_json(config_to_json(cfg));
    CHECK(back.d == cfg.d);
    CHECK(back.hidden == cfg.hidden);
    CHECK(back.lr_pretrain == cfg.lr_pretrain);
    CHECK(back.epochs_finetune == cfg.epochs_finetune);
    CHECK(back.weights.lambda3 == 0.25);
    CHECK(back.kmeans_restarts == 7);
    CHECK(back.seed == cfg.seed);

    // partial JSON only overrides the named keys
    nlohmann::json patch = {{"lr_finetune", 5e-5}, {"seed", 99}};
    TrainConfig merged = config_from_json(patch, cfg);
    CHECK(merged.lr_finetune == 5e-5);
    CHECK(merged.seed == 99);
    CHECK(merged.d == cfg.d);
    CHECK(merged.weights.lambda3 == 0.25);
}
