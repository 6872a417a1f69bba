#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "e2lmvsc/errors.hpp"
#include "e2lmvsc/linalg.hpp"
#include "e2lmvsc/rng.hpp"

namespace e2lmvsc {

namespace fs = std::filesystem;

struct MultiViewDataset {
    std::vector<Mat> views; // view v is d_v x n, columns are samples
    Eigen::Index n = 0;
    int k = 0;
    std::optional<std::vector<int>> labels;
    std::vector<std::string> view_names;

    int num_views() const { return static_cast<int>(views.size()); }
};

struct SynthSpec {
    Eigen::Index n = 400;
    int views = 3;
    int k = 4;
    Eigen::Index shared_dim = 10;
    Eigen::Index private_dim = 2;
    Eigen::Index noise_dim = 2;
    double noise_scale = 0.05;
    std::uint64_t seed = 0;
};

namespace io_detail {

// CSV: one sample per line (n lines of d values).
inline Mat read_csv_matrix(const fs::path& path, Eigen::Index expect_n, Eigen::Index expect_d) {
    std::ifstream in(path);
    if (!in) throw MissingFile("cannot open " + path.string());
    std::vector<double> data;
    std::string line;
    Eigen::Index rows = 0;
    Eigen::Index cols = -1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        Eigen::Index c = 0;
        while (std::getline(ss, cell, ',')) {
            data.push_back(std::stod(cell));
            ++c;
        }
        if (cols < 0)
            cols = c;
        else if (c != cols)
            throw ShapeMismatch("ragged CSV row in " + path.string());
        ++rows;
    }
    if (rows != expect_n || cols != expect_d)
        throw ShapeMismatch(path.string() + ": got " + std::to_string(rows) + "x" +
                            std::to_string(cols) + ", expected " + std::to_string(expect_n) + "x" +
                            std::to_string(expect_d));
    // file is sample-major (n x d); in memory we keep d x n
    Mat m(cols, rows);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(j, i) = data[i * cols + j];
    return m;
}

inline Mat read_f64bin_matrix(const fs::path& path, Eigen::Index expect_n, Eigen::Index expect_d) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFile("cannot open " + path.string());
    std::vector<double> data(static_cast<std::size_t>(expect_n * expect_d));
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(data.size() * sizeof(double)))
        throw ShapeMismatch(path.string() + ": file shorter than expected");
    char probe;
    if (in.read(&probe, 1)) throw ShapeMismatch(path.string() + ": file longer than expected");
    Mat m(expect_d, expect_n);
    for (Eigen::Index i = 0; i < expect_n; ++i)
        for (Eigen::Index j = 0; j < expect_d; ++j) m(j, i) = data[i * expect_d + j];
    return m;
}

} // namespace io_detail

// Write a matrix as-is (rows x cols on disk, row-major).
inline void export_matrix(const Mat& m, const fs::path& path, const std::string& format) {
    if (path.empty()) throw IoError("empty export path");
    if (format == "csv") {
        std::ofstream out(path);
        if (!out) throw IoError("cannot open " + path.string());
        out.precision(17);
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                if (j) out << ',';
                out << m(i, j);
            }
            out << '\n';
        }
        if (!out) throw IoError("write failed: " + path.string());
    } else if (format == "f64bin") {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot open " + path.string());
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                const double v = m(i, j);
                out.write(reinterpret_cast<const char*>(&v), sizeof(double));
            }
        if (!out) throw IoError("write failed: " + path.string());
    } else {
        throw IoError("unknown export format: " + format);
    }
}

inline MultiViewDataset load_dataset(const fs::path& dir) {
    const fs::path meta_path = dir / "meta.json";
    std::ifstream meta_in(meta_path);
    if (!meta_in) throw MissingFile("missing " + meta_path.string());
    nlohmann::json meta;
    try {
        meta_in >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad meta.json: " + std::string(e.what()));
    }

    MultiViewDataset ds;
    ds.n = meta.at("n").get<Eigen::Index>();
    ds.k = meta.at("k").get<int>();
    const bool has_labels = meta.at("labels").get<bool>();
    const int label_base = meta.value("label_base", 0);

    for (const auto& view : meta.at("views")) {
        const std::string name = view.at("name").get<std::string>();
        const auto dim = view.at("dim").get<Eigen::Index>();
        const std::string file = view.at("file").get<std::string>();
        const std::string format = view.value("format", "csv");
        if (dim < 1) throw ShapeMismatch("view dim must be >= 1");
        Mat m = format == "f64bin" ? io_detail::read_f64bin_matrix(dir / file, ds.n, dim)
                                   : io_detail::read_csv_matrix(dir / file, ds.n, dim);
        ds.views.push_back(std::move(m));
        ds.view_names.push_back(name);
    }
    if (ds.views.empty()) throw ShapeMismatch("dataset has no views");

    if (has_labels) {
        std::ifstream lin(dir / "labels.csv");
        if (!lin) throw MissingFile("missing labels.csv");
        std::vector<int> labels;
        std::string line;
        while (std::getline(lin, line)) {
            if (line.empty()) continue;
            labels.push_back(std::stoi(line) - label_base);
        }
        if (static_cast<Eigen::Index>(labels.size()) != ds.n)
            throw ShapeMismatch("labels.csv length disagrees with metadata n");
        for (int l : labels)
            if (l < 0 || l >= ds.k) throw BadLabel("label id " + std::to_string(l) + " outside [0," +
                                                   std::to_string(ds.k) + ")");
        ds.labels = std::move(labels);
    }
    return ds;
}

// Each feature dimension of each view rescaled to [0,1]; constant
// dimensions map to 0.
inline MultiViewDataset normalize_minmax(const MultiViewDataset& ds) {
    MultiViewDataset out = ds;
    for (auto& view : out.views) {
        for (Eigen::Index f = 0; f < view.rows(); ++f) {
            const double lo = view.row(f).minCoeff();
            const double hi = view.row(f).maxCoeff();
            if (hi > lo)
                view.row(f) = (view.row(f).array() - lo) / (hi - lo);
            else
                view.row(f).setZero();
        }
    }
    return out;
}

inline MultiViewDataset synth_generate(const SynthSpec& spec) {
    if (spec.n < spec.k || spec.k < 2) throw ShapeMismatch("synth: need n >= K >= 2");
    if (spec.shared_dim + spec.private_dim < 1)
        throw ShapeMismatch("synth: shared_dim + private_dim must be >= 1");
    RngStream root(spec.seed, 0xE2);

    // balanced labels, shuffled
    std::vector<int> labels(spec.n);
    for (Eigen::Index i = 0; i < spec.n; ++i) labels[i] = static_cast<int>(i % spec.k);
    {
        RngStream r = root.derive(1);
        for (Eigen::Index i = spec.n - 1; i > 0; --i) {
            const auto j = static_cast<Eigen::Index>(r.uniform_index(i + 1));
            std::swap(labels[i], labels[j]);
        }
    }

    RngStream rc = root.derive(2);
    Mat centroids = 2.0 * rc.normal_matrix(spec.shared_dim, spec.k);

    // shared code: cluster centroid plus noise_scale jitter
    RngStream rs = root.derive(3);
    Mat shared(spec.shared_dim, spec.n);
    for (Eigen::Index i = 0; i < spec.n; ++i)
        shared.col(i) =
            centroids.col(labels[i]) + spec.noise_scale * rs.normal_matrix(spec.shared_dim, 1);

    MultiViewDataset ds;
    ds.n = spec.n;
    ds.k = spec.k;
    ds.labels = labels;
    const Eigen::Index latent = spec.shared_dim + spec.private_dim;
    for (int v = 0; v < spec.views; ++v) {
        RngStream rv = root.derive(100 + v);
        Mat priv = 0.3 * rv.normal_matrix(spec.private_dim, spec.n);
        Mat code(latent, spec.n);
        code.topRows(spec.shared_dim) = shared;
        if (spec.private_dim > 0) code.bottomRows(spec.private_dim) = priv;
        const Eigen::Index dv = latent + spec.noise_dim;
        Mat map = rv.normal_matrix(latent, latent) / std::sqrt(static_cast<double>(latent));
        Mat obs(dv, spec.n);
        obs.topRows(latent) = map * code;
        if (spec.noise_dim > 0)
            obs.bottomRows(spec.noise_dim) = spec.noise_scale * rv.normal_matrix(spec.noise_dim, spec.n);
        ds.views.push_back(std::move(obs));
        ds.view_names.push_back("synth" + std::to_string(v));
    }
    return normalize_minmax(ds);
}

// Write a dataset in the on-disk directory layout.
inline void save_dataset(const MultiViewDataset& ds, const fs::path& dir,
                         const std::string& format = "f64bin") {
    fs::create_directories(dir);
    if (ds.labels)
        for (int l : *ds.labels)
            if (l < 0 || l >= ds.k)
                throw BadLabel("label id " + std::to_string(l) + " outside [0," +
                               std::to_string(ds.k) + ")");
    nlohmann::json meta;
    meta["n"] = ds.n;
    meta["k"] = ds.k;
    meta["labels"] = ds.labels.has_value();
    meta["label_base"] = 0;
    meta["views"] = nlohmann::json::array();
    for (std::size_t v = 0; v < ds.views.size(); ++v) {
        const std::string name =
            v < ds.view_names.size() ? ds.view_names[v] : "view" + std::to_string(v);
        const std::string ext = format == "csv" ? ".csv" : ".f64bin";
        const std::string file = "view" + std::to_string(v) + ext;
        meta["views"].push_back({{"name", name},
                                 {"dim", ds.views[v].rows()},
                                 {"file", file},
                                 {"format", format}});
        // disk layout is sample-major: n rows of d_v values
        export_matrix(ds.views[v].transpose(), dir / file, format);
    }
    std::ofstream meta_out(dir / "meta.json");
    if (!meta_out) throw IoError("cannot write meta.json");
    meta_out << meta.dump(2) << '\n';
    if (ds.labels) {
        std::ofstream lout(dir / "labels.csv");
        for (int l : *ds.labels) lout << l << '\n';
        if (!lout) throw IoError("cannot write labels.csv");
    }
}

} // namespace e2lmvsc
