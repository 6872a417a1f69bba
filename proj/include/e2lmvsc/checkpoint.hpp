#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "e2lmvsc/errors.hpp"
#include "e2lmvsc/model.hpp"
#include "e2lmvsc/rng.hpp"

namespace e2lmvsc {

namespace ckpt_detail {

constexpr std::uint32_t kMagic = 0x45324B31; // "E2K1"
constexpr std::uint32_t kVersion = 1;

template <typename T> void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T> void read_pod(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("checkpoint truncated");
}

inline void write_string(std::ofstream& out, const std::string& s) {
    write_pod(out, static_cast<std::uint64_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::ifstream& in) {
    std::uint64_t len = 0;
    read_pod(in, len);
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    if (!in) throw IoError("checkpoint truncated");
    return s;
}

inline void write_matrix(std::ofstream& out, const Mat& m) {
    write_pod(out, static_cast<std::int64_t>(m.rows()));
    write_pod(out, static_cast<std::int64_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
}

inline Mat read_matrix(std::ifstream& in) {
    std::int64_t rows = 0, cols = 0;
    read_pod(in, rows);
    read_pod(in, cols);
    Mat m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw IoError("checkpoint truncated");
    return m;
}

} // namespace ckpt_detail

inline void save_checkpoint(const ModelState& st, const RngStream& rng,
                            const std::filesystem::path& path) {
    using namespace ckpt_detail;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string());
    write_pod(out, kMagic);
    write_pod(out, kVersion);

    write_pod(out, static_cast<std::uint64_t>(st.cfg.view_dims.size()));
    for (auto d : st.cfg.view_dims) write_pod(out, static_cast<std::int64_t>(d));
    write_pod(out, static_cast<std::int64_t>(st.cfg.n));
    write_pod(out, static_cast<std::int32_t>(st.cfg.k));
    write_pod(out, static_cast<std::int64_t>(st.cfg.d));
    write_pod(out, static_cast<std::int64_t>(st.cfg.hidden));

    write_pod(out, static_cast<std::uint64_t>(st.params.size()));
    for (const auto& [name, p] : st.params) {
        write_string(out, name);
        write_matrix(out, p.value);
        write_matrix(out, p.grad);
        write_matrix(out, p.adam_m);
        write_matrix(out, p.adam_v);
        write_pod(out, p.step_count);
    }

    write_pod(out, rng.seed());
    write_pod(out, rng.stream_id());
    write_pod(out, rng.counter());
    if (!out) throw IoError("checkpoint write failed");
}

inline std::pair<ModelState, RngStream> load_checkpoint(const std::filesystem::path& path) {
    using namespace ckpt_detail;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFile("cannot open " + path.string());
    std::uint32_t magic = 0, version = 0;
    read_pod(in, magic);
    read_pod(in, version);
    if (magic != kMagic) throw IoError("not a checkpoint file");
    if (version != kVersion) throw IoError("unsupported checkpoint version");

    ModelState st;
    std::uint64_t v_count = 0;
    read_pod(in, v_count);
    for (std::uint64_t v = 0; v < v_count; ++v) {
        std::int64_t d = 0;
        read_pod(in, d);
        st.cfg.view_dims.push_back(d);
    }
    std::int64_t n = 0, d = 0, hidden = 0;
    std::int32_t k = 0;
    read_pod(in, n);
    read_pod(in, k);
    read_pod(in, d);
    read_pod(in, hidden);
    st.cfg.n = n;
    st.cfg.k = k;
    st.cfg.d = d;
    st.cfg.hidden = hidden;

    std::uint64_t p_count = 0;
    read_pod(in, p_count);
    for (std::uint64_t i = 0; i < p_count; ++i) {
        const std::string name = read_string(in);
        Param p;
        p.value = read_matrix(in);
        p.grad = read_matrix(in);
        p.adam_m = read_matrix(in);
        p.adam_v = read_matrix(in);
        read_pod(in, p.step_count);
        st.params.emplace(name, std::move(p));
    }

    std::uint64_t seed = 0, stream_id = 0, counter = 0;
    read_pod(in, seed);
    read_pod(in, stream_id);
    read_pod(in, counter);
    return {std::move(st), RngStream(seed, stream_id, counter)};
}

} // namespace e2lmvsc
