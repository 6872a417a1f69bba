#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Core>

namespace e2lmvsc {

// Counter-based generator: the output at a given (seed, stream_id, counter)
// never depends on call history, so streams can be split, checkpointed and
// replayed byte-for-byte.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id = 0, std::uint64_t counter = 0)
        : seed_(seed), stream_id_(stream_id), counter_(counter) {
        key_ = mix(mix(seed_) ^ mix(stream_id_ * 0x9E3779B97F4A7C15ULL + 1));
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }
    std::uint64_t counter() const { return counter_; }
    void set_counter(std::uint64_t c) { counter_ = c; }

    // Independent sub-stream; child counters start at zero.
    RngStream derive(std::uint64_t child_id) const {
        return RngStream(seed_, mix(stream_id_ + 1) ^ mix(child_id + 0x1234567), 0);
    }

    std::uint64_t next_u64() { return mix(key_ + counter_++); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in (0, 1]
    double uniform_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller, one pair of draws per sample (no cached spare, so the
    // counter alone captures the full generator state).
    double normal() {
        const double u1 = uniform_pos();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

    Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal();
        return m;
    }

    Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi) {
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = uniform(lo, hi);
        return m;
    }

private:
    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t counter_;
    std::uint64_t key_;
};

} // namespace e2lmvsc
