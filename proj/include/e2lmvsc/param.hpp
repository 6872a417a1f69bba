#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "e2lmvsc/errors.hpp"
#include "e2lmvsc/linalg.hpp"

namespace e2lmvsc {

struct Param {
    Mat value;
    Mat grad;
    Mat adam_m;
    Mat adam_v;
    std::uint64_t step_count = 0;

    Param() = default;
    explicit Param(Mat v)
        : value(std::move(v)),
          grad(Mat::Zero(value.rows(), value.cols())),
          adam_m(Mat::Zero(value.rows(), value.cols())),
          adam_v(Mat::Zero(value.rows(), value.cols())) {}

    void zero_grad() { grad.setZero(); }
};

// Ordered by name so that iteration (and thus training) is deterministic.
using ParamMap = std::map<std::string, Param>;

inline void adam_step(Param& p, double lr, double beta1 = 0.9, double beta2 = 0.999,
                      double eps = 1e-8) {
    if (!p.grad.allFinite()) throw NonFiniteGradient("adam_step: non-finite gradient");
    p.step_count += 1;
    p.adam_m = beta1 * p.adam_m + (1.0 - beta1) * p.grad;
    p.adam_v = beta2 * p.adam_v + (1.0 - beta2) * p.grad.cwiseProduct(p.grad);
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(p.step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(p.step_count));
    Mat mhat = p.adam_m / bc1;
    Mat vhat = p.adam_v / bc2;
    p.value.array() -= lr * mhat.array() / (vhat.array().sqrt() + eps);
    p.zero_grad();
}

} // namespace e2lmvsc
