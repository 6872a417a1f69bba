#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "e2lmvsc/param.hpp"
#include "e2lmvsc/rng.hpp"

namespace e2lmvsc {

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    Eigen::Index row = 0;
    Eigen::Index col = 0;
};

struct GradReport {
    std::vector<GradCheckEntry> entries;
    double tol = 0.0;
    bool pass = true;

    double worst() const {
        double w = 0.0;
        for (const auto& e : entries) w = std::max(w, e.max_rel_err);
        return w;
    }
};

// loss(true) must zero grads, evaluate the loss, run backward and leave
// analytic gradients in the params; loss(false) only returns the value.
// Noise sources inside the loss must be frozen so both routes see the
// same function.
inline GradReport grad_check(const std::function<double(bool)>& loss, ParamMap& params,
                             RngStream& rng, double tol, int coords_per_tensor = 25,
                             double h = 1e-5, double atol = 1e-9) {
    GradReport report;
    report.tol = tol;

    const double base = loss(true);
    std::map<std::string, Mat> analytic;
    for (auto& [name, p] : params) analytic[name] = p.grad;

    // Central differences trade truncation (h^2) against roundoff
    // (eps*|L|/h); scale the step by cbrt(|L|) and the absolute guard by
    // the attainable FD precision at that step.
    const double h_eff = h * std::max(1.0, std::cbrt(std::abs(base)));
    const double eps_mach = 2.220446049250313e-16;
    const double atol_eff = std::max(atol, 64.0 * eps_mach * std::abs(base) / h_eff);

    for (auto& [name, p] : params) {
        GradCheckEntry entry;
        entry.name = name;
        const Eigen::Index total = p.value.size();
        const int probes = static_cast<int>(std::min<Eigen::Index>(total, coords_per_tensor));
        std::vector<Eigen::Index> coords;
        if (total <= coords_per_tensor) {
            for (Eigen::Index i = 0; i < total; ++i) coords.push_back(i);
        } else {
            for (int i = 0; i < probes; ++i)
                coords.push_back(static_cast<Eigen::Index>(rng.uniform_index(total)));
        }
        for (Eigen::Index flat : coords) {
            const Eigen::Index r = flat % p.value.rows();
            const Eigen::Index c = flat / p.value.rows();
            const double saved = p.value(r, c);
            p.value(r, c) = saved + h_eff;
            const double lp = loss(false);
            p.value(r, c) = saved - h_eff;
            const double lm = loss(false);
            p.value(r, c) = saved;
            const double fd = (lp - lm) / (2.0 * h_eff);
            const double an = analytic[name](r, c);
            // central differences in double precision carry ~1e-11 roundoff
            // noise; absolute agreement at that scale counts as a match
            if (std::abs(an - fd) <= atol_eff) continue;
            const double rel =
                std::abs(an - fd) / std::max({1e-8, std::abs(an), std::abs(fd)});
            if (rel > entry.max_rel_err) {
                entry.max_rel_err = rel;
                entry.row = r;
                entry.col = c;
            }
        }
        if (entry.max_rel_err > tol) report.pass = false;
        report.entries.push_back(entry);
    }

    // restore analytic gradients
    for (auto& [name, p] : params) p.grad = analytic[name];
    return report;
}

} // namespace e2lmvsc
