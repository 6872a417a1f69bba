#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "e2lmvsc/errors.hpp"

namespace e2lmvsc {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline void require_symmetric(const Mat& a, double tol = 1e-10) {
    if (a.rows() != a.cols()) throw ShapeMismatch("matrix is not square");
    const double dev = (a - a.transpose()).cwiseAbs().maxCoeff();
    if (dev > tol) throw AsymmetricInput("symmetry deviation " + std::to_string(dev));
}

// ln det(A) for symmetric positive-definite A, via Cholesky.
inline double cholesky_logdet(const Mat& a) {
    require_symmetric(a);
    Eigen::LLT<Mat> llt(a);
    if (llt.info() != Eigen::Success) throw NotPositiveDefinite("Cholesky factorization failed");
    double ld = 0.0;
    const auto& l = llt.matrixLLT();
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        if (l(i, i) <= 0.0) throw NotPositiveDefinite("nonpositive pivot");
        ld += std::log(l(i, i));
    }
    return 2.0 * ld;
}

// k algebraically smallest eigenpairs of a symmetric matrix.
inline std::pair<std::vector<double>, Mat> sym_eig_smallest(const Mat& a, Eigen::Index k) {
    require_symmetric(a);
    if (k < 1 || k > a.rows()) throw ShapeMismatch("k out of range");
    Eigen::SelfAdjointEigenSolver<Mat> es(a);
    if (es.info() != Eigen::Success) throw NoConvergence("eigensolver did not converge");
    std::vector<double> vals(es.eigenvalues().data(), es.eigenvalues().data() + k);
    Mat vecs = es.eigenvectors().leftCols(k);
    return {std::move(vals), std::move(vecs)};
}

// Row-wise softmax with per-row max subtraction.
inline Mat softmax_rows(const Mat& m) {
    Mat out(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double mx = m.row(i).maxCoeff();
        Eigen::RowVectorXd e = (m.row(i).array() - mx).exp();
        out.row(i) = e / e.sum();
    }
    return out;
}

// KL( N(mu, diag e^{log_var}) || N(0, I) )
inline double kl_diag_gaussian_to_std(const Vec& mu, const Vec& log_var) {
    if (mu.size() != log_var.size()) throw ShapeMismatch("kl: length mismatch");
    double s = 0.0;
    for (Eigen::Index j = 0; j < mu.size(); ++j)
        s += mu[j] * mu[j] + std::exp(log_var[j]) - log_var[j] - 1.0;
    return 0.5 * s;
}

inline double diag_gaussian_logpdf(const Vec& x, const Vec& mu, const Vec& log_var) {
    if (x.size() != mu.size() || x.size() != log_var.size())
        throw ShapeMismatch("logpdf: length mismatch");
    static const double half_log_2pi = 0.5 * std::log(2.0 * M_PI);
    double s = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double d = x[j] - mu[j];
        s += -half_log_2pi - 0.5 * log_var[j] - d * d / (2.0 * std::exp(log_var[j]));
    }
    return s;
}

} // namespace e2lmvsc
