#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "e2lmvsc/errors.hpp"
#include "e2lmvsc/linalg.hpp"

namespace e2lmvsc::ad {

using e2lmvsc::Mat;

// Reverse-mode tape over dense matrices. Scalars are 1x1 matrices.
struct Node {
    Mat value;
    Mat grad; // empty until touched by backward()
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop; // scatter this->grad into parents

    void ensure_grad() {
        if (grad.size() == 0) grad = Mat::Zero(value.rows(), value.cols());
    }
};

class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> n) : n_(std::move(n)) {}

    static Var constant(Mat v) {
        auto n = std::make_shared<Node>();
        n->value = std::move(v);
        return Var(n);
    }

    static Var scalar(double v) { return constant(Mat::Constant(1, 1, v)); }

    // Trainable leaf; gradient retrievable after backward().
    static Var leaf(Mat v) {
        auto n = std::make_shared<Node>();
        n->value = std::move(v);
        n->requires_grad = true;
        return Var(n);
    }

    const Mat& value() const { return n_->value; }
    const Mat& grad() const { return n_->grad; }
    bool has_grad() const { return n_->grad.size() != 0; }
    double item() const { return n_->value(0, 0); }
    std::shared_ptr<Node> node() const { return n_; }
    bool valid() const { return n_ != nullptr; }

    // Backward pass from this (scalar) node.
    void backward() const {
        std::vector<Node*> order;
        std::unordered_set<Node*> seen;
        topo(n_.get(), seen, order);
        n_->ensure_grad();
        n_->grad.setConstant(1.0);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Node* nd = *it;
            if (nd->requires_grad && nd->backprop && nd->grad.size() != 0) nd->backprop(*nd);
        }
    }

private:
    static void topo(Node* n, std::unordered_set<Node*>& seen, std::vector<Node*>& order) {
        if (!n || seen.count(n)) return;
        seen.insert(n);
        for (auto& p : n->parents) topo(p.get(), seen, order);
        order.push_back(n);
    }

    std::shared_ptr<Node> n_;
};

namespace detail {

inline std::shared_ptr<Node> make(Mat value, std::vector<std::shared_ptr<Node>> parents,
                                  std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (auto& p : n->parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) n->backprop = std::move(backprop);
    return n;
}

inline void accumulate(Node& parent, const Mat& g) {
    if (!parent.requires_grad) return;
    parent.ensure_grad();
    parent.grad += g;
}

} // namespace detail

inline Var add(const Var& a, const Var& b) {
    if (a.value().rows() != b.value().rows() || a.value().cols() != b.value().cols())
        throw ShapeMismatch("add: shape mismatch");
    return Var(detail::make(a.value() + b.value(), {a.node(), b.node()}, [](Node& n) {
        detail::accumulate(*n.parents[0], n.grad);
        detail::accumulate(*n.parents[1], n.grad);
    }));
}

inline Var sub(const Var& a, const Var& b) {
    if (a.value().rows() != b.value().rows() || a.value().cols() != b.value().cols())
        throw ShapeMismatch("sub: shape mismatch");
    return Var(detail::make(a.value() - b.value(), {a.node(), b.node()}, [](Node& n) {
        detail::accumulate(*n.parents[0], n.grad);
        detail::accumulate(*n.parents[1], -n.grad);
    }));
}

inline Var scale(const Var& a, double s) {
    return Var(detail::make(a.value() * s, {a.node()},
                            [s](Node& n) { detail::accumulate(*n.parents[0], n.grad * s); }));
}

inline Var add_scalar(const Var& a, double s) {
    return Var(detail::make(a.value().array() + s, {a.node()},
                            [](Node& n) { detail::accumulate(*n.parents[0], n.grad); }));
}

inline Var cwise_mul(const Var& a, const Var& b) {
    if (a.value().rows() != b.value().rows() || a.value().cols() != b.value().cols())
        throw ShapeMismatch("cwise_mul: shape mismatch");
    return Var(detail::make(a.value().cwiseProduct(b.value()), {a.node(), b.node()}, [](Node& n) {
        detail::accumulate(*n.parents[0], n.grad.cwiseProduct(n.parents[1]->value));
        detail::accumulate(*n.parents[1], n.grad.cwiseProduct(n.parents[0]->value));
    }));
}

inline Var matmul(const Var& a, const Var& b) {
    if (a.value().cols() != b.value().rows()) throw ShapeMismatch("matmul: inner dims differ");
    return Var(detail::make(a.value() * b.value(), {a.node(), b.node()}, [](Node& n) {
        detail::accumulate(*n.parents[0], n.grad * n.parents[1]->value.transpose());
        detail::accumulate(*n.parents[1], n.parents[0]->value.transpose() * n.grad);
    }));
}

inline Var transpose(const Var& a) {
    return Var(detail::make(a.value().transpose(), {a.node()}, [](Node& n) {
        detail::accumulate(*n.parents[0], n.grad.transpose());
    }));
}

inline Var sigmoid(const Var& a) {
    Mat y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
    return Var(detail::make(std::move(y), {a.node()}, [](Node& n) {
        Mat d = n.value.array() * (1.0 - n.value.array());
        detail::accumulate(*n.parents[0], n.grad.cwiseProduct(d));
    }));
}

inline Var exp(const Var& a) {
    Mat y = a.value().array().exp();
    return Var(detail::make(std::move(y), {a.node()}, [](Node& n) {
        detail::accumulate(*n.parents[0], n.grad.cwiseProduct(n.value));
    }));
}

// Hard clamp; gradient passes through strictly inside the interval.
inline Var clamp(const Var& a, double lo, double hi) {
    Mat y = a.value().cwiseMax(lo).cwiseMin(hi);
    return Var(detail::make(std::move(y), {a.node()}, [lo, hi](Node& n) {
        const Mat& x = n.parents[0]->value;
        Mat g = n.grad;
        for (Eigen::Index j = 0; j < x.cols(); ++j)
            for (Eigen::Index i = 0; i < x.rows(); ++i)
                if (x(i, j) <= lo || x(i, j) >= hi) g(i, j) = 0.0;
        detail::accumulate(*n.parents[0], g);
    }));
}

inline Var softplus(const Var& a) {
    Mat y(a.value().rows(), a.value().cols());
    for (Eigen::Index j = 0; j < y.cols(); ++j)
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
            const double x = a.value()(i, j);
            y(i, j) = x > 30.0 ? x : std::log1p(std::exp(x));
        }
    return Var(detail::make(std::move(y), {a.node()}, [](Node& n) {
        Mat d = 1.0 / (1.0 + (-n.parents[0]->value.array()).exp());
        detail::accumulate(*n.parents[0], n.grad.cwiseProduct(d));
    }));
}

inline Var sum(const Var& a) {
    return Var(detail::make(Mat::Constant(1, 1, a.value().sum()), {a.node()}, [](Node& n) {
        const double g = n.grad(0, 0);
        detail::accumulate(*n.parents[0],
                           Mat::Constant(n.parents[0]->value.rows(), n.parents[0]->value.cols(), g));
    }));
}

inline Var sum_sq(const Var& a) {
    return Var(detail::make(Mat::Constant(1, 1, a.value().squaredNorm()), {a.node()}, [](Node& n) {
        detail::accumulate(*n.parents[0], 2.0 * n.grad(0, 0) * n.parents[0]->value);
    }));
}

// Softmax over each column (entries of a column sum to 1).
inline Var softmax_cols(const Var& a) {
    Mat y(a.value().rows(), a.value().cols());
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
        const double mx = a.value().col(j).maxCoeff();
        Eigen::VectorXd e = (a.value().col(j).array() - mx).exp();
        y.col(j) = e / e.sum();
    }
    return Var(detail::make(std::move(y), {a.node()}, [](Node& n) {
        Mat gx(n.value.rows(), n.value.cols());
        for (Eigen::Index j = 0; j < n.value.cols(); ++j) {
            const double dot = n.value.col(j).dot(n.grad.col(j));
            gx.col(j) = n.value.col(j).cwiseProduct(n.grad.col(j) -
                                                    Eigen::VectorXd::Constant(n.value.rows(), dot));
        }
        detail::accumulate(*n.parents[0], gx);
    }));
}

inline Var concat_rows(const std::vector<Var>& parts) {
    Eigen::Index rows = 0;
    const Eigen::Index cols = parts.front().value().cols();
    std::vector<std::shared_ptr<Node>> parents;
    for (const auto& p : parts) {
        if (p.value().cols() != cols) throw ShapeMismatch("concat_rows: column mismatch");
        rows += p.value().rows();
        parents.push_back(p.node());
    }
    Mat v(rows, cols);
    Eigen::Index r = 0;
    for (const auto& p : parts) {
        v.middleRows(r, p.value().rows()) = p.value();
        r += p.value().rows();
    }
    return Var(detail::make(std::move(v), std::move(parents), [](Node& n) {
        Eigen::Index r = 0;
        for (auto& p : n.parents) {
            detail::accumulate(*p, n.grad.middleRows(r, p->value.rows()));
            r += p->value.rows();
        }
    }));
}

inline Var select_cols(const Var& a, std::vector<Eigen::Index> idx) {
    Mat v(a.value().rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) v.col(j) = a.value().col(idx[j]);
    return Var(detail::make(std::move(v), {a.node()}, [idx = std::move(idx)](Node& n) {
        Mat g = Mat::Zero(n.parents[0]->value.rows(), n.parents[0]->value.cols());
        for (std::size_t j = 0; j < idx.size(); ++j) g.col(idx[j]) += n.grad.col(j);
        detail::accumulate(*n.parents[0], g);
    }));
}

// X + b * ones(1, n)  with b a column vector.
inline Var add_colvec(const Var& x, const Var& b) {
    if (b.value().cols() != 1 || b.value().rows() != x.value().rows())
        throw ShapeMismatch("add_colvec: bias shape");
    Mat v = x.value().colwise() + Eigen::VectorXd(b.value().col(0));
    return Var(detail::make(std::move(v), {x.node(), b.node()}, [](Node& n) {
        detail::accumulate(*n.parents[0], n.grad);
        detail::accumulate(*n.parents[1], n.grad.rowwise().sum());
    }));
}

// ln det(A) for SPD A; input symmetrized before factorization.
inline Var logdet_spd(const Var& a) {
    Mat s = 0.5 * (a.value() + a.value().transpose());
    Eigen::LLT<Mat> llt(s);
    if (llt.info() != Eigen::Success) throw NotPositiveDefinite("logdet_spd: factorization failed");
    double ld = 0.0;
    for (Eigen::Index i = 0; i < s.rows(); ++i) ld += std::log(llt.matrixLLT()(i, i));
    Mat inv = llt.solve(Mat::Identity(s.rows(), s.cols()));
    return Var(detail::make(Mat::Constant(1, 1, 2.0 * ld), {a.node()}, [inv](Node& n) {
        detail::accumulate(*n.parents[0], n.grad(0, 0) * inv);
    }));
}

inline Var mean_of(const std::vector<Var>& parts) {
    Var acc = parts.front();
    for (std::size_t i = 1; i < parts.size(); ++i) acc = add(acc, parts[i]);
    return scale(acc, 1.0 / static_cast<double>(parts.size()));
}

} // namespace e2lmvsc::ad
