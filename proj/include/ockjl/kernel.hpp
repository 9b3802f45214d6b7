// kernel.hpp
//
// Gaussian kernel K(x, y) = exp(-|x - y|^2 / h^2), gram matrices and
// bandwidth selection from quantiles of interpoint distances.

#ifndef OCKJL_KERNEL_HPP
#define OCKJL_KERNEL_HPP

#include "ockjl/common.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace ockjl {

struct KernelConfig {
    double h = 1.0;
};

namespace detail {

/// Left-to-right sum of squared coordinate differences.
inline double squared_distance(const double *x, const double *y, Index dim) {
    double s = 0.0;
    for (Index k = 0; k < dim; ++k) {
        const double t = x[k] - y[k];
        s += t * t;
    }
    return s;
}

inline void check_bandwidth(double h) {
    require(h > 0.0 && std::isfinite(h), "kernel bandwidth must be positive and finite");
}

} // namespace detail

template <typename A, typename B>
double gaussian_kernel(const Eigen::MatrixBase<A> &x, const Eigen::MatrixBase<B> &y, double h) {
    require(x.size() == y.size(), "gaussian_kernel: dimension mismatch");
    detail::check_bandwidth(h);
    double s = 0.0;
    for (Index k = 0; k < x.size(); ++k) {
        const double t = x(k) - y(k);
        s += t * t;
    }
    return std::exp(-s / (h * h));
}

/// Fills out[j] = K(x, Y_j) for a single query point.
inline void kernel_row(const double *x, const Matrix &Y, double h, double *out) {
    const Index dim = Y.cols();
    const double h2 = h * h;
    for (Index j = 0; j < Y.rows(); ++j) {
        out[j] = std::exp(-detail::squared_distance(x, Y.row(j).data(), dim) / h2);
    }
}

/// G(i, j) = K(X_i, Y_j).
inline Matrix gram(const Matrix &X, const Matrix &Y, double h) {
    require(X.cols() == Y.cols(), "gram: dimension mismatch");
    detail::check_bandwidth(h);
    Matrix G(X.rows(), Y.rows());
    for (Index i = 0; i < X.rows(); ++i) {
        kernel_row(X.row(i).data(), Y, h, G.row(i).data());
    }
    return G;
}

/// All n(n-1)/2 Euclidean interpoint distances, ascending.
inline std::vector<double> pairwise_distances(const Matrix &X) {
    const Index n = X.rows();
    require(n >= 2, "pairwise_distances: need at least two points");
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            d.push_back(std::sqrt(detail::squared_distance(X.row(i).data(), X.row(j).data(), X.cols())));
        }
    }
    std::sort(d.begin(), d.end());
    return d;
}

/// Bandwidths for several quantile levels sharing one distance sort.
/// A zero quantile falls back to the smallest positive distance.
inline std::vector<double> quantile_bandwidths(const Matrix &X, std::span<const double> levels) {
    const auto d = pairwise_distances(X);
    auto positive = std::upper_bound(d.begin(), d.end(), 0.0);
    if (positive == d.end()) {
        throw DegenerateData{"quantile_bandwidth: all points are identical"};
    }
    std::vector<double> out;
    out.reserve(levels.size());
    for (double q : levels) {
        double h = nearest_rank_sorted(d, q);
        out.push_back(h > 0.0 ? h : *positive);
    }
    return out;
}

inline double quantile_bandwidth(const Matrix &X, double q) {
    return quantile_bandwidths(X, std::span<const double>{&q, 1}).front();
}

} // namespace ockjl

#endif // OCKJL_KERNEL_HPP
