// embedding.hpp
//
// Explicit finite-dimensional kernel embeddings x -> P * K(x), where
// K(x) = [K(x, s_1), ..., K(x, s_m)] over a landmark subsample s_1..s_m
// of the training data.
//
//   Nystrom: P = Lambda^{-1/2} V^T from the top-d eigenpairs of K_II,
//            so <phi(x), phi(y)> = K(x)^T V Lambda^{-1} V^T K(y).
//   KJL:     P = Z K_II with Z a d x m standard Gaussian matrix.

#ifndef OCKJL_EMBEDDING_HPP
#define OCKJL_EMBEDDING_HPP

#include "ockjl/common.hpp"
#include "ockjl/kernel.hpp"
#include "ockjl/model_format.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <random>

namespace ockjl {

enum class EmbeddingKind : std::uint8_t { NYSTROM = 0, KJL = 1 };

struct EmbeddingModel {
    EmbeddingKind kind = EmbeddingKind::KJL;
    Matrix landmarks; // m x D
    Matrix P;         // d x m
    double h = 1.0;

    Index m() const { return landmarks.rows(); }
    Index d() const { return P.rows(); }
    Index input_dim() const { return landmarks.cols(); }

    bool operator==(const EmbeddingModel &o) const {
        return kind == o.kind && h == o.h && landmarks.rows() == o.landmarks.rows() &&
               landmarks.cols() == o.landmarks.cols() && P.rows() == o.P.rows() && P.cols() == o.P.cols() &&
               landmarks == o.landmarks && P == o.P;
    }
};

/// Eigenvalues below this fraction of the largest are treated as zero.
inline constexpr double nystrom_rank_cutoff = 1e-12;

namespace detail {

inline void check_embedding_args(const Matrix &X, Index m, Index d, double h) {
    require(m >= 1 && d >= 1, "embedding: m and d must be positive");
    require(m <= X.rows(), "embedding: m exceeds training size");
    require(d <= m, "embedding: d exceeds m");
    check_bandwidth(h);
}

inline Matrix draw_landmarks(const Matrix &X, Index m, std::uint64_t seed) {
    auto rng = make_rng(derive_seed(seed, 1));
    auto rows = sample_without_replacement(X.rows(), m, rng);
    return select_rows(X, rows);
}

} // namespace detail

inline EmbeddingModel fit_nystrom(const Matrix &X, Index m, Index d, double h, std::uint64_t seed) {
    detail::check_embedding_args(X, m, d, h);
    EmbeddingModel model{EmbeddingKind::NYSTROM, detail::draw_landmarks(X, m, seed), Matrix{}, h};
    const Matrix Kii = gram(model.landmarks, model.landmarks, h);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Eigen::MatrixXd{Kii});
    if (eig.info() != Eigen::Success) {
        throw DegenerateData{"fit_nystrom: eigendecomposition failed"};
    }
    // eigenvalues come back ascending; walk from the top
    const auto &values = eig.eigenvalues();
    const auto &vectors = eig.eigenvectors();
    const double top = values(m - 1);
    model.P = Matrix::Zero(d, m);
    for (Index r = 0; r < d; ++r) {
        const Index c = m - 1 - r;
        const double lambda = values(c);
        if (!(lambda >= nystrom_rank_cutoff * top) || lambda <= 0.0) {
            continue;
        }
        Vector v = vectors.col(c);
        // sign convention: largest-magnitude entry positive
        Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) {
            v = -v;
        }
        model.P.row(r) = v.transpose() / std::sqrt(lambda);
    }
    return model;
}

inline EmbeddingModel fit_kjl(const Matrix &X, Index m, Index d, double h, std::uint64_t seed) {
    detail::check_embedding_args(X, m, d, h);
    EmbeddingModel model{EmbeddingKind::KJL, detail::draw_landmarks(X, m, seed), Matrix{}, h};
    const Matrix Kii = gram(model.landmarks, model.landmarks, h);
    auto rng = make_rng(derive_seed(seed, 2));
    std::normal_distribution<double> normal{0.0, 1.0};
    Matrix Z(d, m);
    for (Index r = 0; r < d; ++r) {
        for (Index c = 0; c < m; ++c) {
            Z(r, c) = normal(rng);
        }
    }
    model.P = Z * Kii;
    return model;
}

inline EmbeddingModel fit_embedding(EmbeddingKind kind, const Matrix &X, Index m, Index d, double h,
                                    std::uint64_t seed) {
    return kind == EmbeddingKind::NYSTROM ? fit_nystrom(X, m, d, h, seed) : fit_kjl(X, m, d, h, seed);
}

/// Row i of the result is P * K(X_i).
inline Matrix embed(const EmbeddingModel &model, const Matrix &X) {
    require(X.cols() == model.input_dim(), "embed: input dimension does not match landmarks");
    const Matrix K = gram(X, model.landmarks, model.h);
    return K * model.P.transpose();
}

/// Bytes the embedding occupies in a detector file, header included.
inline std::size_t embedding_bytes(const EmbeddingModel &model) {
    const auto m = static_cast<std::size_t>(model.m());
    const auto d = static_cast<std::size_t>(model.d());
    const auto D = static_cast<std::size_t>(model.input_dim());
    return format::detector_header_bytes + 8 * (m * (d + D) + 1);
}

} // namespace ockjl

#endif // OCKJL_EMBEDDING_HPP
