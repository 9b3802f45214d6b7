// gmm.hpp
//
// Full-covariance Gaussian mixtures: log-density scoring and EM fitting.

#ifndef OCKJL_GMM_HPP
#define OCKJL_GMM_HPP

#include "ockjl/common.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

namespace ockjl {

/// Mixture parameters. Construction validates them and caches the
/// inverse Cholesky factors used for scoring; the cache is derived state
/// and never serialized.
class GmmModel {
public:
    GmmModel() = default;

    GmmModel(Vector pi, Matrix mu, std::vector<Matrix> sigma)
        : pi_{std::move(pi)}, mu_{std::move(mu)}, sigma_{std::move(sigma)} {
        require(pi_.size() >= 1, "gmm: need at least one component");
        require(mu_.rows() == pi_.size() && static_cast<Index>(sigma_.size()) == pi_.size(),
                "gmm: component counts disagree");
        const Index dim = mu_.cols();
        chol_inv_.reserve(sigma_.size());
        log_norm_.resize(pi_.size());
        for (Index l = 0; l < k(); ++l) {
            const auto &S = sigma_[static_cast<std::size_t>(l)];
            require(S.rows() == dim && S.cols() == dim, "gmm: covariance shape mismatch");
            Eigen::LLT<Eigen::MatrixXd> llt(Eigen::MatrixXd{S});
            if (llt.info() != Eigen::Success) {
                throw DegenerateData{"gmm: covariance " + std::to_string(l) + " is not positive definite"};
            }
            Eigen::MatrixXd L = llt.matrixL();
            double log_det = 0.0;
            for (Index i = 0; i < dim; ++i) {
                log_det += 2.0 * std::log(L(i, i));
            }
            Matrix Linv = L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(dim, dim));
            chol_inv_.push_back(std::move(Linv));
            const double log_pi = pi_(l) > 0.0 ? std::log(pi_(l)) : -std::numeric_limits<double>::infinity();
            log_norm_(l) = log_pi - 0.5 * (static_cast<double>(dim) * std::log(2.0 * std::numbers::pi) + log_det);
        }
    }

    Index k() const { return pi_.size(); }
    Index dim() const { return mu_.cols(); }
    const Vector &pi() const { return pi_; }
    const Matrix &mu() const { return mu_; }
    const std::vector<Matrix> &sigma() const { return sigma_; }

    /// n x k matrix of log(pi_l) + log N(x_i; mu_l, Sigma_l).
    Matrix component_log_terms(const Matrix &X) const {
        require(X.cols() == dim(), "gmm: input dimension mismatch");
        Matrix terms(X.rows(), k());
        for (Index l = 0; l < k(); ++l) {
            const Matrix centered = X.rowwise() - mu_.row(l);
            const Matrix whitened = centered * chol_inv_[static_cast<std::size_t>(l)].transpose();
            terms.col(l) = (log_norm_(l) - 0.5 * whitened.rowwise().squaredNorm().array()).matrix();
        }
        return terms;
    }

    bool operator==(const GmmModel &o) const {
        if (k() != o.k() || dim() != o.dim() || pi_ != o.pi_ || mu_ != o.mu_) {
            return false;
        }
        for (std::size_t l = 0; l < sigma_.size(); ++l) {
            if (sigma_[l] != o.sigma_[l]) {
                return false;
            }
        }
        return true;
    }

private:
    Vector pi_;
    Matrix mu_;
    std::vector<Matrix> sigma_;
    std::vector<Matrix> chol_inv_;
    Vector log_norm_;
};

namespace detail {

inline double log_sum_exp(const double *values, Index count) {
    double top = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < count; ++i) {
        top = std::max(top, values[i]);
    }
    if (!std::isfinite(top)) {
        return top;
    }
    double s = 0.0;
    for (Index i = 0; i < count; ++i) {
        s += std::exp(values[i] - top);
    }
    return top + std::log(s);
}

} // namespace detail

/// log sum_l pi_l N(x_i; mu_l, Sigma_l) for every row of X.
inline Vector log_pdf(const GmmModel &model, const Matrix &X) {
    if (!X.allFinite()) {
        throw InvalidArgument{"gmm log_pdf: non-finite input"};
    }
    const Matrix terms = model.component_log_terms(X);
    Vector out(X.rows());
    for (Index i = 0; i < X.rows(); ++i) {
        out(i) = detail::log_sum_exp(terms.row(i).data(), terms.cols());
    }
    return out;
}

template <typename Derived>
double log_pdf(const GmmModel &model, const Eigen::MatrixBase<Derived> &z) {
    Matrix row(1, z.size());
    for (Index j = 0; j < z.size(); ++j) {
        row(0, j) = z(j);
    }
    return log_pdf(model, row)(0);
}

struct EStep {
    Matrix responsibilities; // n x k, rows sum to one
    double mean_log_likelihood = 0.0;
    Vector point_log_likelihood;
};

inline EStep e_step(const GmmModel &model, const Matrix &X) {
    EStep out;
    out.responsibilities = model.component_log_terms(X);
    out.point_log_likelihood.resize(X.rows());
    for (Index i = 0; i < X.rows(); ++i) {
        auto row = out.responsibilities.row(i);
        const double lse = detail::log_sum_exp(row.data(), row.size());
        out.point_log_likelihood(i) = lse;
        for (Index l = 0; l < row.size(); ++l) {
            row(l) = std::exp(row(l) - lse);
        }
    }
    out.mean_log_likelihood = out.point_log_likelihood.mean();
    return out;
}

/// Population covariance of the rows of X.
inline Matrix covariance(const Matrix &X) {
    const Eigen::RowVectorXd mean = X.colwise().mean();
    const Matrix centered = X.rowwise() - mean;
    return (centered.transpose() * centered) / static_cast<double>(X.rows());
}

/// Default covariance ridge: 1e-6 times the mean per-coordinate variance.
inline double default_covariance_ridge(const Matrix &X) {
    const double mean_var = covariance(X).diagonal().mean();
    return mean_var > 0.0 ? 1e-6 * mean_var : 1e-6;
}

struct MStep {
    GmmModel model;
    std::vector<Index> reinitialized; // components that lost all mass
};

/// Weighted moments. A component whose total responsibility falls under
/// 1e-10 * n is restarted at `fallback_point` (when given) with the
/// global covariance.
inline MStep m_step(const Matrix &X, const Matrix &resp, double reg, std::optional<Index> fallback_point = {}) {
    const Index n = X.rows();
    const Index dim = X.cols();
    const Index k = resp.cols();
    require(resp.rows() == n, "m_step: responsibility rows must match data");
    require(reg >= 0.0, "m_step: negative ridge");
    const Vector mass = resp.colwise().sum().transpose();

    Vector pi(k);
    Matrix mu(k, dim);
    std::vector<Matrix> sigma;
    sigma.reserve(static_cast<std::size_t>(k));
    std::vector<Index> restarted;
    const Matrix ridge = reg * Matrix::Identity(dim, dim);

    for (Index l = 0; l < k; ++l) {
        if (mass(l) < 1e-10 * static_cast<double>(n)) {
            if (!fallback_point) {
                throw DegenerateData{"m_step: component " + std::to_string(l) + " has no responsibility"};
            }
            restarted.push_back(l);
            pi(l) = 1.0 / static_cast<double>(n);
            mu.row(l) = X.row(*fallback_point);
            sigma.push_back(covariance(X) + ridge);
            continue;
        }
        pi(l) = mass(l) / static_cast<double>(n);
        const Eigen::RowVectorXd mean = (resp.col(l).transpose() * X) / mass(l);
        mu.row(l) = mean;
        const Matrix centered = X.rowwise() - mean;
        const Matrix weighted = centered.array().colwise() * resp.col(l).array();
        sigma.push_back((weighted.transpose() * centered) / mass(l) + ridge);
    }
    pi /= pi.sum();
    return {GmmModel{std::move(pi), std::move(mu), std::move(sigma)}, std::move(restarted)};
}

/// k-means++ seeding: indices of k rows of X.
inline std::vector<Index> kmeanspp_seeds(const Matrix &X, Index k, Rng &rng) {
    const Index n = X.rows();
    std::vector<Index> seeds;
    std::uniform_int_distribution<Index> uniform{0, n - 1};
    seeds.push_back(uniform(rng));
    Vector nearest = (X.rowwise() - X.row(seeds.back())).rowwise().squaredNorm();
    while (static_cast<Index>(seeds.size()) < k) {
        const double total = nearest.sum();
        Index pick = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u{0.0, total};
            double target = u(rng);
            pick = n - 1;
            double acc = 0.0;
            for (Index i = 0; i < n; ++i) {
                acc += nearest(i);
                if (acc >= target && nearest(i) > 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = uniform(rng);
        }
        seeds.push_back(pick);
        const Vector d2 = (X.rowwise() - X.row(pick)).rowwise().squaredNorm();
        nearest = nearest.cwiseMin(d2);
    }
    return seeds;
}

struct EmOptions {
    double tol = 1e-4;
    int max_iter = 200;
    std::uint64_t seed = 0;
    std::optional<double> reg; // default_covariance_ridge(X) when absent
};

struct EmDiagnostics {
    int iterations = 0;
    bool converged = false;
    std::vector<double> log_likelihood; // mean log-likelihood after each E-step
    std::vector<Index> reinitialized;
};

/// EM from `init` when given, otherwise from a hard k-means++ partition.
/// Stops when the mean log-likelihood changes by less than tol.
inline GmmModel fit_em(const Matrix &X, Index k, const std::optional<GmmModel> &init = {},
                       const EmOptions &options = {}, EmDiagnostics *diagnostics = nullptr) {
    const Index n = X.rows();
    require(k >= 1, "fit_em: k must be positive");
    require(k <= n, "fit_em: k exceeds the number of points");
    require(X.allFinite(), "fit_em: non-finite data");
    const double reg = options.reg.value_or(default_covariance_ridge(X));
    EmDiagnostics diag;

    GmmModel model;
    if (init) {
        require(init->k() == k && init->dim() == X.cols(), "fit_em: init shape mismatch");
        model = *init;
    } else {
        auto rng = make_rng(options.seed);
        const auto seeds = kmeanspp_seeds(X, k, rng);
        Matrix hard = Matrix::Zero(n, k);
        for (Index i = 0; i < n; ++i) {
            Index best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (Index l = 0; l < k; ++l) {
                const double d = (X.row(i) - X.row(seeds[static_cast<std::size_t>(l)])).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = l;
                }
            }
            hard(i, best) = 1.0;
        }
        for (Index l = 0; l < k; ++l) {
            // a seed always owns itself unless it duplicates an earlier seed
            if (hard.col(l).sum() == 0.0) {
                hard.row(seeds[static_cast<std::size_t>(l)]).setZero();
                hard(seeds[static_cast<std::size_t>(l)], l) = 1.0;
            }
        }
        model = m_step(X, hard, reg, Index{0}).model;
    }

    for (int it = 0; it < options.max_iter; ++it) {
        EStep e = e_step(model, X);
        diag.log_likelihood.push_back(e.mean_log_likelihood);
        const auto t = diag.log_likelihood.size();
        if (t >= 2 && std::abs(diag.log_likelihood[t - 1] - diag.log_likelihood[t - 2]) < options.tol) {
            diag.converged = true;
            break;
        }
        Index worst = 0;
        e.point_log_likelihood.minCoeff(&worst);
        auto step = m_step(X, e.responsibilities, reg, worst);
        diag.reinitialized.insert(diag.reinitialized.end(), step.reinitialized.begin(), step.reinitialized.end());
        model = std::move(step.model);
        ++diag.iterations;
    }
    if (diagnostics) {
        *diagnostics = std::move(diag);
    }
    return model;
}

/// Bytes of mixture parameters in a model file: pi, mu and sigma.
inline std::size_t gmm_bytes(const GmmModel &model) {
    const auto k = static_cast<std::size_t>(model.k());
    const auto d = static_cast<std::size_t>(model.dim());
    return 8 * k * (1 + d + d * d);
}

} // namespace ockjl

#endif // OCKJL_GMM_HPP
