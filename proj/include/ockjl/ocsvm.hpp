// ocsvm.hpp
//
// Gaussian-kernel one-class SVM (nu formulation), trained by SMO on the
// dual
//
//   min 1/2 a^T Q a   s.t.  0 <= a_i <= 1/(nu n),  sum a_i = 1,
//
// with Q the gram matrix. The decision function is f(x) = sum a_i K(x_i, x)
// and points with f(x) < rho are flagged.

#ifndef OCKJL_OCSVM_HPP
#define OCKJL_OCSVM_HPP

#include "ockjl/common.hpp"
#include "ockjl/kernel.hpp"
#include "ockjl/model_format.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <list>
#include <vector>

namespace ockjl {

struct OcsvmModel {
    Matrix support_vectors; // n_sv x D
    Vector alpha;
    double rho = 0.0;
    double h = 1.0;
    double nu = 0.5; // training parameter, not persisted

    Index n_sv() const { return support_vectors.rows(); }
    Index input_dim() const { return support_vectors.cols(); }
};

struct OcsvmOptions {
    double nu = 0.5;
    double tol = 1e-3;
    std::int64_t max_iter = 10'000'000;
    std::size_t cache_bytes = std::size_t{256} << 20;
};

struct OcsvmDiagnostics {
    std::int64_t iterations = 0;
    bool converged = false;
    double gap = 0.0;       // maximal violating-pair gap at exit
    double objective = 0.0; // 1/2 a^T Q a at exit
    std::int64_t kernel_rows = 0;
    Vector alpha;           // full dual vector over the training set
};

namespace detail {

/// Least-recently-used cache of gram rows under a byte budget.
class KernelRowCache {
public:
    KernelRowCache(const Matrix &X, double h, std::size_t budget_bytes)
        : X_{X}, h_{h}, slots_(static_cast<std::size_t>(X.rows())) {
        const auto row_bytes = static_cast<std::size_t>(X.rows()) * sizeof(double);
        capacity_ = std::max<std::size_t>(2, budget_bytes / std::max<std::size_t>(row_bytes, 1));
    }

    const double *row(Index i) {
        auto &slot = slots_[static_cast<std::size_t>(i)];
        if (slot.cached) {
            lru_.splice(lru_.begin(), lru_, slot.position);
            return slot.values.data();
        }
        if (lru_.size() >= capacity_) {
            const Index victim = lru_.back();
            lru_.pop_back();
            auto &v = slots_[static_cast<std::size_t>(victim)];
            slot.values = std::move(v.values);
            v.values = {};
            v.cached = false;
        }
        slot.values.resize(static_cast<std::size_t>(X_.rows()));
        kernel_row(X_.row(i).data(), X_, h_, slot.values.data());
        ++computed_;
        lru_.push_front(i);
        slot.position = lru_.begin();
        slot.cached = true;
        return slot.values.data();
    }

    std::int64_t computed() const { return computed_; }

private:
    struct Slot {
        bool cached = false;
        std::vector<double> values;
        std::list<Index>::iterator position;
    };

    const Matrix &X_;
    double h_;
    std::vector<Slot> slots_;
    std::list<Index> lru_;
    std::size_t capacity_ = 2;
    std::int64_t computed_ = 0;
};

} // namespace detail

inline OcsvmModel train_ocsvm(const Matrix &X, double h, const OcsvmOptions &options = {},
                              OcsvmDiagnostics *diagnostics = nullptr) {
    const Index n = X.rows();
    require(n >= 2, "train_ocsvm: need at least two points");
    require(options.nu > 0.0 && options.nu <= 1.0, "train_ocsvm: nu must lie in (0, 1]");
    detail::check_bandwidth(h);
    const double C = 1.0 / (options.nu * static_cast<double>(n));

    // feasible start: fill the box front to back until the mass is 1
    Vector alpha = Vector::Zero(n);
    double remaining = 1.0;
    for (Index i = 0; i < n && remaining > 0.0; ++i) {
        alpha(i) = std::min(C, remaining);
        remaining -= alpha(i);
    }

    detail::KernelRowCache cache{X, h, options.cache_bytes};
    Vector G = Vector::Zero(n); // gradient Q a
    for (Index i = 0; i < n; ++i) {
        if (alpha(i) > 0.0) {
            const double *Qi = cache.row(i);
            for (Index t = 0; t < n; ++t) {
                G(t) += alpha(i) * Qi[t];
            }
        }
    }

    auto at_upper = [&](Index t) { return alpha(t) >= C; };
    auto at_lower = [&](Index t) { return alpha(t) <= 0.0; };
    constexpr double tau = 1e-12;

    OcsvmDiagnostics diag;
    double gap = std::numeric_limits<double>::infinity();
    while (true) {
        // i: most violating index that can grow; j: second-order choice that can shrink
        Index i = -1;
        double g_max = -std::numeric_limits<double>::infinity();
        for (Index t = 0; t < n; ++t) {
            if (!at_upper(t) && -G(t) > g_max) {
                g_max = -G(t);
                i = t;
            }
        }
        double g_min = std::numeric_limits<double>::infinity();
        for (Index t = 0; t < n; ++t) {
            if (!at_lower(t)) {
                g_min = std::min(g_min, -G(t));
            }
        }
        gap = (i < 0) ? 0.0 : g_max - g_min;
        if (gap < options.tol) {
            diag.converged = true;
            break;
        }
        if (diag.iterations >= options.max_iter) {
            break;
        }
        const double *Qi = cache.row(i);
        Index j = -1;
        double best = std::numeric_limits<double>::infinity();
        for (Index t = 0; t < n; ++t) {
            if (at_lower(t)) {
                continue;
            }
            const double b = g_max + G(t);
            if (b > 0.0) {
                double a = 2.0 - 2.0 * Qi[t]; // Q_ii = Q_tt = 1
                if (a <= 0.0) {
                    a = tau;
                }
                const double score = -(b * b) / a;
                if (score < best) {
                    best = score;
                    j = t;
                }
            }
        }
        if (j < 0) {
            diag.converged = true;
            break;
        }
        const double *Qj = cache.row(j);
        Qi = cache.row(i); // i is most recent-but-one; still resident
        double a = 2.0 - 2.0 * Qi[j];
        if (a <= 0.0) {
            a = tau;
        }
        double delta = (G(j) - G(i)) / a;
        delta = std::min({delta, C - alpha(i), alpha(j)});
        if (delta <= 0.0) {
            // numerically stalled pair
            diag.converged = gap < 10 * options.tol;
            break;
        }
        alpha(i) += delta;
        alpha(j) -= delta;
        if (C - alpha(i) < 1e-15 * C) {
            alpha(i) = C;
        }
        if (alpha(j) < 1e-15 * C) {
            alpha(j) = 0.0;
        }
        for (Index t = 0; t < n; ++t) {
            G(t) += delta * (Qi[t] - Qj[t]);
        }
        ++diag.iterations;
    }

    // rho: mean gradient over free coefficients, else middle of the KKT interval
    double free_sum = 0.0;
    Index free_count = 0;
    double lb = -std::numeric_limits<double>::infinity();
    double ub = std::numeric_limits<double>::infinity();
    for (Index t = 0; t < n; ++t) {
        if (at_upper(t)) {
            lb = std::max(lb, G(t));
        } else if (at_lower(t)) {
            ub = std::min(ub, G(t));
        } else {
            free_sum += G(t);
            ++free_count;
        }
    }
    double rho = 0.0;
    if (free_count > 0) {
        rho = free_sum / static_cast<double>(free_count);
    } else if (std::isfinite(lb) && std::isfinite(ub)) {
        rho = 0.5 * (lb + ub);
    } else {
        rho = std::isfinite(lb) ? lb : ub;
    }

    std::vector<Index> sv;
    for (Index t = 0; t < n; ++t) {
        if (alpha(t) > 1e-12) {
            sv.push_back(t);
        }
    }
    OcsvmModel model;
    model.support_vectors = select_rows(X, sv);
    model.alpha.resize(static_cast<Index>(sv.size()));
    for (std::size_t s = 0; s < sv.size(); ++s) {
        model.alpha(static_cast<Index>(s)) = alpha(sv[s]);
    }
    model.rho = rho;
    model.h = h;
    model.nu = options.nu;

    if (diagnostics) {
        diag.gap = gap;
        diag.objective = 0.5 * alpha.dot(G);
        diag.kernel_rows = cache.computed();
        diag.alpha = std::move(alpha);
        *diagnostics = std::move(diag);
    }
    return model;
}

/// f(x) - rho for every row; negative means novel at the default threshold.
inline Vector ocsvm_score(const OcsvmModel &model, const Matrix &X) {
    require(X.cols() == model.input_dim(), "ocsvm score: dimension mismatch");
    Vector out(X.rows());
    std::vector<double> k(static_cast<std::size_t>(model.n_sv()));
    for (Index i = 0; i < X.rows(); ++i) {
        kernel_row(X.row(i).data(), model.support_vectors, model.h, k.data());
        double f = 0.0;
        for (Index s = 0; s < model.n_sv(); ++s) {
            f += model.alpha(s) * k[static_cast<std::size_t>(s)];
        }
        out(i) = f - model.rho;
    }
    return out;
}

template <typename Derived>
double ocsvm_score(const OcsvmModel &model, const Eigen::MatrixBase<Derived> &x) {
    Matrix row(1, x.size());
    for (Index j = 0; j < x.size(); ++j) {
        row(0, j) = x(j);
    }
    return ocsvm_score(model, row)(0);
}

/// Exact length of the serialized model file.
inline std::size_t ocsvm_bytes(const OcsvmModel &model) {
    const auto nsv = static_cast<std::size_t>(model.n_sv());
    const auto D = static_cast<std::size_t>(model.input_dim());
    return format::ocsvm_header_bytes + 8 * (nsv * (D + 1) + 2);
}

} // namespace ockjl

#endif // OCKJL_OCSVM_HPP
