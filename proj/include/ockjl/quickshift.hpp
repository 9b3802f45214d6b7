// quickshift.hpp
//
// Quickshift++ mode seeking on embedded data. Used to pick the number of
// mixture components and to initialize them from the discovered clusters.
//
// Densities are k-NN estimates kept in the log domain,
//   l_i = -d * log(r_k(x_i)),
// so the density-ratio persistence test f >= (1 - beta) * peak becomes
// l >= peak + log(1 - beta).

#ifndef OCKJL_QUICKSHIFT_HPP
#define OCKJL_QUICKSHIFT_HPP

#include "ockjl/common.hpp"
#include "ockjl/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace ockjl {

struct QsConfig {
    double beta = 0.9;
    Index k_neighbors = 0; // 0 selects ceil(n^(2/3))
    double coverage = 0.95;
    Index max_clusters = 20;
};

inline Index default_neighbor_count(Index n) {
    auto k = static_cast<Index>(std::ceil(std::pow(static_cast<double>(n), 2.0 / 3.0) - 1e-9));
    return std::clamp<Index>(k, 1, std::max<Index>(n - 1, 1));
}

/// k nearest neighbours of every point (self excluded), ordered by
/// distance with ties broken by index.
struct KnnGraph {
    Index n = 0;
    Index k = 0;
    std::vector<Index> neighbors; // n * k
    std::vector<double> distances;

    std::span<const Index> of(Index i) const {
        return {neighbors.data() + i * k, static_cast<std::size_t>(k)};
    }
    double radius(Index i) const { return distances[static_cast<std::size_t>(i * k + k - 1)]; }
};

inline KnnGraph knn_graph(const Matrix &X, Index k) {
    const Index n = X.rows();
    require(k >= 1 && k < n, "knn: neighbour count must lie in [1, n)");
    KnnGraph g{n, k, std::vector<Index>(static_cast<std::size_t>(n * k)),
               std::vector<double>(static_cast<std::size_t>(n * k))};
    std::vector<std::pair<double, Index>> row(static_cast<std::size_t>(n - 1));
    for (Index i = 0; i < n; ++i) {
        std::size_t c = 0;
        for (Index j = 0; j < n; ++j) {
            if (j != i) {
                row[c++] = {(X.row(i) - X.row(j)).squaredNorm(), j};
            }
        }
        std::partial_sort(row.begin(), row.begin() + k, row.end());
        for (Index t = 0; t < k; ++t) {
            const auto &[d2, j] = row[static_cast<std::size_t>(t)];
            g.neighbors[static_cast<std::size_t>(i * k + t)] = j;
            g.distances[static_cast<std::size_t>(i * k + t)] = std::sqrt(d2);
        }
    }
    return g;
}

/// l_i = -dim * log r_i with r_i the distance to the k-th neighbour; zero
/// radii are replaced by 1e-3 times the smallest positive radius.
inline std::vector<double> knn_log_density(const KnnGraph &g, Index dim) {
    double smallest = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < g.n; ++i) {
        const double r = g.radius(i);
        if (r > 0.0) {
            smallest = std::min(smallest, r);
        }
    }
    if (!std::isfinite(smallest)) {
        throw DegenerateData{"knn_log_density: all points coincide"};
    }
    std::vector<double> out(static_cast<std::size_t>(g.n));
    for (Index i = 0; i < g.n; ++i) {
        const double r = g.radius(i) > 0.0 ? g.radius(i) : 1e-3 * smallest;
        out[static_cast<std::size_t>(i)] = -static_cast<double>(dim) * std::log(r);
    }
    return out;
}

inline std::vector<double> knn_log_density(const Matrix &X, Index k) {
    return knn_log_density(knn_graph(X, k), X.cols());
}

namespace detail {

/// Indices sorted by decreasing density, ties by index.
inline std::vector<Index> density_order(const std::vector<double> &density) {
    std::vector<Index> order(density.size());
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return density[static_cast<std::size_t>(a)] > density[static_cast<std::size_t>(b)];
    });
    return order;
}

} // namespace detail

/// Cluster cores: the modal sets that persist down to a (1 - beta)
/// fraction of their peak density. Returned in order of discovery.
inline std::vector<std::vector<Index>> cluster_cores(const KnnGraph &g, const std::vector<double> &density,
                                                     double beta) {
    require(beta > 0.0 && beta < 1.0, "cluster_cores: beta must lie in (0, 1)");
    require(static_cast<Index>(density.size()) == g.n, "cluster_cores: density size mismatch");
    const Index n = g.n;
    const double drop = std::log(1.0 - beta);
    const auto order = detail::density_order(density);
    std::vector<Index> rank(static_cast<std::size_t>(n));
    for (Index r = 0; r < n; ++r) {
        rank[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = r;
    }

    struct Component {
        Index peak = 0; // index of the highest-density member
        bool marked = false;
        std::vector<Index> members;
    };
    std::vector<Index> parent(static_cast<std::size_t>(n), -1);
    std::vector<Component> comp(static_cast<std::size_t>(n));
    std::vector<bool> processed(static_cast<std::size_t>(n), false);
    std::vector<bool> assigned(static_cast<std::size_t>(n), false);
    std::vector<std::vector<Index>> cores;

    auto find = [&](Index x) {
        Index root = x;
        while (parent[static_cast<std::size_t>(root)] != root) {
            root = parent[static_cast<std::size_t>(root)];
        }
        while (parent[static_cast<std::size_t>(x)] != root) {
            Index next = parent[static_cast<std::size_t>(x)];
            parent[static_cast<std::size_t>(x)] = root;
            x = next;
        }
        return root;
    };
    auto peak_density = [&](Index root) {
        return density[static_cast<std::size_t>(comp[static_cast<std::size_t>(root)].peak)];
    };
    auto freeze = [&](Index root) {
        auto &c = comp[static_cast<std::size_t>(root)];
        const double floor = peak_density(root) + drop;
        std::vector<Index> core;
        for (Index p : c.members) {
            if (!assigned[static_cast<std::size_t>(p)] && density[static_cast<std::size_t>(p)] >= floor) {
                core.push_back(p);
                assigned[static_cast<std::size_t>(p)] = true;
            }
        }
        c.marked = true;
        if (!core.empty()) {
            std::sort(core.begin(), core.end());
            cores.push_back(std::move(core));
        }
    };

    for (Index i : order) {
        const double level = density[static_cast<std::size_t>(i)];
        parent[static_cast<std::size_t>(i)] = i;
        comp[static_cast<std::size_t>(i)] = Component{i, false, {i}};
        processed[static_cast<std::size_t>(i)] = true;
        for (Index j : g.of(i)) {
            if (!processed[static_cast<std::size_t>(j)]) {
                continue;
            }
            Index a = find(i);
            Index b = find(j);
            if (a == b) {
                continue;
            }
            // a keeps the higher peak; equal peaks resolve by processing order
            const auto pa = comp[static_cast<std::size_t>(a)].peak;
            const auto pb = comp[static_cast<std::size_t>(b)].peak;
            if (rank[static_cast<std::size_t>(pb)] < rank[static_cast<std::size_t>(pa)]) {
                std::swap(a, b);
            }
            if (level < peak_density(b) + drop && !comp[static_cast<std::size_t>(b)].marked) {
                freeze(b);
            }
            auto &ca = comp[static_cast<std::size_t>(a)];
            auto &cb = comp[static_cast<std::size_t>(b)];
            if (ca.members.size() < cb.members.size()) {
                std::swap(ca.members, cb.members);
            }
            ca.members.insert(ca.members.end(), cb.members.begin(), cb.members.end());
            cb.members.clear();
            cb.members.shrink_to_fit();
            parent[static_cast<std::size_t>(b)] = a;
        }
    }
    // every surviving root (one per connected piece of the graph)
    for (Index i : order) {
        if (find(i) == i && !comp[static_cast<std::size_t>(i)].marked) {
            freeze(i);
        }
    }
    return cores;
}

/// Hill-climbs every non-core point to its nearest strictly denser point
/// (its k-NN list first, then the whole set) and inherits that label.
inline std::vector<Index> quickshift_assign(const Matrix &X, const KnnGraph &g, const std::vector<double> &density,
                                            const std::vector<std::vector<Index>> &cores) {
    require(!cores.empty(), "quickshift_assign: no cores");
    const Index n = g.n;
    std::vector<Index> label(static_cast<std::size_t>(n), -1);
    for (std::size_t c = 0; c < cores.size(); ++c) {
        for (Index p : cores[c]) {
            label[static_cast<std::size_t>(p)] = static_cast<Index>(c);
        }
    }
    for (Index i : detail::density_order(density)) {
        if (label[static_cast<std::size_t>(i)] >= 0) {
            continue;
        }
        const double li = density[static_cast<std::size_t>(i)];
        Index target = -1;
        for (Index j : g.of(i)) {
            if (density[static_cast<std::size_t>(j)] > li) {
                target = j;
                break;
            }
        }
        if (target < 0) {
            double best = std::numeric_limits<double>::infinity();
            for (Index j = 0; j < n; ++j) {
                if (density[static_cast<std::size_t>(j)] > li) {
                    const double d2 = (X.row(i) - X.row(j)).squaredNorm();
                    if (d2 < best) {
                        best = d2;
                        target = j;
                    }
                }
            }
        }
        if (target < 0 || label[static_cast<std::size_t>(target)] < 0) {
            throw DegenerateData{"quickshift_assign: point " + std::to_string(i) + " cannot reach a core"};
        }
        label[static_cast<std::size_t>(i)] = label[static_cast<std::size_t>(target)];
    }
    return label;
}

struct ClusterSummary {
    Index id = 0;
    Index size = 0;
    Vector mean;
    Matrix covariance;
    double weight = 0.0;
};

struct ComponentSelection {
    Index k = 0;
    std::vector<ClusterSummary> clusters; // retained, largest first
    GmmModel init;
};

/// Keeps the fewest largest clusters covering `coverage` of the points
/// (at most `cap`) and turns them into initial mixture parameters.
inline ComponentSelection select_components(const std::vector<Index> &labels, const Matrix &X,
                                            double coverage = 0.95, Index cap = 20) {
    const Index n = X.rows();
    const Index dim = X.cols();
    require(static_cast<Index>(labels.size()) == n, "select_components: label count mismatch");
    require(cap >= 1, "select_components: cap must be positive");
    Index cluster_count = 0;
    for (Index l : labels) {
        cluster_count = std::max(cluster_count, l + 1);
    }
    if (cluster_count == 0) {
        throw DegenerateData{"select_components: no clusters"};
    }
    std::vector<Index> size(static_cast<std::size_t>(cluster_count), 0);
    for (Index l : labels) {
        if (l >= 0) {
            ++size[static_cast<std::size_t>(l)];
        }
    }
    std::vector<Index> ids;
    for (Index c = 0; c < cluster_count; ++c) {
        if (size[static_cast<std::size_t>(c)] > 0) {
            ids.push_back(c);
        }
    }
    std::stable_sort(ids.begin(), ids.end(), [&](Index a, Index b) {
        return size[static_cast<std::size_t>(a)] > size[static_cast<std::size_t>(b)];
    });
    Index keep = 0;
    Index covered = 0;
    while (keep < static_cast<Index>(ids.size()) && keep < cap) {
        covered += size[static_cast<std::size_t>(ids[static_cast<std::size_t>(keep)])];
        ++keep;
        if (static_cast<double>(covered) >= coverage * static_cast<double>(n)) {
            break;
        }
    }

    const double ridge = 1e-6 * covariance(X).trace() / static_cast<double>(dim);
    ComponentSelection out;
    out.k = keep;
    Vector pi(keep);
    Matrix mu(keep, dim);
    std::vector<Matrix> sigma;
    for (Index r = 0; r < keep; ++r) {
        const Index c = ids[static_cast<std::size_t>(r)];
        std::vector<Index> members;
        for (Index i = 0; i < n; ++i) {
            if (labels[static_cast<std::size_t>(i)] == c) {
                members.push_back(i);
            }
        }
        const Matrix Xc = select_rows(X, members);
        ClusterSummary s;
        s.id = c;
        s.size = static_cast<Index>(members.size());
        s.mean = Xc.colwise().mean().transpose();
        s.covariance = covariance(Xc) + ridge * Matrix::Identity(dim, dim);
        s.weight = static_cast<double>(s.size) / static_cast<double>(covered);
        pi(r) = s.weight;
        mu.row(r) = s.mean.transpose();
        sigma.push_back(s.covariance);
        out.clusters.push_back(std::move(s));
    }
    out.init = GmmModel{std::move(pi), std::move(mu), std::move(sigma)};
    return out;
}

struct AutoK {
    Index k = 0;
    GmmModel init;
    std::vector<Index> labels;
    std::vector<std::vector<Index>> cores;
    std::vector<ClusterSummary> clusters;
};

/// Number of mixture components and their initialization from
/// Quickshift++ clusters of the (embedded) data.
inline AutoK auto_k(const Matrix &X, const QsConfig &config = {}) {
    const Index n = X.rows();
    require(n >= 2, "auto_k: need at least two points");
    const Index k_nn = config.k_neighbors > 0 ? config.k_neighbors : default_neighbor_count(n);
    const auto graph = knn_graph(X, k_nn);
    const auto density = knn_log_density(graph, X.cols());
    auto cores = cluster_cores(graph, density, config.beta);
    auto labels = quickshift_assign(X, graph, density, cores);
    auto sel = select_components(labels, X, config.coverage, config.max_clusters);
    return {sel.k, std::move(sel.init), std::move(labels), std::move(cores), std::move(sel.clusters)};
}

} // namespace ockjl

#endif // OCKJL_QUICKSHIFT_HPP
