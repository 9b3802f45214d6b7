// eval.hpp
//
// Benchmark harness: AUC, the minimal-tuning and no-tuning scenarios,
// the repeated train/serialize/score protocol with timing and model-size
// accounting, synthetic datasets, and report rendering.

#ifndef OCKJL_EVAL_HPP
#define OCKJL_EVAL_HPP

#include "ockjl/common.hpp"
#include "ockjl/detector.hpp"
#include "ockjl/ocsvm.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ockjl {

// ---------------------------------------------------------------------
// AUC

/// Twice the number of (normal, novel) pairs won by the normal score,
/// ties counting one; exact integer arithmetic.
inline std::int64_t auc_twice_wins(std::span<const double> normal, std::span<const double> novel) {
    std::vector<double> v(novel.begin(), novel.end());
    std::sort(v.begin(), v.end());
    std::int64_t wins = 0;
    for (double s : normal) {
        const auto lo = std::lower_bound(v.begin(), v.end(), s);
        const auto hi = std::upper_bound(lo, v.end(), s);
        wins += 2 * static_cast<std::int64_t>(lo - v.begin()) + static_cast<std::int64_t>(hi - lo);
    }
    return wins;
}

/// Probability that a normal point outscores a novel one, ties counted
/// half. Higher scores mean "more normal".
inline double auc(std::span<const double> normal, std::span<const double> novel) {
    if (normal.empty() || novel.empty()) {
        throw InvalidArgument{"auc: both classes need at least one score"};
    }
    const auto pairs = static_cast<double>(normal.size()) * static_cast<double>(novel.size());
    return static_cast<double>(auc_twice_wins(normal, novel)) / (2.0 * pairs);
}

inline double auc(const Vector &normal, const Vector &novel) {
    return auc(std::span<const double>{normal.data(), static_cast<std::size_t>(normal.size())},
               std::span<const double>{novel.data(), static_cast<std::size_t>(novel.size())});
}

// ---------------------------------------------------------------------
// synthetic data

struct LabeledData {
    Matrix X;
    std::vector<int> labels;
};

/// Class 0 ("normal"): ring of radius 3 with N(0, 0.3^2) radial noise.
/// Class 1 ("novel"): isotropic N(0, 0.5^2 I) at the origin. 50/50 split,
/// normals first.
inline LabeledData synth_cluster_in_cluster(Index n, std::uint64_t seed) {
    require(n >= 2, "synth_cluster_in_cluster: need n >= 2");
    auto rng = make_rng(seed);
    std::normal_distribution<double> radial{0.0, 0.3};
    std::normal_distribution<double> core{0.0, 0.5};
    std::uniform_real_distribution<double> angle{0.0, 2.0 * std::numbers::pi};
    const Index ring = (n + 1) / 2;
    LabeledData out{Matrix(n, 2), std::vector<int>(static_cast<std::size_t>(n), 0)};
    for (Index i = 0; i < ring; ++i) {
        const double r = 3.0 + radial(rng);
        const double a = angle(rng);
        out.X(i, 0) = r * std::cos(a);
        out.X(i, 1) = r * std::sin(a);
    }
    for (Index i = ring; i < n; ++i) {
        out.X(i, 0) = core(rng);
        out.X(i, 1) = core(rng);
        out.labels[static_cast<std::size_t>(i)] = 1;
    }
    return out;
}

struct BlobData {
    Matrix X;
    std::vector<int> labels; // blob index
    Matrix centers;
};

/// k unit-variance isotropic Gaussian blobs in d dimensions whose centres
/// are pairwise at least `separation` apart; sizes differ by at most one.
inline BlobData synth_blobs(Index n, Index k, Index d, double separation, std::uint64_t seed) {
    require(k >= 1 && d >= 1 && n >= k, "synth_blobs: need k >= 1, d >= 1, n >= k");
    require(separation >= 0.0, "synth_blobs: negative separation");
    auto rng = make_rng(seed);
    const double half_width = std::max(1.0, separation * static_cast<double>(k));
    std::uniform_real_distribution<double> box{-half_width, half_width};
    Matrix centers(k, d);
    for (Index c = 0; c < k; ++c) {
        bool placed = false;
        for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
            for (Index j = 0; j < d; ++j) {
                centers(c, j) = box(rng);
            }
            placed = true;
            for (Index o = 0; o < c; ++o) {
                if ((centers.row(c) - centers.row(o)).norm() < separation) {
                    placed = false;
                    break;
                }
            }
        }
        if (!placed) {
            throw DegenerateData{"synth_blobs: could not place centres at the requested separation"};
        }
    }
    std::normal_distribution<double> noise{0.0, 1.0};
    BlobData out{Matrix(n, d), std::vector<int>(static_cast<std::size_t>(n)), centers};
    for (Index i = 0; i < n; ++i) {
        const Index c = i * k / n;
        out.labels[static_cast<std::size_t>(i)] = static_cast<int>(c);
        for (Index j = 0; j < d; ++j) {
            out.X(i, j) = centers(c, j) + noise(rng);
        }
    }
    return out;
}

// ---------------------------------------------------------------------
// methods and configurations

enum class Method { OCSVM, KJL, KJL_QS, NYSTROM, NYSTROM_QS };

inline std::string_view method_name(Method m) {
    switch (m) {
    case Method::OCSVM: return "ocsvm";
    case Method::KJL: return "kjl";
    case Method::KJL_QS: return "kjl-qs";
    case Method::NYSTROM: return "nystrom";
    case Method::NYSTROM_QS: return "nystrom-qs";
    }
    return "?";
}

inline Method parse_method(std::string_view name) {
    for (auto m : {Method::OCSVM, Method::KJL, Method::KJL_QS, Method::NYSTROM, Method::NYSTROM_QS}) {
        if (method_name(m) == name) {
            return m;
        }
    }
    throw InvalidArgument{"unknown method '" + std::string{name} + "'"};
}

inline bool uses_quickshift(Method m) { return m == Method::KJL_QS || m == Method::NYSTROM_QS; }

struct MethodConfig {
    Method method = Method::KJL_QS;
    double h_quantile = 0.25;
    std::optional<Index> k; // empty: Quickshift++
    double nu = 0.5;
    Index m = 100;
    Index d = 5;
};

/// No-tuning defaults: h at the 0.25 distance quantile, k by Quickshift++.
inline MethodConfig default_config(Method method) {
    return MethodConfig{method, 0.25, std::nullopt, 0.5, 100, 5};
}

using TrainedModel = std::variant<DetectorModel, OcsvmModel>;

inline TrainedModel train_method(const MethodConfig &config, const Matrix &X, double h, std::uint64_t seed) {
    if (config.method == Method::OCSVM) {
        OcsvmOptions opt;
        opt.nu = config.nu;
        return train_ocsvm(X, h, opt);
    }
    DetectorConfig dc;
    dc.kind = (config.method == Method::NYSTROM || config.method == Method::NYSTROM_QS) ? EmbeddingKind::NYSTROM
                                                                                       : EmbeddingKind::KJL;
    dc.m = std::min<Index>(config.m, X.rows());
    dc.d = std::min<Index>(config.d, dc.m);
    dc.bandwidth = Bandwidth::fixed(h);
    dc.fixed_k = config.k;
    dc.seed = seed;
    return train_detector(X, dc);
}

inline Vector score_model(const TrainedModel &model, const Matrix &X) {
    return std::visit(
        [&](const auto &m) -> Vector {
            if constexpr (std::is_same_v<std::decay_t<decltype(m)>, OcsvmModel>) {
                return ocsvm_score(m, X);
            } else {
                return detect_scores(m, X);
            }
        },
        model);
}

inline std::vector<std::uint8_t> serialize_model(const TrainedModel &model) {
    return std::visit([](const auto &m) { return serialize(m); }, model);
}

struct TuningGrid {
    std::vector<double> h_quantiles{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95};
    std::vector<Index> k_values{1, 4, 6, 8, 10, 12, 14, 16, 18, 20};
};

struct TuningPoint {
    double h_quantile = 0.0;
    std::optional<Index> k;
    double auc = 0.0;
};

struct TuningResult {
    MethodConfig best;
    double best_auc = 0.0;
    std::vector<TuningPoint> evaluated;
};

/// Grid search maximizing validation AUC. The k grid applies only to
/// methods without Quickshift++. Ties go to the smaller h quantile, then
/// the smaller k.
inline TuningResult tune_minimal(const Matrix &train, const Matrix &val_normal, const Matrix &val_novel,
                                 Method method, const TuningGrid &grid = {}, std::uint64_t seed = 0,
                                 const MethodConfig &base = default_config(Method::KJL_QS)) {
    require(!grid.h_quantiles.empty(), "tune_minimal: empty bandwidth grid");
    const bool tune_k = method != Method::OCSVM && !uses_quickshift(method);
    require(!tune_k || !grid.k_values.empty(), "tune_minimal: empty k grid");

    std::vector<double> qs = grid.h_quantiles;
    std::sort(qs.begin(), qs.end());
    const auto hs = quantile_bandwidths(train, qs);
    std::vector<std::optional<Index>> ks;
    if (tune_k) {
        std::vector<Index> sorted = grid.k_values;
        std::sort(sorted.begin(), sorted.end());
        for (Index k : sorted) {
            ks.emplace_back(k);
        }
    } else {
        ks.emplace_back(std::nullopt);
    }

    TuningResult out;
    bool have = false;
    for (std::size_t qi = 0; qi < qs.size(); ++qi) {
        for (const auto &k : ks) {
            MethodConfig cfg = base;
            cfg.method = method;
            cfg.h_quantile = qs[qi];
            cfg.k = k;
            const auto model = train_method(cfg, train, hs[qi], seed);
            const double a = auc(score_model(model, val_normal), score_model(model, val_novel));
            out.evaluated.push_back({qs[qi], k, a});
            if (!have || a > out.best_auc) {
                have = true;
                out.best = cfg;
                out.best_auc = a;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------
// experiment protocol

enum class Scenario { MINIMAL_TUNING, NO_TUNING };

struct ExperimentProtocol {
    Index n_train = 5000;
    Index n_test_per_class = 300;
    Index n_val = 150; // half normal, half novel
    int reps = 5;
    int timing_repeats = 20;
    std::uint64_t seed = 0;
    Index m = 100;
    Index d = 5;
};

struct Stat {
    double mean = 0.0;
    double std = 0.0;
};

/// Mean and population standard deviation.
inline Stat summarize(std::span<const double> v) {
    if (v.empty()) {
        return {};
    }
    double mean = 0.0;
    for (double x : v) {
        mean += x;
    }
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) {
        var += (x - mean) * (x - mean);
    }
    return {mean, std::sqrt(var / static_cast<double>(v.size()))};
}

struct RepResult {
    double auc = 0.0;
    double train_ms = 0.0;        // wall time of the final fit
    double test_ms_per_100 = 0.0; // scoring only, averaged over timing repeats
    double bytes = 0.0;           // serialized model length
    double h = 0.0;
    double h_quantile = 0.0;
    Index k = 0;    // mixture components (detectors)
    Index n_sv = 0; // support vectors (OCSVM)
};

struct MethodReport {
    std::string method;
    std::vector<RepResult> reps;
    Stat auc, train_ms_per_100, test_ms_per_100, bytes;
    // ratios against the OCSVM mean; empty when no baseline was run
    std::optional<Stat> auc_retained, train_speedup, test_speedup, space_reduction;
};

struct EvalReport {
    std::string scenario;
    Index n_train = 0;
    Index n_test = 0;
    int reps = 0;
    int timing_repeats = 0;
    int threads = 1;
    std::vector<MethodReport> methods;
};

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

inline std::vector<Index> take(std::vector<Index> &pool, Index count, Rng &rng) {
    require(count <= static_cast<Index>(pool.size()), "pool too small for the requested draw");
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<Index> out(pool.end() - count, pool.end());
    pool.resize(pool.size() - static_cast<std::size_t>(count));
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<Index> iota(Index n) {
    std::vector<Index> v(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        v[static_cast<std::size_t>(i)] = i;
    }
    return v;
}

inline void fill_ratios(EvalReport &report) {
    const MethodReport *base = nullptr;
    for (const auto &m : report.methods) {
        if (m.method == method_name(Method::OCSVM)) {
            base = &m;
        }
    }
    if (!base) {
        return;
    }
    const Stat auc0 = base->auc, train0 = base->train_ms_per_100, test0 = base->test_ms_per_100,
               bytes0 = base->bytes;
    for (auto &m : report.methods) {
        std::vector<double> a, tr, te, sp;
        for (const auto &r : m.reps) {
            a.push_back(r.auc / auc0.mean);
            tr.push_back(train0.mean / (r.train_ms * 100.0 / static_cast<double>(report.n_train)));
            te.push_back(test0.mean / r.test_ms_per_100);
            sp.push_back(bytes0.mean / r.bytes);
        }
        m.auc_retained = summarize(a);
        m.train_speedup = summarize(tr);
        m.test_speedup = summarize(te);
        m.space_reduction = summarize(sp);
    }
}

} // namespace detail

/// One fixed test set; per repetition a fresh training set (and a
/// validation set when tuning), disjoint from the test set and from each
/// other. Training and scoring are timed separately; scoring covers the
/// detection computation only.
inline EvalReport run_experiment(const Matrix &normal_pool, const Matrix &novel_pool, std::span<const Method> methods,
                                 const ExperimentProtocol &protocol, Scenario scenario,
                                 const TuningGrid &grid = {}) {
    require(protocol.reps >= 1 && protocol.timing_repeats >= 1, "run_experiment: reps must be positive");
    require(normal_pool.cols() == novel_pool.cols(), "run_experiment: pools differ in dimension");
    const bool tuning = scenario == Scenario::MINIMAL_TUNING;
    const Index val_half = tuning ? protocol.n_val / 2 : 0;
    if (normal_pool.rows() < protocol.n_test_per_class + protocol.n_train + val_half ||
        novel_pool.rows() < protocol.n_test_per_class + val_half) {
        throw InvalidArgument{"run_experiment: pool too small for the protocol"};
    }
    auto rng = make_rng(protocol.seed);

    auto normal_rest = detail::iota(normal_pool.rows());
    auto novel_rest = detail::iota(novel_pool.rows());
    const Matrix test_normal = select_rows(normal_pool, detail::take(normal_rest, protocol.n_test_per_class, rng));
    const Matrix test_novel = select_rows(novel_pool, detail::take(novel_rest, protocol.n_test_per_class, rng));
    Matrix test(test_normal.rows() + test_novel.rows(), normal_pool.cols());
    test << test_normal, test_novel;
    const Index n_test = test.rows();

    EvalReport report;
    report.scenario = tuning ? "tuned" : "default";
    report.n_train = protocol.n_train;
    report.n_test = n_test;
    report.reps = protocol.reps;
    report.timing_repeats = protocol.timing_repeats;
    for (Method m : methods) {
        report.methods.push_back(MethodReport{std::string{method_name(m)}, {}, {}, {}, {}, {}, {}, {}, {}, {}});
    }

    for (int rep = 0; rep < protocol.reps; ++rep) {
        auto normal_avail = normal_rest;
        auto novel_avail = novel_rest;
        const Matrix train = select_rows(normal_pool, detail::take(normal_avail, protocol.n_train, rng));
        Matrix val_normal, val_novel;
        if (tuning) {
            val_normal = select_rows(normal_pool, detail::take(normal_avail, val_half, rng));
            val_novel = select_rows(novel_pool, detail::take(novel_avail, val_half, rng));
        }
        const auto rep_seed = derive_seed(protocol.seed, static_cast<std::uint64_t>(rep) + 100);

        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            const Method method = methods[mi];
            MethodConfig cfg = default_config(method);
            cfg.m = protocol.m;
            cfg.d = protocol.d;
            if (tuning) {
                cfg = tune_minimal(train, val_normal, val_novel, method, grid, rep_seed, cfg).best;
            }
            const double h = quantile_bandwidth(train, cfg.h_quantile);

            auto t0 = std::chrono::steady_clock::now();
            const TrainedModel model = train_method(cfg, train, h, rep_seed);
            const double train_ms = detail::elapsed_ms(t0);
            const auto bytes = serialize_model(model).size();

            Vector scores;
            t0 = std::chrono::steady_clock::now();
            for (int t = 0; t < protocol.timing_repeats; ++t) {
                scores = score_model(model, test);
            }
            const double test_ms = detail::elapsed_ms(t0) / protocol.timing_repeats;

            RepResult r;
            r.auc = auc(scores.head(test_normal.rows()), scores.tail(test_novel.rows()));
            r.train_ms = train_ms;
            r.test_ms_per_100 = test_ms * 100.0 / static_cast<double>(n_test);
            r.bytes = static_cast<double>(bytes);
            r.h = h;
            r.h_quantile = cfg.h_quantile;
            if (const auto *dm = std::get_if<DetectorModel>(&model)) {
                r.k = dm->gmm.k();
            } else {
                r.n_sv = std::get<OcsvmModel>(model).n_sv();
            }
            report.methods[mi].reps.push_back(r);
        }
    }

    for (auto &m : report.methods) {
        std::vector<double> a, tr, te, b;
        for (const auto &r : m.reps) {
            a.push_back(r.auc);
            tr.push_back(r.train_ms * 100.0 / static_cast<double>(protocol.n_train));
            te.push_back(r.test_ms_per_100);
            b.push_back(r.bytes);
        }
        m.auc = summarize(a);
        m.train_ms_per_100 = summarize(tr);
        m.test_ms_per_100 = summarize(te);
        m.bytes = summarize(b);
    }
    detail::fill_ratios(report);
    return report;
}

// ---------------------------------------------------------------------
// report rendering

inline nlohmann::json stat_json(const Stat &s) { return {{"mean", s.mean}, {"std", s.std}}; }

inline Stat stat_from_json(const nlohmann::json &j) { return {j.at("mean").get<double>(), j.at("std").get<double>()}; }

inline nlohmann::json report_json(const EvalReport &report) {
    nlohmann::json methods = nlohmann::json::array();
    for (const auto &m : report.methods) {
        nlohmann::json reps = nlohmann::json::array();
        for (const auto &r : m.reps) {
            reps.push_back({{"auc", r.auc},
                            {"train_ms", r.train_ms},
                            {"test_ms_per_100", r.test_ms_per_100},
                            {"bytes", r.bytes},
                            {"h", r.h},
                            {"h_quantile", r.h_quantile},
                            {"k", r.k},
                            {"n_sv", r.n_sv}});
        }
        nlohmann::json jm = {{"method", m.method},
                             {"auc", stat_json(m.auc)},
                             {"train_ms_per_100", stat_json(m.train_ms_per_100)},
                             {"test_ms_per_100", stat_json(m.test_ms_per_100)},
                             {"bytes", stat_json(m.bytes)},
                             {"reps", reps}};
        if (m.auc_retained) {
            jm["ratios"] = {{"auc_retained", stat_json(*m.auc_retained)},
                            {"train_speedup", stat_json(*m.train_speedup)},
                            {"test_speedup", stat_json(*m.test_speedup)},
                            {"space_reduction", stat_json(*m.space_reduction)}};
        }
        methods.push_back(jm);
    }
    return {{"scenario", report.scenario},
            {"n_train", report.n_train},
            {"n_test", report.n_test},
            {"reps", report.reps},
            {"timing_repeats", report.timing_repeats},
            {"threads", report.threads},
            {"methods", methods}};
}

inline EvalReport report_from_json(const nlohmann::json &j) {
    EvalReport report;
    report.scenario = j.at("scenario").get<std::string>();
    report.n_train = j.at("n_train").get<Index>();
    report.n_test = j.at("n_test").get<Index>();
    report.reps = j.at("reps").get<int>();
    report.timing_repeats = j.at("timing_repeats").get<int>();
    report.threads = j.at("threads").get<int>();
    for (const auto &jm : j.at("methods")) {
        MethodReport m;
        m.method = jm.at("method").get<std::string>();
        m.auc = stat_from_json(jm.at("auc"));
        m.train_ms_per_100 = stat_from_json(jm.at("train_ms_per_100"));
        m.test_ms_per_100 = stat_from_json(jm.at("test_ms_per_100"));
        m.bytes = stat_from_json(jm.at("bytes"));
        for (const auto &jr : jm.at("reps")) {
            RepResult r;
            r.auc = jr.at("auc").get<double>();
            r.train_ms = jr.at("train_ms").get<double>();
            r.test_ms_per_100 = jr.at("test_ms_per_100").get<double>();
            r.bytes = jr.at("bytes").get<double>();
            r.h = jr.at("h").get<double>();
            r.h_quantile = jr.at("h_quantile").get<double>();
            r.k = jr.at("k").get<Index>();
            r.n_sv = jr.at("n_sv").get<Index>();
            m.reps.push_back(r);
        }
        if (jm.contains("ratios")) {
            const auto &jr = jm.at("ratios");
            m.auc_retained = stat_from_json(jr.at("auc_retained"));
            m.train_speedup = stat_from_json(jr.at("train_speedup"));
            m.test_speedup = stat_from_json(jr.at("test_speedup"));
            m.space_reduction = stat_from_json(jr.at("space_reduction"));
        }
        report.methods.push_back(std::move(m));
    }
    return report;
}

enum class ReportFormat { JSON, MARKDOWN };

namespace detail {

inline std::string pm(const Stat &s, double scale = 1.0) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f ± %.2f", s.mean * scale, s.std * scale);
    return buf;
}

inline std::string pm(const std::optional<Stat> &s) { return s ? pm(*s) : "-"; }

} // namespace detail

/// JSON keeps full precision; the markdown table shows mean ± std with
/// two decimals, times in ms per 100 points and sizes in kB.
inline std::string emit_report(const EvalReport &report, ReportFormat format) {
    if (format == ReportFormat::JSON) {
        return report_json(report).dump(2) + "\n";
    }
    std::ostringstream os;
    os << "| Method | AUC | Train (ms/100) | Test (ms/100) | Size (kB) | AUC retained | Train speedup "
          "| Test speedup | Space reduction |\n";
    os << "|---|---|---|---|---|---|---|---|---|\n";
    for (const auto &m : report.methods) {
        os << "| " << m.method << " | " << detail::pm(m.auc) << " | " << detail::pm(m.train_ms_per_100) << " | "
           << detail::pm(m.test_ms_per_100) << " | " << detail::pm(m.bytes, 1e-3) << " | "
           << detail::pm(m.auc_retained) << " | " << detail::pm(m.train_speedup) << " | "
           << detail::pm(m.test_speedup) << " | " << detail::pm(m.space_reduction) << " |\n";
    }
    return os.str();
}

} // namespace ockjl

#endif // OCKJL_EVAL_HPP
