// detector.hpp
//
// OC-Nystrom / OC-KJL detectors: embed normal data, choose the number of
// mixture components (fixed or via Quickshift++), fit a GMM, and flag
// points whose embedded log-density falls below a threshold. Also holds
// the binary model formats for detectors and the OCSVM baseline.

#ifndef OCKJL_DETECTOR_HPP
#define OCKJL_DETECTOR_HPP

#include "ockjl/common.hpp"
#include "ockjl/embedding.hpp"
#include "ockjl/gmm.hpp"
#include "ockjl/kernel.hpp"
#include "ockjl/model_format.hpp"
#include "ockjl/ocsvm.hpp"
#include "ockjl/quickshift.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace ockjl {

/// Kernel bandwidth given directly or as a quantile of interpoint
/// distances of the training data.
struct Bandwidth {
    enum class Mode { Explicit, Quantile };
    Mode mode = Mode::Quantile;
    double value = 0.25;

    static Bandwidth fixed(double h) { return {Mode::Explicit, h}; }
    static Bandwidth quantile(double q) { return {Mode::Quantile, q}; }

    double resolve(const Matrix &X) const {
        if (mode == Mode::Explicit) {
            detail::check_bandwidth(value);
            return value;
        }
        require(value > 0.0 && value <= 1.0, "bandwidth quantile must lie in (0, 1]");
        return quantile_bandwidth(X, value);
    }
};

struct DetectorConfig {
    EmbeddingKind kind = EmbeddingKind::KJL;
    Index m = 100;
    Index d = 5;
    Bandwidth bandwidth;
    std::optional<Index> fixed_k; // empty: choose k with Quickshift++
    QsConfig qs;
    EmOptions em;
    std::uint64_t seed = 0;
};

struct DetectorModel {
    EmbeddingModel embedding;
    GmmModel gmm;
    std::optional<double> threshold; // log-density units

    Index input_dim() const { return embedding.input_dim(); }
};

struct TrainingInfo {
    double h = 0.0;
    Index k = 0;
    EmDiagnostics em;
};

inline DetectorModel train_detector(const Matrix &X, const DetectorConfig &config, TrainingInfo *info = nullptr) {
    require(X.rows() >= config.m, "train_detector: fewer training points than landmarks");
    require(config.d <= config.m, "train_detector: d exceeds m");
    const double h = config.bandwidth.resolve(X);
    DetectorModel model;
    model.embedding = fit_embedding(config.kind, X, config.m, config.d, h, derive_seed(config.seed, 10));
    const Matrix Z = embed(model.embedding, X);

    EmOptions em = config.em;
    em.seed = derive_seed(config.seed, 11);
    EmDiagnostics diag;
    if (config.fixed_k) {
        model.gmm = fit_em(Z, *config.fixed_k, std::nullopt, em, &diag);
    } else {
        auto ak = auto_k(Z, config.qs);
        model.gmm = fit_em(Z, ak.k, ak.init, em, &diag);
    }
    if (info) {
        *info = TrainingInfo{h, model.gmm.k(), std::move(diag)};
    }
    return model;
}

/// Log-density of each embedded row; higher means more normal.
inline Vector detect_scores(const DetectorModel &model, const Matrix &X) {
    require(X.cols() == model.input_dim(), "detect: feature dimension does not match the model");
    return log_pdf(model.gmm, embed(model.embedding, X));
}

template <typename Derived>
double detect_score(const DetectorModel &model, const Eigen::MatrixBase<Derived> &x) {
    Matrix row(1, x.size());
    for (Index j = 0; j < x.size(); ++j) {
        row(0, j) = x(j);
    }
    return detect_scores(model, row)(0);
}

/// Nearest-rank target_fpr quantile of the ascending scores; with the
/// strict "score < t" rule at most that fraction of them is flagged.
inline double choose_threshold(std::span<const double> normal_scores, double target_fpr = 0.05) {
    if (normal_scores.empty()) {
        throw InvalidArgument{"choose_threshold: no scores"};
    }
    require(target_fpr >= 0.0 && target_fpr <= 1.0, "choose_threshold: target must lie in [0, 1]");
    std::vector<double> s(normal_scores.begin(), normal_scores.end());
    std::sort(s.begin(), s.end());
    return s[nearest_rank_index(s.size(), target_fpr)];
}

inline double choose_threshold(const DetectorModel &model, const Matrix &X_normal, double target_fpr = 0.05) {
    const Vector s = detect_scores(model, X_normal);
    return choose_threshold(std::span<const double>{s.data(), static_cast<std::size_t>(s.size())}, target_fpr);
}

enum class Verdict { NORMAL, NOVEL };

inline Verdict classify_score(double score, double threshold) {
    return score < threshold ? Verdict::NOVEL : Verdict::NORMAL;
}

template <typename Derived>
Verdict classify(const DetectorModel &model, const Eigen::MatrixBase<Derived> &x) {
    if (!model.threshold) {
        throw InvalidArgument{"classify: model has no threshold"};
    }
    return classify_score(detect_score(model, x), *model.threshold);
}

// ---------------------------------------------------------------------
// model files

inline std::size_t detector_bytes(const DetectorModel &model) {
    return embedding_bytes(model.embedding) + gmm_bytes(model.gmm) + (model.threshold ? 8 : 0);
}

inline std::vector<std::uint8_t> serialize(const DetectorModel &model) {
    const auto &e = model.embedding;
    const auto &g = model.gmm;
    require(g.dim() == e.d(), "serialize: mixture dimension differs from embedding dimension");
    ByteWriter w;
    w.put_bytes(format::detector_magic);
    w.put_u8(format::version);
    auto kind = static_cast<std::uint8_t>(e.kind);
    if (model.threshold) {
        kind |= format::threshold_bit;
    }
    w.put_u8(kind);
    w.put_u32(static_cast<std::uint32_t>(e.m()));
    w.put_u32(static_cast<std::uint32_t>(e.d()));
    w.put_u32(static_cast<std::uint32_t>(e.input_dim()));
    w.put_u32(static_cast<std::uint32_t>(g.k()));
    w.put_f64s(e.landmarks);
    w.put_f64s(e.P);
    w.put_f64(e.h);
    w.put_f64s(g.pi().transpose());
    w.put_f64s(g.mu());
    for (const auto &S : g.sigma()) {
        w.put_f64s(S);
    }
    if (model.threshold) {
        w.put_f64(*model.threshold);
    }
    return w.take();
}

inline std::vector<std::uint8_t> serialize(const OcsvmModel &model) {
    ByteWriter w;
    w.put_bytes(format::ocsvm_magic);
    w.put_u8(format::version);
    w.put_u32(static_cast<std::uint32_t>(model.n_sv()));
    w.put_u32(static_cast<std::uint32_t>(model.input_dim()));
    w.put_f64s(model.support_vectors);
    w.put_f64s(model.alpha.transpose());
    w.put_f64(model.rho);
    w.put_f64(model.h);
    return w.take();
}

namespace detail {

inline void expect_magic(ByteReader &r, std::span<const std::uint8_t, 4> magic, const char *what) {
    auto got = r.get_bytes(4);
    if (!std::equal(got.begin(), got.end(), magic.begin())) {
        throw ParseError{std::string{what} + ": bad magic"};
    }
    if (r.get_u8() != format::version) {
        throw ParseError{std::string{what} + ": unsupported version"};
    }
}

inline void expect_end(const ByteReader &r, const char *what) {
    if (r.remaining() != 0) {
        throw ParseError{std::string{what} + ": " + std::to_string(r.remaining()) + " trailing bytes"};
    }
}

} // namespace detail

inline DetectorModel deserialize_detector(std::span<const std::uint8_t> bytes) {
    ByteReader r{bytes};
    detail::expect_magic(r, format::detector_magic, "detector model");
    const std::uint8_t kind = r.get_u8();
    const bool has_threshold = (kind & format::threshold_bit) != 0;
    const std::uint8_t base = kind & static_cast<std::uint8_t>(~format::threshold_bit);
    if (base > 1) {
        throw ParseError{"detector model: unknown embedding kind " + std::to_string(base)};
    }
    const Index m = r.get_u32(), d = r.get_u32(), D = r.get_u32(), k = r.get_u32();
    if (m == 0 || d == 0 || D == 0 || k == 0 || d > m) {
        throw ParseError{"detector model: invalid dimensions"};
    }
    // 128-bit so that corrupt dimensions cannot wrap the size check
    using Wide = unsigned __int128;
    const Wide wm = static_cast<Wide>(m), wd = static_cast<Wide>(d), wD = static_cast<Wide>(D);
    const Wide expected = format::detector_header_bytes +
                          8 * (wm * (wD + wd) + 1 + static_cast<Wide>(k) * (1 + wd + wd * wd)) +
                          (has_threshold ? 8 : 0);
    if (static_cast<Wide>(bytes.size()) < expected) {
        throw ParseError{"detector model: truncated payload (" + std::to_string(bytes.size()) + " bytes)"};
    }
    DetectorModel model;
    auto &e = model.embedding;
    e.kind = static_cast<EmbeddingKind>(base);
    e.landmarks.resize(m, D);
    r.get_f64s(e.landmarks);
    e.P.resize(d, m);
    r.get_f64s(e.P);
    e.h = r.get_f64();
    Vector pi(k);
    r.get_f64s(pi);
    Matrix mu(k, d);
    r.get_f64s(mu);
    std::vector<Matrix> sigma(static_cast<std::size_t>(k), Matrix(d, d));
    for (auto &S : sigma) {
        r.get_f64s(S);
    }
    if (has_threshold) {
        model.threshold = r.get_f64();
    }
    detail::expect_end(r, "detector model");
    model.gmm = GmmModel{std::move(pi), std::move(mu), std::move(sigma)};
    return model;
}

inline OcsvmModel deserialize_ocsvm(std::span<const std::uint8_t> bytes) {
    ByteReader r{bytes};
    detail::expect_magic(r, format::ocsvm_magic, "ocsvm model");
    const Index nsv = r.get_u32(), D = r.get_u32();
    if (nsv == 0 || D == 0) {
        throw ParseError{"ocsvm model: invalid dimensions"};
    }
    const std::size_t expected = format::ocsvm_header_bytes + 8 * static_cast<std::size_t>(nsv * (D + 1) + 2);
    if (bytes.size() < expected) { // nsv, D < 2^32 so this cannot wrap
        throw ParseError{"ocsvm model: truncated payload"};
    }
    OcsvmModel model;
    model.support_vectors.resize(nsv, D);
    r.get_f64s(model.support_vectors);
    model.alpha.resize(nsv);
    r.get_f64s(model.alpha);
    model.rho = r.get_f64();
    model.h = r.get_f64();
    model.nu = 0.0;
    detail::expect_end(r, "ocsvm model");
    return model;
}

using AnyModel = std::variant<DetectorModel, OcsvmModel>;

/// Dispatches on the file magic.
inline AnyModel deserialize_any(std::span<const std::uint8_t> bytes) {
    if (bytes.size() >= 4 && std::equal(format::ocsvm_magic.begin(), format::ocsvm_magic.end(), bytes.begin())) {
        return deserialize_ocsvm(bytes);
    }
    return deserialize_detector(bytes);
}

} // namespace ockjl

#endif // OCKJL_DETECTOR_HPP
