// common.hpp
//
// Shared types for the ockjl library: dense matrices, the error
// hierarchy, seeded random streams, nearest-rank quantiles and the
// little-endian byte codec used by the model files.

#ifndef OCKJL_COMMON_HPP
#define OCKJL_COMMON_HPP

#include <Eigen/Core>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ockjl {

/// Points are stored one per row, contiguous in memory.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// base class of every error raised by the library
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// caller passed arguments that violate an operation's preconditions
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// input bytes or text could not be decoded
class ParseError : public Error {
public:
    using Error::Error;
};

/// the data is degenerate for the requested computation
class DegenerateData : public Error {
public:
    using Error::Error;
};

inline void require(bool condition, const std::string &message) {
    if (!condition) {
        throw InvalidArgument{message};
    }
}

/// Every stochastic routine takes an explicit seed and builds its own
/// generator; nothing in the library touches global random state.
using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    return Rng{seq};
}

/// Derives an independent stream seed from a parent seed and a tag.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Uniform draw of `count` distinct indices from [0, n), in draw order.
inline std::vector<Index> sample_without_replacement(Index n, Index count, Rng &rng) {
    require(count >= 0 && count <= n, "sample size exceeds population");
    std::vector<Index> pool(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        pool[static_cast<std::size_t>(i)] = i;
    }
    // partial Fisher-Yates
    for (Index i = 0; i < count; ++i) {
        std::uniform_int_distribution<Index> pick{i, n - 1};
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
    }
    pool.resize(static_cast<std::size_t>(count));
    return pool;
}

/// 1-based rank ceil(q*M) clamped to [1, M].
inline std::size_t nearest_rank_index(std::size_t count, double q) {
    auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(count) - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, count);
    return rank - 1;
}

/// Nearest-rank quantile of an already ascending sequence.
inline double nearest_rank_sorted(std::span<const double> ascending, double q) {
    if (ascending.empty()) {
        throw InvalidArgument{"quantile of an empty sequence"};
    }
    require(q > 0.0 && q <= 1.0, "quantile level must lie in (0, 1]");
    return ascending[nearest_rank_index(ascending.size(), q)];
}

/// Nearest-rank quantile: value at 1-based index ceil(q*M) of the
/// ascending order. Takes its argument by value and selects in place.
inline double nearest_rank(std::vector<double> values, double q) {
    if (values.empty()) {
        throw InvalidArgument{"quantile of an empty sequence"};
    }
    require(q > 0.0 && q <= 1.0, "quantile level must lie in (0, 1]");
    auto pos = values.begin() + static_cast<std::ptrdiff_t>(nearest_rank_index(values.size(), q));
    std::nth_element(values.begin(), pos, values.end());
    return *pos;
}

inline Matrix select_rows(const Matrix &X, std::span<const Index> rows) {
    Matrix out(static_cast<Index>(rows.size()), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Index>(i)) = X.row(rows[i]);
    }
    return out;
}

inline bool all_finite(const Matrix &X) {
    return X.allFinite();
}

// ---------------------------------------------------------------------
// little-endian byte codec

class ByteWriter {
public:
    void put_bytes(std::span<const std::uint8_t> bytes) {
        buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
    }

    void put_u8(std::uint8_t v) { buffer_.push_back(v); }

    void put_u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            buffer_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }

    void put_f64(double v) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) {
            buffer_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
        }
    }

    template <typename Derived>
    void put_f64s(const Eigen::DenseBase<Derived> &values) {
        // row-major traversal regardless of the expression's storage order
        for (Index r = 0; r < values.rows(); ++r) {
            for (Index c = 0; c < values.cols(); ++c) {
                put_f64(values(r, c));
            }
        }
    }

    std::vector<std::uint8_t> take() { return std::move(buffer_); }
    std::size_t size() const { return buffer_.size(); }

private:
    std::vector<std::uint8_t> buffer_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_{bytes} {}

    std::span<const std::uint8_t> get_bytes(std::size_t n) {
        need(n);
        auto out = bytes_.subspan(offset_, n);
        offset_ += n;
        return out;
    }

    std::uint8_t get_u8() {
        need(1);
        return bytes_[offset_++];
    }

    std::uint32_t get_u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(bytes_[offset_++]) << (8 * i);
        }
        return v;
    }

    double get_f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) {
            bits |= static_cast<std::uint64_t>(bytes_[offset_++]) << (8 * i);
        }
        return std::bit_cast<double>(bits);
    }

    void get_f64s(Matrix &out) {
        for (Index r = 0; r < out.rows(); ++r) {
            for (Index c = 0; c < out.cols(); ++c) {
                out(r, c) = get_f64();
            }
        }
    }

    void get_f64s(Vector &out) {
        for (Index i = 0; i < out.size(); ++i) {
            out(i) = get_f64();
        }
    }

    std::size_t offset() const { return offset_; }
    std::size_t remaining() const { return bytes_.size() - offset_; }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - offset_ < n) {
            throw ParseError{"truncated payload at byte offset " + std::to_string(offset_)};
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t offset_ = 0;
};

} // namespace ockjl

#endif // OCKJL_COMMON_HPP
