// flows.hpp
//
// Bidirectional flow assembly, duration truncation and the three flow
// representations (IAT+SIZE, STATS+HEADER, SAMP-SIZE).

#ifndef OCKJL_FLOWS_HPP
#define OCKJL_FLOWS_HPP

#include "ockjl/common.hpp"
#include "ockjl/pcap.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace ockjl {

/// Canonical 5-tuple: the lexicographically smaller (ip, port) endpoint
/// comes first, so both directions of a conversation share one key.
struct FlowKey {
    Ipv4 ip_lo = 0;
    std::uint16_t port_lo = 0;
    Ipv4 ip_hi = 0;
    std::uint16_t port_hi = 0;
    Proto proto = Proto::TCP;

    static FlowKey of(const PacketRecord &p) {
        auto a = std::make_tuple(p.src_ip, p.src_port);
        auto b = std::make_tuple(p.dst_ip, p.dst_port);
        if (b < a) {
            std::swap(a, b);
        }
        return {std::get<0>(a), std::get<1>(a), std::get<0>(b), std::get<1>(b), p.proto};
    }

    auto operator<=>(const FlowKey &) const = default;
};

struct Flow {
    FlowKey key;
    std::vector<PacketRecord> packets;

    std::int64_t start_us() const { return packets.front().timestamp_us; }
    std::int64_t duration_us() const { return packets.back().timestamp_us - packets.front().timestamp_us; }
};

enum class FeatureKind { IAT_SIZE, STATS_HEADER, SAMP_SIZE };

inline std::string_view feature_kind_name(FeatureKind k) {
    switch (k) {
    case FeatureKind::IAT_SIZE: return "iat_size";
    case FeatureKind::STATS_HEADER: return "stats_header";
    case FeatureKind::SAMP_SIZE: return "samp_size";
    }
    return "?";
}

inline FeatureKind parse_feature_kind(std::string_view name) {
    if (name == "iat_size") return FeatureKind::IAT_SIZE;
    if (name == "stats_header") return FeatureKind::STATS_HEADER;
    if (name == "samp_size") return FeatureKind::SAMP_SIZE;
    throw InvalidArgument{"unknown feature kind '" + std::string{name} + "'"};
}

struct FeatureMatrix {
    FeatureKind kind = FeatureKind::IAT_SIZE;
    Matrix values; // one row per flow

    Index rows() const { return values.rows(); }
    Index dim() const { return values.cols(); }
};

/// Nearest-rank percentile: value at 1-based index ceil(q*M) of the
/// ascending order of `values`.
inline double percentile(std::span<const double> values, double q) {
    return nearest_rank(std::vector<double>(values.begin(), values.end()), q);
}

/// Groups records by canonical key. Flows appear in order of their first
/// packet; packets keep their input order after a stable sort by time.
inline std::vector<Flow> assemble_flows(std::span<const PacketRecord> records) {
    std::vector<Flow> flows;
    std::map<FlowKey, std::size_t> slot;
    for (const auto &r : records) {
        auto key = FlowKey::of(r);
        auto [it, inserted] = slot.try_emplace(key, flows.size());
        if (inserted) {
            flows.push_back(Flow{key, {}});
        }
        flows[it->second].packets.push_back(r);
    }
    for (auto &f : flows) {
        std::stable_sort(f.packets.begin(), f.packets.end(),
                         [](const PacketRecord &a, const PacketRecord &b) { return a.timestamp_us < b.timestamp_us; });
    }
    // "first packet" means earliest timestamp once sorted; ties keep encounter order
    std::stable_sort(flows.begin(), flows.end(),
                     [](const Flow &a, const Flow &b) { return a.start_us() < b.start_us(); });
    return flows;
}

inline std::vector<double> flow_durations_us(std::span<const Flow> flows) {
    std::vector<double> d;
    d.reserve(flows.size());
    for (const auto &f : flows) {
        d.push_back(static_cast<double>(f.duration_us()));
    }
    return d;
}

inline std::vector<double> flow_packet_counts(std::span<const Flow> flows) {
    std::vector<double> c;
    c.reserve(flows.size());
    for (const auto &f : flows) {
        c.push_back(static_cast<double>(f.packets.size()));
    }
    return c;
}

/// Cuts every flow at first_ts + T, T the q-percentile of flow durations.
/// Keeps the packets of each flow within `cutoff_us` of its first packet.
/// Idempotent for a fixed cutoff; the first packet always survives.
inline std::vector<Flow> truncate_flows_at(std::span<const Flow> flows, double cutoff_us) {
    std::vector<Flow> out;
    out.reserve(flows.size());
    for (const auto &f : flows) {
        Flow g{f.key, {}};
        const auto limit = static_cast<double>(f.start_us()) + cutoff_us;
        for (const auto &p : f.packets) {
            if (static_cast<double>(p.timestamp_us) <= limit) {
                g.packets.push_back(p);
            }
        }
        out.push_back(std::move(g));
    }
    return out;
}

/// Cutoff at the q-percentile of flow durations. The percentile is taken
/// over the input, so a second pass may cut further.
inline std::vector<Flow> truncate_flows(std::span<const Flow> flows, double q = 0.9) {
    require(!flows.empty(), "truncate_flows: no flows");
    return truncate_flows_at(flows, percentile(flow_durations_us(flows), q));
}

/// Number of leading packets L represented per flow: the 0.9-percentile
/// of flow packet counts.
inline Index representative_length(std::span<const Flow> flows) {
    require(!flows.empty(), "no flows");
    return static_cast<Index>(percentile(flow_packet_counts(flows), 0.9));
}

/// Row layout: [iat_1 .. iat_{L-1} | size_1 .. size_L], each block
/// zero-padded on the right. IATs in microseconds, sizes in bytes.
inline FeatureMatrix iat_size_features(std::span<const Flow> flows) {
    FeatureMatrix fm{FeatureKind::IAT_SIZE, {}};
    if (flows.empty()) {
        return fm;
    }
    const Index L = representative_length(flows);
    fm.values = Matrix::Zero(static_cast<Index>(flows.size()), 2 * L - 1);
    for (std::size_t i = 0; i < flows.size(); ++i) {
        const auto &pk = flows[i].packets;
        const auto p = std::min<Index>(static_cast<Index>(pk.size()), L);
        const auto row = static_cast<Index>(i);
        for (Index j = 1; j < p; ++j) {
            fm.values(row, j - 1) = static_cast<double>(pk[static_cast<std::size_t>(j)].timestamp_us -
                                                        pk[static_cast<std::size_t>(j - 1)].timestamp_us);
        }
        for (Index j = 0; j < p; ++j) {
            fm.values(row, L - 1 + j) = pk[static_cast<std::size_t>(j)].size_bytes;
        }
    }
    return fm;
}

inline constexpr Index stats_header_dim = 19;

/// [duration_s, pkts/s, bytes/s, mean, std, q1, q2, q3, min, max of sizes,
///  mean TTL, FIN, SYN, RST, PSH, ACK, URG, ECE, CWR counts]
inline FeatureMatrix stats_header_features(std::span<const Flow> flows) {
    FeatureMatrix fm{FeatureKind::STATS_HEADER, Matrix::Zero(static_cast<Index>(flows.size()), stats_header_dim)};
    for (std::size_t i = 0; i < flows.size(); ++i) {
        const auto &pk = flows[i].packets;
        const auto n = static_cast<double>(pk.size());
        std::vector<double> sizes;
        sizes.reserve(pk.size());
        double bytes = 0.0, ttl = 0.0;
        std::array<double, 8> flags{};
        for (const auto &p : pk) {
            sizes.push_back(p.size_bytes);
            bytes += p.size_bytes;
            ttl += p.ttl;
            for (int b = 0; b < 8; ++b) {
                if (p.tcp_flags & (1u << b)) {
                    flags[static_cast<std::size_t>(b)] += 1.0;
                }
            }
        }
        const double duration_s = static_cast<double>(flows[i].duration_us()) * 1e-6;
        const double rate_base = std::max(duration_s, 1e-6);
        const double mean = bytes / n;
        double var = 0.0;
        for (double s : sizes) {
            var += (s - mean) * (s - mean);
        }
        var /= n;
        std::sort(sizes.begin(), sizes.end());

        auto row = fm.values.row(static_cast<Index>(i));
        row(0) = duration_s;
        row(1) = n / rate_base;
        row(2) = bytes / rate_base;
        row(3) = mean;
        row(4) = std::sqrt(var);
        row(5) = nearest_rank_sorted(sizes, 0.25);
        row(6) = nearest_rank_sorted(sizes, 0.5);
        row(7) = nearest_rank_sorted(sizes, 0.75);
        row(8) = sizes.front();
        row(9) = sizes.back();
        row(10) = ttl / n;
        for (int b = 0; b < 8; ++b) {
            row(11 + b) = flags[static_cast<std::size_t>(b)];
        }
    }
    return fm;
}

/// Byte counts per time bin. The bin width is the q-percentile of flow
/// durations divided by L (floored at 1 us); D = L bins per flow.
inline FeatureMatrix samp_size_features(std::span<const Flow> flows, double q) {
    FeatureMatrix fm{FeatureKind::SAMP_SIZE, {}};
    if (flows.empty()) {
        return fm;
    }
    const Index L = representative_length(flows);
    const double width = std::max(percentile(flow_durations_us(flows), q) / static_cast<double>(L), 1.0);
    fm.values = Matrix::Zero(static_cast<Index>(flows.size()), L);
    for (std::size_t i = 0; i < flows.size(); ++i) {
        const auto start = flows[i].start_us();
        for (const auto &p : flows[i].packets) {
            auto bin = static_cast<Index>(std::floor(static_cast<double>(p.timestamp_us - start) / width));
            if (bin < L) {
                fm.values(static_cast<Index>(i), bin) += p.size_bytes;
            }
        }
    }
    return fm;
}

inline FeatureMatrix extract_features(std::span<const Flow> flows, FeatureKind kind, double samp_q = 0.9) {
    switch (kind) {
    case FeatureKind::IAT_SIZE: return iat_size_features(flows);
    case FeatureKind::STATS_HEADER: return stats_header_features(flows);
    case FeatureKind::SAMP_SIZE: return samp_size_features(flows, samp_q);
    }
    throw InvalidArgument{"unknown feature kind"};
}

} // namespace ockjl

#endif // OCKJL_FLOWS_HPP
