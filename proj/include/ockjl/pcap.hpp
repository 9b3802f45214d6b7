// pcap.hpp
//
// Packet ingestion: classic libpcap captures (Ethernet II / IPv4 /
// TCP|UDP) and the canonical packet-record CSV.

#ifndef OCKJL_PCAP_HPP
#define OCKJL_PCAP_HPP

#include "ockjl/common.hpp"

#include <array>
#include <charconv>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace ockjl {

enum class Proto : std::uint8_t { TCP = 6, UDP = 17 };

namespace tcp_flag {
inline constexpr std::uint8_t FIN = 0x01;
inline constexpr std::uint8_t SYN = 0x02;
inline constexpr std::uint8_t RST = 0x04;
inline constexpr std::uint8_t PSH = 0x08;
inline constexpr std::uint8_t ACK = 0x10;
inline constexpr std::uint8_t URG = 0x20;
inline constexpr std::uint8_t ECE = 0x40;
inline constexpr std::uint8_t CWR = 0x80;
} // namespace tcp_flag

/// IPv4 address in host order (10.0.0.1 == 0x0a000001).
using Ipv4 = std::uint32_t;

struct PacketRecord {
    std::int64_t timestamp_us = 0;
    Ipv4 src_ip = 0;
    Ipv4 dst_ip = 0;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    Proto proto = Proto::TCP;
    std::uint32_t size_bytes = 0; // IPv4 total length
    std::uint8_t ttl = 0;
    std::uint8_t tcp_flags = 0;

    bool operator==(const PacketRecord &) const = default;
};

inline std::string format_ipv4(Ipv4 ip) {
    return std::to_string((ip >> 24) & 0xff) + "." + std::to_string((ip >> 16) & 0xff) + "." +
           std::to_string((ip >> 8) & 0xff) + "." + std::to_string(ip & 0xff);
}

inline bool parse_ipv4(std::string_view text, Ipv4 &out) {
    Ipv4 value = 0;
    int octets = 0;
    const char *p = text.data();
    const char *end = text.data() + text.size();
    while (octets < 4) {
        unsigned octet = 0;
        auto [next, ec] = std::from_chars(p, end, octet);
        if (ec != std::errc{} || next == p || octet > 255) {
            return false;
        }
        value = (value << 8) | octet;
        ++octets;
        p = next;
        if (octets < 4) {
            if (p == end || *p != '.') {
                return false;
            }
            ++p;
        }
    }
    if (p != end) {
        return false;
    }
    out = value;
    return true;
}

inline std::string_view proto_name(Proto p) { return p == Proto::TCP ? "TCP" : "UDP"; }

// ---------------------------------------------------------------------
// libpcap

namespace detail {

struct PcapLayout {
    bool swapped = false;
    bool nanosecond = false;
};

inline std::uint32_t load_u32(std::span<const std::uint8_t> b, std::size_t at, bool big_endian) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        int shift = big_endian ? 8 * (3 - i) : 8 * i;
        v |= static_cast<std::uint32_t>(b[at + static_cast<std::size_t>(i)]) << shift;
    }
    return v;
}

inline std::uint16_t load_be16(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

inline std::uint32_t load_be32(std::span<const std::uint8_t> b, std::size_t at) {
    return load_u32(b, at, true);
}

/// Decodes one captured Ethernet frame; false when the frame is not
/// Ethernet II / IPv4 / {TCP, UDP} or lacks the headers we need.
inline bool decode_frame(std::span<const std::uint8_t> frame, std::int64_t ts_us, PacketRecord &out) {
    constexpr std::size_t eth_len = 14;
    if (frame.size() < eth_len + 20) {
        return false;
    }
    if (load_be16(frame, 12) != 0x0800) {
        return false;
    }
    auto ip = frame.subspan(eth_len);
    if ((ip[0] >> 4) != 4) {
        return false;
    }
    std::size_t ihl = static_cast<std::size_t>(ip[0] & 0x0f) * 4;
    if (ihl < 20 || ip.size() < ihl) {
        return false;
    }
    std::uint16_t frag = load_be16(ip, 6);
    bool more_fragments = (frag & 0x2000) != 0;
    if (more_fragments || (frag & 0x1fff) != 0) {
        return false;
    }
    std::uint8_t proto = ip[9];
    if (proto != 6 && proto != 17) {
        return false;
    }
    auto l4 = ip.subspan(ihl);
    std::size_t l4_need = proto == 6 ? 14 : 8;
    if (l4.size() < l4_need) {
        return false;
    }
    std::uint16_t total_length = load_be16(ip, 2);
    if (total_length < 20) {
        return false;
    }
    out.timestamp_us = ts_us;
    out.ttl = ip[8];
    out.size_bytes = total_length;
    out.src_ip = load_be32(ip, 12);
    out.dst_ip = load_be32(ip, 16);
    out.src_port = load_be16(l4, 0);
    out.dst_port = load_be16(l4, 2);
    out.proto = proto == 6 ? Proto::TCP : Proto::UDP;
    out.tcp_flags = proto == 6 ? l4[13] : 0;
    return true;
}

} // namespace detail

/// Parses a classic libpcap capture. Frames that are not Ethernet II /
/// IPv4 / {TCP, UDP}, and IPv4 fragments, are skipped.
inline std::vector<PacketRecord> parse_pcap(std::span<const std::uint8_t> bytes) {
    constexpr std::size_t global_len = 24;
    constexpr std::size_t record_len = 16;
    if (bytes.size() < global_len) {
        throw ParseError{"pcap: global header truncated (" + std::to_string(bytes.size()) + " bytes)"};
    }
    // the magic as read little-endian tells us both byte order and resolution
    std::uint32_t magic = detail::load_u32(bytes, 0, false);
    detail::PcapLayout layout;
    switch (magic) {
    case 0xa1b2c3d4: break;
    case 0xd4c3b2a1: layout.swapped = true; break;
    case 0xa1b23c4d: layout.nanosecond = true; break;
    case 0x4d3cb2a1: layout.swapped = true; layout.nanosecond = true; break;
    default:
        throw ParseError{"pcap: unrecognized magic number"};
    }
    std::uint32_t linktype = detail::load_u32(bytes, 20, layout.swapped);
    if ((linktype & 0x0fffffff) != 1) {
        throw ParseError{"pcap: unsupported link type " + std::to_string(linktype) + " (Ethernet required)"};
    }

    std::vector<PacketRecord> out;
    std::size_t offset = global_len;
    while (offset < bytes.size()) {
        if (bytes.size() - offset < record_len) {
            throw ParseError{"pcap: truncated record header at byte offset " + std::to_string(offset)};
        }
        std::uint32_t ts_sec = detail::load_u32(bytes, offset, layout.swapped);
        std::uint32_t ts_frac = detail::load_u32(bytes, offset + 4, layout.swapped);
        std::uint32_t incl_len = detail::load_u32(bytes, offset + 8, layout.swapped);
        if (bytes.size() - offset - record_len < incl_len) {
            throw ParseError{"pcap: truncated packet data at byte offset " + std::to_string(offset)};
        }
        std::int64_t frac_us = layout.nanosecond ? ts_frac / 1000 : ts_frac;
        std::int64_t ts_us = static_cast<std::int64_t>(ts_sec) * 1000000 + frac_us;
        PacketRecord rec;
        if (detail::decode_frame(bytes.subspan(offset + record_len, incl_len), ts_us, rec)) {
            out.push_back(rec);
        }
        offset += record_len + incl_len;
    }
    return out;
}

// ---------------------------------------------------------------------
// packet CSV

inline constexpr std::string_view packet_csv_header =
    "timestamp_us,src_ip,src_port,dst_ip,dst_port,proto,size_bytes,ttl,tcp_flags";

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line, char sep = ',') {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

template <typename T>
bool parse_integer(std::string_view text, T &out) {
    const char *end = text.data() + text.size();
    auto [p, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc{} && p == end && !text.empty();
}

/// Splits on LF, dropping a trailing CR from each line.
inline std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        auto pos = text.find('\n', start);
        auto line = text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        lines.push_back(line);
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return lines;
}

} // namespace detail

inline std::vector<PacketRecord> parse_packet_csv(std::string_view text) {
    auto lines = detail::split_lines(text);
    if (lines.empty() || lines.front() != packet_csv_header) {
        throw ParseError{"packet csv: line 1: expected header '" + std::string{packet_csv_header} + "'"};
    }
    std::vector<PacketRecord> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto line = lines[i];
        if (line.empty()) {
            continue;
        }
        auto where = "packet csv: line " + std::to_string(i + 1) + ": ";
        auto f = detail::split_fields(line);
        if (f.size() != 9) {
            throw ParseError{where + "expected 9 fields, got " + std::to_string(f.size())};
        }
        PacketRecord r;
        unsigned src_port = 0, dst_port = 0, ttl = 0, flags = 0;
        if (!detail::parse_integer(f[0], r.timestamp_us) || r.timestamp_us < 0) {
            throw ParseError{where + "bad timestamp_us"};
        }
        if (!parse_ipv4(f[1], r.src_ip)) {
            throw ParseError{where + "bad src_ip"};
        }
        if (!detail::parse_integer(f[2], src_port) || src_port > 65535) {
            throw ParseError{where + "bad src_port"};
        }
        if (!parse_ipv4(f[3], r.dst_ip)) {
            throw ParseError{where + "bad dst_ip"};
        }
        if (!detail::parse_integer(f[4], dst_port) || dst_port > 65535) {
            throw ParseError{where + "bad dst_port"};
        }
        if (f[5] == "TCP") {
            r.proto = Proto::TCP;
        } else if (f[5] == "UDP") {
            r.proto = Proto::UDP;
        } else {
            throw ParseError{where + "unknown proto '" + std::string{f[5]} + "'"};
        }
        if (!detail::parse_integer(f[6], r.size_bytes) || r.size_bytes < 20) {
            throw ParseError{where + "bad size_bytes"};
        }
        if (!detail::parse_integer(f[7], ttl) || ttl > 255) {
            throw ParseError{where + "bad ttl"};
        }
        if (!detail::parse_integer(f[8], flags) || flags > 255) {
            throw ParseError{where + "bad tcp_flags"};
        }
        if (r.proto == Proto::UDP && flags != 0) {
            throw ParseError{where + "tcp_flags must be 0 for UDP"};
        }
        r.src_port = static_cast<std::uint16_t>(src_port);
        r.dst_port = static_cast<std::uint16_t>(dst_port);
        r.ttl = static_cast<std::uint8_t>(ttl);
        r.tcp_flags = static_cast<std::uint8_t>(flags);
        out.push_back(r);
    }
    return out;
}

inline std::string write_packet_csv(std::span<const PacketRecord> records) {
    std::ostringstream os;
    os << packet_csv_header << '\n';
    for (const auto &r : records) {
        os << r.timestamp_us << ',' << format_ipv4(r.src_ip) << ',' << r.src_port << ','
           << format_ipv4(r.dst_ip) << ',' << r.dst_port << ',' << proto_name(r.proto) << ','
           << r.size_bytes << ',' << static_cast<unsigned>(r.ttl) << ','
           << static_cast<unsigned>(r.tcp_flags) << '\n';
    }
    return os.str();
}

} // namespace ockjl

#endif // OCKJL_PCAP_HPP
