// test_util.hpp - helpers shared by the unit and acceptance suites

#ifndef OCKJL_TEST_UTIL_HPP
#define OCKJL_TEST_UTIL_HPP

#include "ockjl/common.hpp"
#include "ockjl/pcap.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace ockjl::testing {

/// Builds classic libpcap captures byte by byte, in either byte order.
class PcapBuilder {
public:
    explicit PcapBuilder(bool big_endian = false, bool nanosecond = false)
        : big_{big_endian}, nano_{nanosecond} {
        u32(nano_ ? 0xa1b23c4d : 0xa1b2c3d4);
        u16(2);
        u16(4);
        u32(0);     // thiszone
        u32(0);     // sigfigs
        u32(65535); // snaplen
        u32(1);     // LINKTYPE_ETHERNET
    }

    /// Appends an Ethernet II / IPv4 / {TCP,UDP} frame. The IPv4 total
    /// length is `ip_total_length`; the frame carries exactly that many
    /// bytes after the Ethernet header.
    PcapBuilder &packet(std::uint32_t sec, std::uint32_t frac, const PacketRecord &r, std::uint16_t ip_total_length,
                        std::uint8_t ihl_words = 5, std::uint16_t ethertype = 0x0800, std::uint8_t ip_proto = 0) {
        std::vector<std::uint8_t> f;
        for (int i = 0; i < 12; ++i) {
            f.push_back(static_cast<std::uint8_t>(i)); // dst + src MAC
        }
        be16(f, ethertype);
        const std::size_t ip_start = f.size();
        f.push_back(static_cast<std::uint8_t>(0x40 | ihl_words));
        f.push_back(0);
        be16(f, ip_total_length);
        be16(f, 0x1234); // id
        be16(f, 0x4000); // DF
        f.push_back(r.ttl);
        f.push_back(ip_proto ? ip_proto : static_cast<std::uint8_t>(r.proto));
        be16(f, 0); // checksum
        be32(f, r.src_ip);
        be32(f, r.dst_ip);
        for (int i = 5; i < ihl_words; ++i) {
            be32(f, 0x01010101); // NOP options
        }
        be16(f, r.src_port);
        be16(f, r.dst_port);
        if (r.proto == Proto::TCP) {
            be32(f, 1);    // seq
            be32(f, 0);    // ack
            f.push_back(0x50);
            f.push_back(r.tcp_flags);
            be16(f, 1024); // window
            be16(f, 0);
            be16(f, 0);
        } else {
            be16(f, static_cast<std::uint16_t>(ip_total_length - ihl_words * 4));
            be16(f, 0);
        }
        while (f.size() - ip_start < ip_total_length) {
            f.push_back(0xab);
        }
        u32(sec);
        u32(frac);
        u32(static_cast<std::uint32_t>(f.size()));
        u32(static_cast<std::uint32_t>(f.size()));
        bytes_.insert(bytes_.end(), f.begin(), f.end());
        return *this;
    }

    PcapBuilder &raw_record(std::uint32_t sec, std::uint32_t frac, std::vector<std::uint8_t> frame) {
        u32(sec);
        u32(frac);
        u32(static_cast<std::uint32_t>(frame.size()));
        u32(static_cast<std::uint32_t>(frame.size()));
        bytes_.insert(bytes_.end(), frame.begin(), frame.end());
        return *this;
    }

    const std::vector<std::uint8_t> &bytes() const { return bytes_; }

private:
    void u16(std::uint16_t v) {
        if (big_) {
            bytes_.push_back(static_cast<std::uint8_t>(v >> 8));
            bytes_.push_back(static_cast<std::uint8_t>(v));
        } else {
            bytes_.push_back(static_cast<std::uint8_t>(v));
            bytes_.push_back(static_cast<std::uint8_t>(v >> 8));
        }
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            int shift = big_ ? 8 * (3 - i) : 8 * i;
            bytes_.push_back(static_cast<std::uint8_t>(v >> shift));
        }
    }
    static void be16(std::vector<std::uint8_t> &f, std::uint16_t v) {
        f.push_back(static_cast<std::uint8_t>(v >> 8));
        f.push_back(static_cast<std::uint8_t>(v));
    }
    static void be32(std::vector<std::uint8_t> &f, std::uint32_t v) {
        for (int i = 3; i >= 0; --i) {
            f.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }

    bool big_;
    bool nano_;
    std::vector<std::uint8_t> bytes_;
};

inline PacketRecord udp_example() {
    PacketRecord r;
    r.timestamp_us = 1000000;
    r.src_ip = 0x0a000001;
    r.dst_ip = 0x0a000002;
    r.src_port = 53;
    r.dst_port = 4000;
    r.proto = Proto::UDP;
    r.size_bytes = 60;
    r.ttl = 64;
    r.tcp_flags = 0;
    return r;
}

inline PacketRecord random_record(Rng &rng) {
    std::uniform_int_distribution<std::uint32_t> u32;
    std::uniform_int_distribution<int> byte{0, 255};
    std::uniform_int_distribution<int> port{0, 65535};
    PacketRecord r;
    r.timestamp_us = std::uniform_int_distribution<std::int64_t>{0, 4'000'000'000'000'000LL}(rng);
    r.src_ip = u32(rng);
    r.dst_ip = u32(rng);
    r.src_port = static_cast<std::uint16_t>(port(rng));
    r.dst_port = static_cast<std::uint16_t>(port(rng));
    r.proto = byte(rng) % 2 ? Proto::TCP : Proto::UDP;
    r.size_bytes = std::uniform_int_distribution<std::uint32_t>{20, 65535}(rng);
    r.ttl = static_cast<std::uint8_t>(byte(rng));
    r.tcp_flags = r.proto == Proto::TCP ? static_cast<std::uint8_t>(byte(rng)) : 0;
    return r;
}

inline Matrix gaussian_matrix(Index rows, Index cols, Rng &rng, double scale = 1.0) {
    std::normal_distribution<double> n{0.0, scale};
    Matrix X(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) {
            X(i, j) = n(rng);
        }
    }
    return X;
}

} // namespace ockjl::testing

#endif // OCKJL_TEST_UTIL_HPP
