#ifndef FLOWSCOPE_TESTS_TRACE_BUILDER_HPP
#define FLOWSCOPE_TESTS_TRACE_BUILDER_HPP

// Synthetic frame and trace construction shared by the test suites. The
// checksum code here is written independently of the library so rewritten
// traces can be validated against it.

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "flowscope/packet.hpp"
#include "flowscope/pcap.hpp"

namespace testutil {

inline void put16(std::vector<uint8_t>& v, size_t at, uint16_t x) {
    v[at] = static_cast<uint8_t>(x >> 8);
    v[at + 1] = static_cast<uint8_t>(x);
}

inline void put32(std::vector<uint8_t>& v, size_t at, uint32_t x) {
    v[at] = static_cast<uint8_t>(x >> 24);
    v[at + 1] = static_cast<uint8_t>(x >> 16);
    v[at + 2] = static_cast<uint8_t>(x >> 8);
    v[at + 3] = static_cast<uint8_t>(x);
}

inline uint16_t checksum16(const uint8_t* data, size_t len, uint32_t seed = 0) {
    uint32_t sum = seed;
    for (size_t i = 0; i + 1 < len; i += 2)
        sum += static_cast<uint32_t>((data[i] << 8) | data[i + 1]);
    if (len % 2) sum += static_cast<uint32_t>(data[len - 1] << 8);
    while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
    return static_cast<uint16_t>(~sum);
}

struct TcpSpec {
    uint32_t src = 0, dst = 0;
    uint16_t sport = 0, dport = 0;
    uint32_t seq = 0, ack = 0;
    uint8_t flags = 0;
    uint16_t window = 65535;
    std::vector<uint8_t> payload;
    std::vector<uint8_t> options;  // padded to a multiple of 4 by the builder
};

// Ethernet + IPv4 + TCP with valid checksums.
inline std::vector<uint8_t> tcp_frame(const TcpSpec& s) {
    std::vector<uint8_t> opts = s.options;
    while (opts.size() % 4) opts.push_back(1);  // NOP pad
    size_t tcp_len = 20 + opts.size() + s.payload.size();
    size_t ip_len = 20 + tcp_len;
    std::vector<uint8_t> f(14 + ip_len, 0);
    // ethernet
    for (int i = 0; i < 6; i++) f[i] = 0x02, f[6 + i] = 0x04;
    put16(f, 12, 0x0800);
    // ipv4
    size_t ip = 14;
    f[ip] = 0x45;
    put16(f, ip + 2, static_cast<uint16_t>(ip_len));
    f[ip + 8] = 64;
    f[ip + 9] = 6;
    put32(f, ip + 12, s.src);
    put32(f, ip + 16, s.dst);
    put16(f, ip + 10, checksum16(f.data() + ip, 20));
    // tcp
    size_t tp = ip + 20;
    put16(f, tp, s.sport);
    put16(f, tp + 2, s.dport);
    put32(f, tp + 4, s.seq);
    put32(f, tp + 8, s.ack);
    f[tp + 12] = static_cast<uint8_t>(((20 + opts.size()) / 4) << 4);
    f[tp + 13] = s.flags;
    put16(f, tp + 14, s.window);
    std::memcpy(f.data() + tp + 20, opts.data(), opts.size());
    std::memcpy(f.data() + tp + 20 + opts.size(), s.payload.data(), s.payload.size());
    // checksum with pseudo header
    uint32_t seed = 0;
    seed += (s.src >> 16) + (s.src & 0xffff);
    seed += (s.dst >> 16) + (s.dst & 0xffff);
    seed += 6 + static_cast<uint32_t>(tcp_len);
    // checksum16 folds the seed together with the segment sum
    put16(f, tp + 16, checksum16(f.data() + tp, tcp_len, seed));
    return f;
}

inline std::vector<uint8_t> udp_frame(uint32_t src, uint16_t sport, uint32_t dst,
                                      uint16_t dport, size_t payload_len) {
    size_t udp_len = 8 + payload_len;
    size_t ip_len = 20 + udp_len;
    std::vector<uint8_t> f(14 + ip_len, 0);
    put16(f, 12, 0x0800);
    size_t ip = 14;
    f[ip] = 0x45;
    put16(f, ip + 2, static_cast<uint16_t>(ip_len));
    f[ip + 8] = 64;
    f[ip + 9] = 17;
    put32(f, ip + 12, src);
    put32(f, ip + 16, dst);
    put16(f, ip + 10, checksum16(f.data() + ip, 20));
    size_t tp = ip + 20;
    put16(f, tp, sport);
    put16(f, tp + 2, dport);
    put16(f, tp + 4, static_cast<uint16_t>(udp_len));
    uint32_t seed = (src >> 16) + (src & 0xffff) + (dst >> 16) + (dst & 0xffff) +
                    17 + static_cast<uint32_t>(udp_len);
    uint16_t ck = checksum16(f.data() + tp, udp_len, seed);
    put16(f, tp + 6, ck == 0 ? 0xffff : ck);
    return f;
}

inline std::vector<uint8_t> icmp_frame(uint32_t src, uint32_t dst, size_t payload_len = 8) {
    size_t ip_len = 20 + 8 + payload_len;
    std::vector<uint8_t> f(14 + ip_len, 0);
    put16(f, 12, 0x0800);
    size_t ip = 14;
    f[ip] = 0x45;
    put16(f, ip + 2, static_cast<uint16_t>(ip_len));
    f[ip + 8] = 64;
    f[ip + 9] = 1;
    put32(f, ip + 12, src);
    put32(f, ip + 16, dst);
    put16(f, ip + 10, checksum16(f.data() + ip, 20));
    f[ip + 20] = 8;  // echo request
    put16(f, ip + 22, checksum16(f.data() + ip + 20, 8 + payload_len));
    return f;
}

inline std::vector<uint8_t> ipv6_frame() {
    std::vector<uint8_t> f(14 + 40, 0);
    put16(f, 12, 0x86DD);
    f[14] = 0x60;
    return f;
}

inline std::vector<uint8_t> arp_frame() {
    std::vector<uint8_t> f(14 + 28, 0);
    put16(f, 12, 0x0806);
    return f;
}

// Wrap an Ethernet frame in one 802.1Q tag.
inline std::vector<uint8_t> vlan_wrap(const std::vector<uint8_t>& f, uint16_t vid = 7) {
    std::vector<uint8_t> out(f.begin(), f.begin() + 12);
    out.push_back(0x81);
    out.push_back(0x00);
    out.push_back(static_cast<uint8_t>(vid >> 8));
    out.push_back(static_cast<uint8_t>(vid));
    out.insert(out.end(), f.begin() + 12, f.end());
    return out;
}

class TraceBuilder {
  public:
    void add(int64_t ts_us, std::vector<uint8_t> frame) {
        records_.push_back({ts_us, std::move(frame)});
    }
    void write(const std::string& path, uint32_t link_type = 1) const {
        flowscope::PcapWriter w(path, link_type);
        for (const auto& [ts, frame] : records_) w.write(ts, frame);
    }
    size_t size() const { return records_.size(); }

  private:
    std::vector<std::pair<int64_t, std::vector<uint8_t>>> records_;
};

// In-memory PacketRecord shortcut for flow/TCP unit tests.
inline flowscope::PacketRecord tcp_pkt(int64_t ts_us, uint32_t src, uint16_t sport,
                                       uint32_t dst, uint16_t dport, uint8_t flags,
                                       uint32_t seq = 0, uint32_t ack = 0,
                                       uint16_t payload = 0,
                                       uint16_t window = 65535) {
    flowscope::PacketRecord p;
    p.ts_us = ts_us;
    p.src_addr = src;
    p.dst_addr = dst;
    p.protocol = 6;
    p.src_port = sport;
    p.dst_port = dport;
    p.has_ports = true;
    p.is_tcp = true;
    p.tcp_seq = seq;
    p.tcp_ack = ack;
    p.tcp_flags = flags;
    p.tcp_window = window;
    p.payload_length = payload;
    p.ip_total_length = static_cast<uint16_t>(40 + payload);
    return p;
}

inline uint32_t ip(int a, int b, int c, int d) {
    return (static_cast<uint32_t>(a) << 24) | (static_cast<uint32_t>(b) << 16) |
           (static_cast<uint32_t>(c) << 8) | static_cast<uint32_t>(d);
}

}  // namespace testutil

#endif
