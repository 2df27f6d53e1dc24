#ifndef FLOWSCOPE_PACKET_HPP
#define FLOWSCOPE_PACKET_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace flowscope {

// TCP flag bits, matching the wire encoding of the 8-bit flags field.
namespace tcpflag {
constexpr uint8_t kFin = 0x01;
constexpr uint8_t kSyn = 0x02;
constexpr uint8_t kRst = 0x04;
constexpr uint8_t kPsh = 0x08;
constexpr uint8_t kAck = 0x10;
constexpr uint8_t kUrg = 0x20;
constexpr uint8_t kEce = 0x40;
constexpr uint8_t kCwr = 0x80;
}  // namespace tcpflag

struct TcpOptions {
    std::optional<uint8_t> window_scale;
    std::optional<uint16_t> mss;
    bool sack_permitted = false;
    bool timestamps = false;
    std::vector<uint8_t> unknown_kinds;
    // Set when an option's declared length ran past the option region;
    // whatever parsed before the damage is still usable.
    bool partial = false;
};

// One decoded IPv4 packet. Timestamps are microseconds since the epoch.
struct PacketRecord {
    int64_t ts_us = 0;
    uint32_t src_addr = 0;
    uint32_t dst_addr = 0;
    uint8_t protocol = 0;
    uint16_t ip_total_length = 0;
    uint16_t src_port = 0;
    uint16_t dst_port = 0;
    bool has_ports = false;

    bool is_tcp = false;
    uint32_t tcp_seq = 0;
    uint32_t tcp_ack = 0;
    uint8_t tcp_flags = 0;
    uint16_t tcp_window = 0;
    TcpOptions tcp_options;

    uint16_t payload_length = 0;
    bool truncated = false;
    // Non-first IP fragment: carries no transport header, attaches to no flow.
    bool non_first_fragment = false;

    double ts_seconds() const { return static_cast<double>(ts_us) / 1e6; }
};

struct IngestStats {
    uint64_t packets_total = 0;
    uint64_t packets_ipv4 = 0;
    uint64_t packets_ipv6_skipped = 0;
    uint64_t packets_non_ip_skipped = 0;
    uint64_t packets_truncated = 0;
    uint64_t decode_errors = 0;
    uint64_t monotonicity_violations = 0;
    uint64_t ipv4_bytes = 0;

    // packets_truncated counts a subset of packets_ipv4 and is not part of
    // the partition below.
    bool accounting_ok() const {
        return packets_total == packets_ipv4 + packets_ipv6_skipped +
                                   packets_non_ip_skipped + decode_errors;
    }
};

std::string addr_to_string(uint32_t addr);
std::optional<uint32_t> parse_addr(const std::string& dotted);

}  // namespace flowscope

#endif
