#include "flowscope/pcap.hpp"

#include <arpa/inet.h>

#include <array>
#include <cstring>

namespace flowscope {

namespace {

constexpr uint32_t kMagicUsec = 0xa1b2c3d4;
constexpr uint32_t kMagicUsecSwapped = 0xd4c3b2a1;
constexpr uint32_t kMagicNsec = 0xa1b23c4d;
constexpr uint32_t kMagicNsecSwapped = 0x4d3cb2a1;

constexpr uint32_t kLinkEthernet = 1;
constexpr uint32_t kLinkRawIp = 101;

// Largest per-record length we accept before declaring the file corrupt.
constexpr uint32_t kMaxRecordLen = 1u << 24;

uint32_t swap32(uint32_t v) { return __builtin_bswap32(v); }

uint16_t rd16be(const uint8_t* p) {
    return static_cast<uint16_t>((p[0] << 8) | p[1]);
}

uint32_t rd32be(const uint8_t* p) {
    return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | p[3];
}

void wr32le(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 24));
}

}  // namespace

std::string addr_to_string(uint32_t addr) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", (addr >> 24) & 0xff,
                  (addr >> 16) & 0xff, (addr >> 8) & 0xff, addr & 0xff);
    return buf;
}

std::optional<uint32_t> parse_addr(const std::string& dotted) {
    in_addr a{};
    if (inet_pton(AF_INET, dotted.c_str(), &a) != 1) return std::nullopt;
    return ntohl(a.s_addr);
}

PcapRawReader::PcapRawReader(const std::string& path) {
    f_ = std::fopen(path.c_str(), "rb");
    if (!f_) throw PcapError("cannot open " + path);
    file_header_.resize(24);
    size_t got = std::fread(file_header_.data(), 1, 24, f_);
    if (got < 4) {
        std::fclose(f_);
        f_ = nullptr;
        throw TruncatedHeader(path + ": file shorter than pcap global header");
    }
    uint32_t magic;
    std::memcpy(&magic, file_header_.data(), 4);
    switch (magic) {
        case kMagicUsec:
            break;
        case kMagicNsec:
            meta_.nanosecond = true;
            break;
        case kMagicUsecSwapped:
            meta_.swapped = true;
            break;
        case kMagicNsecSwapped:
            meta_.swapped = true;
            meta_.nanosecond = true;
            break;
        default: {
            std::fclose(f_);
            f_ = nullptr;
            char buf[64];
            std::snprintf(buf, sizeof buf, "not a pcap file (magic 0x%08x)", magic);
            throw BadMagic(path + ": " + buf);
        }
    }
    if (got < 24) {
        std::fclose(f_);
        f_ = nullptr;
        throw TruncatedHeader(path + ": file shorter than pcap global header");
    }
    uint32_t snap, link;
    std::memcpy(&snap, file_header_.data() + 16, 4);
    std::memcpy(&link, file_header_.data() + 20, 4);
    if (meta_.swapped) {
        snap = swap32(snap);
        link = swap32(link);
    }
    raw_link_type_ = link & 0x0fffffff;  // upper bits carry FCS info
    meta_.snap_length = snap;
    if (raw_link_type_ == kLinkEthernet) {
        meta_.link_type = LinkType::Ethernet;
    } else if (raw_link_type_ == kLinkRawIp) {
        meta_.link_type = LinkType::RawIp;
    } else {
        std::fclose(f_);
        f_ = nullptr;
        throw UnsupportedLinkType(path + ": linktype " + std::to_string(raw_link_type_));
    }
    offset_ = 24;
}

PcapRawReader::~PcapRawReader() {
    if (f_) std::fclose(f_);
}

std::optional<RawRecord> PcapRawReader::next() {
    RawRecord rec;
    rec.header.resize(16);
    size_t got = std::fread(rec.header.data(), 1, 16, f_);
    if (got == 0) return std::nullopt;
    if (got < 16)
        throw CorruptRecord("record header cut short", offset_);
    uint32_t ts_sec, ts_frac, incl, orig;
    std::memcpy(&ts_sec, rec.header.data(), 4);
    std::memcpy(&ts_frac, rec.header.data() + 4, 4);
    std::memcpy(&incl, rec.header.data() + 8, 4);
    std::memcpy(&orig, rec.header.data() + 12, 4);
    if (meta_.swapped) {
        ts_sec = swap32(ts_sec);
        ts_frac = swap32(ts_frac);
        incl = swap32(incl);
        orig = swap32(orig);
    }
    if (incl > kMaxRecordLen)
        throw CorruptRecord("record length " + std::to_string(incl) + " implausible",
                            offset_);
    rec.incl_len = incl;
    rec.orig_len = orig;
    // Nanosecond fractions are truncated to microseconds.
    int64_t frac_us = meta_.nanosecond ? static_cast<int64_t>(ts_frac) / 1000
                                       : static_cast<int64_t>(ts_frac);
    rec.ts_us = static_cast<int64_t>(ts_sec) * 1000000 + frac_us;
    rec.frame.resize(incl);
    if (incl > 0 && std::fread(rec.frame.data(), 1, incl, f_) != incl)
        throw CorruptRecord("record body cut short", offset_);
    offset_ += 16 + incl;
    return rec;
}

TcpOptions decode_tcp_options(const uint8_t* data, size_t len) {
    TcpOptions out;
    size_t i = 0;
    while (i < len) {
        uint8_t kind = data[i];
        if (kind == 0) break;  // End of Options
        if (kind == 1) {       // NOP
            i++;
            continue;
        }
        if (i + 1 >= len) {
            out.partial = true;
            break;
        }
        uint8_t olen = data[i + 1];
        if (olen < 2 || i + olen > len) {
            out.partial = true;
            break;
        }
        switch (kind) {
            case 2:
                if (olen != 4) {
                    out.partial = true;
                    return out;
                }
                out.mss = rd16be(data + i + 2);
                break;
            case 3:
                if (olen != 3) {
                    out.partial = true;
                    return out;
                }
                out.window_scale = data[i + 2];
                break;
            case 4:
                out.sack_permitted = true;
                break;
            case 8:
                out.timestamps = true;
                break;
            default:
                out.unknown_kinds.push_back(kind);
                break;
        }
        i += olen;
    }
    return out;
}

std::optional<PacketRecord> decode_frame(const uint8_t* data, size_t caplen,
                                         uint32_t orig_len, LinkType link,
                                         int64_t ts_us, IngestStats& stats,
                                         size_t* ip_offset_out) {
    stats.packets_total++;
    size_t off = 0;
    if (link == LinkType::Ethernet) {
        if (caplen < 14) {
            stats.decode_errors++;
            return std::nullopt;
        }
        uint16_t ethertype = rd16be(data + 12);
        off = 14;
        // 802.1Q, one level
        if (ethertype == 0x8100) {
            if (caplen < 18) {
                stats.decode_errors++;
                return std::nullopt;
            }
            ethertype = rd16be(data + 16);
            off = 18;
        }
        if (ethertype == 0x86DD) {
            stats.packets_ipv6_skipped++;
            return std::nullopt;
        }
        if (ethertype != 0x0800) {
            stats.packets_non_ip_skipped++;
            return std::nullopt;
        }
    } else {
        if (caplen < 1) {
            stats.decode_errors++;
            return std::nullopt;
        }
        uint8_t version = data[0] >> 4;
        if (version == 6) {
            stats.packets_ipv6_skipped++;
            return std::nullopt;
        }
        if (version != 4) {
            stats.packets_non_ip_skipped++;
            return std::nullopt;
        }
    }
    if (caplen < off + 20) {
        stats.decode_errors++;
        return std::nullopt;
    }
    const uint8_t* ip = data + off;
    if ((ip[0] >> 4) != 4) {
        stats.packets_non_ip_skipped++;
        return std::nullopt;
    }
    size_t ihl = static_cast<size_t>(ip[0] & 0x0f) * 4;
    uint16_t total_len = rd16be(ip + 2);
    if (ihl < 20 || total_len < ihl) {
        stats.decode_errors++;
        return std::nullopt;
    }
    if (ip_offset_out) *ip_offset_out = off;

    PacketRecord pkt;
    pkt.ts_us = ts_us;
    pkt.src_addr = rd32be(ip + 12);
    pkt.dst_addr = rd32be(ip + 16);
    pkt.protocol = ip[9];
    pkt.ip_total_length = total_len;
    pkt.truncated = caplen < off + total_len || orig_len > caplen;

    uint16_t frag = rd16be(ip + 6);
    pkt.non_first_fragment = (frag & 0x1fff) != 0;

    size_t ip_captured = caplen - off;
    stats.packets_ipv4++;
    stats.ipv4_bytes += total_len;
    if (pkt.truncated) stats.packets_truncated++;

    if (pkt.non_first_fragment) {
        pkt.payload_length = static_cast<uint16_t>(total_len - ihl);
        return pkt;
    }

    const uint8_t* tp = ip + ihl;
    size_t tp_captured = ip_captured > ihl ? ip_captured - ihl : 0;
    switch (pkt.protocol) {
        case 6: {  // TCP
            if (tp_captured < 20) break;  // header not captured; ports unknown
            size_t doff = static_cast<size_t>(tp[12] >> 4) * 4;
            if (doff < 20 || total_len < ihl + doff) {
                stats.decode_errors++;
                stats.packets_ipv4--;
                stats.ipv4_bytes -= total_len;
                if (pkt.truncated) stats.packets_truncated--;
                return std::nullopt;
            }
            pkt.is_tcp = true;
            pkt.has_ports = true;
            pkt.src_port = rd16be(tp);
            pkt.dst_port = rd16be(tp + 2);
            pkt.tcp_seq = rd32be(tp + 4);
            pkt.tcp_ack = rd32be(tp + 8);
            pkt.tcp_flags = tp[13];
            pkt.tcp_window = rd16be(tp + 14);
            pkt.payload_length = static_cast<uint16_t>(total_len - ihl - doff);
            if (doff > 20 && tp_captured >= doff)
                pkt.tcp_options = decode_tcp_options(tp + 20, doff - 20);
            break;
        }
        case 17: {  // UDP
            if (total_len < ihl + 8) {
                stats.decode_errors++;
                stats.packets_ipv4--;
                stats.ipv4_bytes -= total_len;
                if (pkt.truncated) stats.packets_truncated--;
                return std::nullopt;
            }
            if (tp_captured >= 8) {
                pkt.has_ports = true;
                pkt.src_port = rd16be(tp);
                pkt.dst_port = rd16be(tp + 2);
            }
            pkt.payload_length = static_cast<uint16_t>(total_len - ihl - 8);
            break;
        }
        default:
            pkt.payload_length = static_cast<uint16_t>(total_len - ihl);
            break;
    }
    return pkt;
}

PcapReader::PcapReader(const std::string& path) : raw_(path) {}

std::optional<PacketRecord> PcapReader::decode_next_from_file() {
    for (;;) {
        auto rec = raw_.next();
        if (!rec) {
            eof_ = true;
            return std::nullopt;
        }
        auto pkt = decode_frame(rec->frame.data(), rec->frame.size(), rec->orig_len,
                                raw_.meta().link_type, rec->ts_us, stats_);
        if (pkt) return pkt;
    }
}

std::optional<PacketRecord> PcapReader::next() {
    while (!eof_ && buf_.size() <= kReorderDepth) {
        auto pkt = decode_next_from_file();
        if (pkt) buf_.push(std::move(*pkt));
    }
    if (buf_.empty()) return std::nullopt;
    PacketRecord out = buf_.top();
    buf_.pop();
    if (have_last_ && out.ts_us < last_emitted_us_)
        stats_.monotonicity_violations++;
    else
        last_emitted_us_ = out.ts_us;
    have_last_ = true;
    return out;
}

PcapWriter::PcapWriter(const std::string& path, uint32_t link_type, uint32_t snap_len)
    : path_(path) {
    f_ = std::fopen(path.c_str(), "wb");
    if (!f_) throw PcapError("cannot create " + path);
    std::vector<uint8_t> hdr;
    wr32le(hdr, kMagicUsec);
    hdr.push_back(2);
    hdr.push_back(0);  // version 2.4
    hdr.push_back(4);
    hdr.push_back(0);
    wr32le(hdr, 0);  // thiszone
    wr32le(hdr, 0);  // sigfigs
    wr32le(hdr, snap_len);
    wr32le(hdr, link_type);
    if (std::fwrite(hdr.data(), 1, hdr.size(), f_) != hdr.size())
        throw PcapError("write failure: " + path);
}

PcapWriter::~PcapWriter() { close(); }

void PcapWriter::close() {
    if (f_) {
        std::fclose(f_);
        f_ = nullptr;
    }
}

void PcapWriter::write(int64_t ts_us, const std::vector<uint8_t>& frame,
                       uint32_t orig_len) {
    std::vector<uint8_t> hdr;
    wr32le(hdr, static_cast<uint32_t>(ts_us / 1000000));
    wr32le(hdr, static_cast<uint32_t>(ts_us % 1000000));
    wr32le(hdr, static_cast<uint32_t>(frame.size()));
    wr32le(hdr, orig_len ? orig_len : static_cast<uint32_t>(frame.size()));
    if (std::fwrite(hdr.data(), 1, hdr.size(), f_) != hdr.size() ||
        std::fwrite(frame.data(), 1, frame.size(), f_) != frame.size())
        throw PcapError("write failure: " + path_);
}

uint16_t ipv4_header_checksum(const uint8_t* ip_header, size_t ihl_bytes) {
    uint32_t sum = 0;
    for (size_t i = 0; i + 1 < ihl_bytes; i += 2) {
        if (i == 10) continue;  // checksum field itself
        sum += static_cast<uint32_t>((ip_header[i] << 8) | ip_header[i + 1]);
    }
    while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
    return static_cast<uint16_t>(~sum);
}

}  // namespace flowscope
