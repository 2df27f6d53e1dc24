#ifndef FLOWSCOPE_PCAP_HPP
#define FLOWSCOPE_PCAP_HPP

#include <cstdint>
#include <cstdio>
#include <memory>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowscope/packet.hpp"

namespace flowscope {

class PcapError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class BadMagic : public PcapError {
  public:
    using PcapError::PcapError;
};

class UnsupportedLinkType : public PcapError {
  public:
    using PcapError::PcapError;
};

class TruncatedHeader : public PcapError {
  public:
    using PcapError::PcapError;
};

class CorruptRecord : public PcapError {
  public:
    CorruptRecord(const std::string& msg, uint64_t offset)
        : PcapError(msg), offset_(offset) {}
    uint64_t offset() const { return offset_; }

  private:
    uint64_t offset_;
};

enum class LinkType { Ethernet, RawIp };

struct CaptureMeta {
    LinkType link_type = LinkType::Ethernet;
    uint32_t snap_length = 0;
    bool nanosecond = false;   // timestamp resolution of the file
    bool swapped = false;      // file byte order differs from host
};

// One undecoded capture record: 16-byte record header plus frame bytes,
// both verbatim. Used by the trace rewriter.
struct RawRecord {
    int64_t ts_us = 0;
    uint32_t incl_len = 0;
    uint32_t orig_len = 0;
    std::vector<uint8_t> header;  // verbatim 16 bytes
    std::vector<uint8_t> frame;
};

// Sequential reader for classic pcap files (magic a1b2c3d4 / d4c3b2a1 and
// the nanosecond variants). pcapng is not supported.
class PcapRawReader {
  public:
    explicit PcapRawReader(const std::string& path);
    ~PcapRawReader();
    PcapRawReader(const PcapRawReader&) = delete;
    PcapRawReader& operator=(const PcapRawReader&) = delete;

    const CaptureMeta& meta() const { return meta_; }
    const std::vector<uint8_t>& file_header() const { return file_header_; }
    uint32_t raw_link_type() const { return raw_link_type_; }

    std::optional<RawRecord> next();

  private:
    std::FILE* f_ = nullptr;
    CaptureMeta meta_;
    std::vector<uint8_t> file_header_;
    uint32_t raw_link_type_ = 0;
    uint64_t offset_ = 0;
};

// Decoding reader: yields IPv4 PacketRecords in non-decreasing timestamp
// order (bounded reorder buffer), skipping and counting what it cannot use.
class PcapReader {
  public:
    static constexpr size_t kReorderDepth = 128;

    explicit PcapReader(const std::string& path);

    const CaptureMeta& meta() const { return raw_.meta(); }
    const IngestStats& stats() const { return stats_; }

    // nullopt means end of trace.
    std::optional<PacketRecord> next();

  private:
    std::optional<PacketRecord> decode_next_from_file();

    PcapRawReader raw_;
    IngestStats stats_;
    struct TsOrder {
        bool operator()(const PacketRecord& a, const PacketRecord& b) const {
            return a.ts_us > b.ts_us;
        }
    };
    std::priority_queue<PacketRecord, std::vector<PacketRecord>, TsOrder> buf_;
    bool eof_ = false;
    bool have_last_ = false;
    int64_t last_emitted_us_ = 0;
};

// Minimal classic-pcap writer (little-endian, microsecond timestamps).
class PcapWriter {
  public:
    PcapWriter(const std::string& path, uint32_t link_type, uint32_t snap_len = 65535);
    ~PcapWriter();
    PcapWriter(const PcapWriter&) = delete;
    PcapWriter& operator=(const PcapWriter&) = delete;

    void write(int64_t ts_us, const std::vector<uint8_t>& frame,
               uint32_t orig_len = 0);
    void close();

  private:
    std::FILE* f_ = nullptr;
    std::string path_;
};

// Decode a single captured frame into a PacketRecord. Returns nullopt for
// non-IPv4 frames and updates the skip counters. ip_offset_out, when given,
// receives the byte offset of the IPv4 header inside the frame.
std::optional<PacketRecord> decode_frame(const uint8_t* data, size_t caplen,
                                         uint32_t orig_len, LinkType link,
                                         int64_t ts_us, IngestStats& stats,
                                         size_t* ip_offset_out = nullptr);

TcpOptions decode_tcp_options(const uint8_t* data, size_t len);

uint16_t ipv4_header_checksum(const uint8_t* ip_header, size_t ihl_bytes);

}  // namespace flowscope

#endif
