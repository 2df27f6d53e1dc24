#ifndef FLOWSCOPE_TCP_PERF_HPP
#define FLOWSCOPE_TCP_PERF_HPP

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "flowscope/packet.hpp"

namespace flowscope {

enum class TcpEventKind {
    RetransmissionPlain,
    RetransmissionFast,
    RetransmissionSpurious,
    LostSegmentInferred,
    OutOfOrder,
    DuplicateAck,
    WindowReduction,
    ZeroWindow,
    EceSeen,
    CwrSeen,
    SynRetry,
    EstablishmentFailure,
};

const char* tcp_event_name(TcpEventKind k);

enum class FailReason { None, NoAnswer, Refused };

struct TcpEvent {
    TcpEventKind kind;
    int64_t ts_us = 0;
    int direction = 0;  // 0 = initiator->responder
    uint64_t seq_lo = 0, seq_hi = 0;          // byte range, unwrapped
    uint64_t from_bytes = 0, to_bytes = 0;    // WindowReduction
    FailReason fail_reason = FailReason::None;
    std::string detail() const;
};

// Half-open byte intervals over the unwrapped 64-bit sequence space.
class IntervalSet {
  public:
    void add(uint64_t lo, uint64_t hi);
    bool intersects(uint64_t lo, uint64_t hi) const;
    bool contains(uint64_t lo, uint64_t hi) const;
    bool empty() const { return m_.empty(); }
    size_t size() const { return m_.size(); }

  private:
    std::map<uint64_t, uint64_t> m_;  // lo -> hi, disjoint, merged
};

// Per-direction sequence tracking. "This direction" is the data sender;
// acked_upto reflects the peer's cumulative ACKs of that data.
struct TcpDirState {
    bool seq_init = false;
    uint64_t last_seq64 = 0;     // unwrap reference
    bool next_valid = false;
    uint64_t next_seq = 0;       // next expected in-order byte
    uint64_t max_seq = 0;        // highest seq+len seen
    bool acked_known = false;
    uint64_t acked_upto = 0;
    IntervalSet seen;
    struct Gap {
        uint64_t lo, hi;
        int64_t ts_us;
    };
    std::vector<Gap> gaps;

    // duplicate ACKs produced by the peer for this direction's data
    int dup_ack_count = 0;
    uint64_t dup_ack_edge = 0;

    // ACK state of the packets this direction sends (for dup-ack detection
    // of the opposite direction).
    bool has_last_ack = false;
    uint32_t last_ack_sent = 0;
    uint16_t last_raw_window_sent = 0;

    // advertised window of this direction, after scaling
    bool has_adv_window = false;
    uint64_t last_adv_window_bytes = 0;
    int window_scale = 0;        // applied only if both SYNs offered it
    bool scale_offered = false;

    std::map<uint64_t, int64_t> pending_rtt;  // right edge -> send ts
    std::set<uint64_t> karn_excluded;         // edges touched by a retransmission

    int syn_count = 0;
    bool fin_seen = false;
    uint64_t fin_seq = 0;

    // partition counters over data packets sent by this direction
    uint64_t pkts_in_order = 0;
    uint64_t pkts_retrans_plain = 0;
    uint64_t pkts_retrans_fast = 0;
    uint64_t pkts_retrans_spurious = 0;
    uint64_t pkts_out_of_order = 0;
    uint64_t data_packets = 0;
};

struct TcpTrackerConfig {
    int64_t reorder_window_us = 3000;         // OutOfOrder vs late gap filler
    int64_t correlation_window_us = 1000000;  // congestion-event rule (b)
    int64_t syn_timeout_us = 30000000;        // establishment failure
    int64_t fin_linger_us = 2000000;          // flow close linger
};

struct RttEstimate {
    std::optional<double> handshake_syn_side;  // seconds
    std::optional<double> handshake_ack_side;
    std::optional<double> handshake_total;
    std::vector<double> ack_samples;

    std::optional<double> min() const;
    std::optional<double> median() const;
    std::optional<double> mean() const;
};

struct CongestionSummary {
    uint64_t count = 0;
    // indices into the flow's event list that contributed
    std::vector<size_t> evidence;
};

struct EstablishmentResult {
    FailReason failure = FailReason::None;
    int syn_retries = 0;
};

// Per-flow TCP state machine. Feed packets in timestamp order via
// on_packet(); query summaries once the flow is finished.
class TcpTracker {
  public:
    explicit TcpTracker(TcpTrackerConfig cfg = {});

    // dir: 0 when the packet travels initiator->responder.
    void on_packet(const PacketRecord& pkt, int dir, std::vector<TcpEvent>& events);

    const TcpDirState& dir_state(int dir) const { return dirs_[dir]; }
    const std::array<uint64_t, 8>& flag_counts() const { return flag_counts_; }

    bool handshake_seen() const { return syn_ts_ && synack_ts_ && hs_ack_ts_; }
    bool syn_seen() const { return syn_ts_.has_value(); }
    bool synack_seen() const { return synack_ts_.has_value(); }
    bool rst_seen() const { return rst_seen_; }
    // Both FINs observed, or an RST: the flow may close after linger.
    bool close_observed() const {
        return rst_seen_ || (dirs_[0].fin_seen && dirs_[1].fin_seen);
    }
    std::optional<int64_t> close_ts_us() const { return close_ts_us_; }

    RttEstimate estimate_rtt() const;
    EstablishmentResult establishment(int64_t now_us) const;

  private:
    void on_data_segment(const PacketRecord& pkt, int dir,
                         std::vector<TcpEvent>& events);
    void on_ack(const PacketRecord& pkt, int dir, std::vector<TcpEvent>& events);
    uint64_t unwrap(TcpDirState& st, uint32_t seq);

    TcpTrackerConfig cfg_;
    std::array<TcpDirState, 2> dirs_;
    std::array<uint64_t, 8> flag_counts_{};  // indexed by bit position

    std::optional<int64_t> syn_ts_;      // last initiator SYN before SYNACK
    std::optional<int64_t> first_syn_ts_;
    std::optional<int64_t> synack_ts_;   // first responder SYN+ACK
    std::optional<int64_t> hs_ack_ts_;   // first initiator ACK after SYNACK
    bool rst_seen_ = false;
    bool rst_from_responder_before_synack_ = false;
    std::optional<int64_t> close_ts_us_;
    std::vector<double> ack_samples_;
};

// Definitional retransmission taxonomy; seg range must intersect seen bytes.
TcpEventKind classify_retransmission(const TcpDirState& sender, uint64_t seg_lo,
                                     uint64_t seg_hi);

// Rule (a): any ECE/CWR flag event. Rule (b): a window reduction with a
// same-direction retransmission or inferred loss within the correlation
// window.
CongestionSummary derive_congestion_events(const std::vector<TcpEvent>& events,
                                           int64_t correlation_window_us = 1000000);

}  // namespace flowscope

#endif
