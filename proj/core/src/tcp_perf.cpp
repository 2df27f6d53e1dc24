#include "flowscope/tcp_perf.hpp"

#include <algorithm>
#include <cstdio>

namespace flowscope {

const char* tcp_event_name(TcpEventKind k) {
    switch (k) {
        case TcpEventKind::RetransmissionPlain: return "retransmission_plain";
        case TcpEventKind::RetransmissionFast: return "retransmission_fast";
        case TcpEventKind::RetransmissionSpurious: return "retransmission_spurious";
        case TcpEventKind::LostSegmentInferred: return "lost_segment_inferred";
        case TcpEventKind::OutOfOrder: return "out_of_order";
        case TcpEventKind::DuplicateAck: return "duplicate_ack";
        case TcpEventKind::WindowReduction: return "window_reduction";
        case TcpEventKind::ZeroWindow: return "zero_window";
        case TcpEventKind::EceSeen: return "ece_seen";
        case TcpEventKind::CwrSeen: return "cwr_seen";
        case TcpEventKind::SynRetry: return "syn_retry";
        case TcpEventKind::EstablishmentFailure: return "establishment_failure";
    }
    return "?";
}

std::string TcpEvent::detail() const {
    char buf[96];
    switch (kind) {
        case TcpEventKind::WindowReduction:
        case TcpEventKind::ZeroWindow:
            std::snprintf(buf, sizeof buf, "window %llu->%llu",
                          static_cast<unsigned long long>(from_bytes),
                          static_cast<unsigned long long>(to_bytes));
            return buf;
        case TcpEventKind::EstablishmentFailure:
            return fail_reason == FailReason::Refused ? "refused" : "no_answer";
        default:
            if (seq_hi > seq_lo) {
                std::snprintf(buf, sizeof buf, "range [%llu,%llu)",
                              static_cast<unsigned long long>(seq_lo),
                              static_cast<unsigned long long>(seq_hi));
                return buf;
            }
            return "";
    }
}

void IntervalSet::add(uint64_t lo, uint64_t hi) {
    if (lo >= hi) return;
    auto it = m_.upper_bound(lo);
    if (it != m_.begin()) {
        auto prev = std::prev(it);
        if (prev->second >= lo) {
            lo = prev->first;
            hi = std::max(hi, prev->second);
            it = m_.erase(prev);
        }
    }
    while (it != m_.end() && it->first <= hi) {
        hi = std::max(hi, it->second);
        it = m_.erase(it);
    }
    m_[lo] = hi;
}

bool IntervalSet::intersects(uint64_t lo, uint64_t hi) const {
    if (lo >= hi) return false;
    auto it = m_.upper_bound(lo);
    if (it != m_.begin() && std::prev(it)->second > lo) return true;
    return it != m_.end() && it->first < hi;
}

bool IntervalSet::contains(uint64_t lo, uint64_t hi) const {
    if (lo >= hi) return true;
    auto it = m_.upper_bound(lo);
    if (it == m_.begin()) return false;
    auto prev = std::prev(it);
    return prev->first <= lo && prev->second >= hi;
}

TcpTracker::TcpTracker(TcpTrackerConfig cfg) : cfg_(cfg) {}

uint64_t TcpTracker::unwrap(TcpDirState& st, uint32_t seq) {
    constexpr uint64_t kEpoch = 1ull << 32;
    if (!st.seq_init) {
        st.seq_init = true;
        st.last_seq64 = kEpoch + seq;
        return st.last_seq64;
    }
    uint64_t base = st.last_seq64 & ~0xffffffffull;
    uint64_t best = base + seq;
    // pick the candidate within a 2^31 window of the reference
    auto dist = [&](uint64_t v) {
        return v > st.last_seq64 ? v - st.last_seq64 : st.last_seq64 - v;
    };
    if (base >= kEpoch && dist(base - kEpoch + seq) < dist(best))
        best = base - kEpoch + seq;
    if (dist(base + kEpoch + seq) < dist(best)) best = base + kEpoch + seq;
    if (best > st.last_seq64) st.last_seq64 = best;
    return best;
}

TcpEventKind classify_retransmission(const TcpDirState& sender, uint64_t seg_lo,
                                     uint64_t seg_hi) {
    if (sender.acked_known && seg_hi <= sender.acked_upto)
        return TcpEventKind::RetransmissionSpurious;
    if (sender.dup_ack_count >= 3 && sender.dup_ack_edge == seg_lo)
        return TcpEventKind::RetransmissionFast;
    return TcpEventKind::RetransmissionPlain;
}

void TcpTracker::on_ack(const PacketRecord& pkt, int dir,
                        std::vector<TcpEvent>& events) {
    TcpDirState& st = dirs_[dir];
    TcpDirState& peer = dirs_[1 - dir];
    uint64_t a64 = unwrap(peer, pkt.tcp_ack);

    bool pure_ack = pkt.payload_length == 0 &&
                    !(pkt.tcp_flags & (tcpflag::kSyn | tcpflag::kFin | tcpflag::kRst));
    bool same_ack = st.has_last_ack && pkt.tcp_ack == st.last_ack_sent;
    bool same_window = pkt.tcp_window == st.last_raw_window_sent;

    if (pure_ack && same_ack && same_window) {
        peer.dup_ack_count++;
        peer.dup_ack_edge = a64;
        events.push_back({TcpEventKind::DuplicateAck, pkt.ts_us, dir, a64, a64, 0, 0,
                          FailReason::None});
    } else if (!same_ack) {
        peer.dup_ack_count = 0;
    }

    if (!peer.acked_known || a64 > peer.acked_upto) {
        peer.acked_known = true;
        peer.acked_upto = a64;
    }

    // RTT samples: first ACK covering each outstanding right edge.
    auto it = peer.pending_rtt.begin();
    while (it != peer.pending_rtt.end() && it->first <= a64) {
        if (!peer.karn_excluded.count(it->first))
            ack_samples_.push_back(static_cast<double>(pkt.ts_us - it->second) / 1e6);
        it = peer.pending_rtt.erase(it);
    }

    st.has_last_ack = true;
    st.last_ack_sent = pkt.tcp_ack;
    st.last_raw_window_sent = pkt.tcp_window;
}

void TcpTracker::on_data_segment(const PacketRecord& pkt, int dir,
                                 std::vector<TcpEvent>& events) {
    TcpDirState& st = dirs_[dir];
    uint64_t s64 = unwrap(st, pkt.tcp_seq);
    uint64_t e64 = s64 + pkt.payload_length;
    st.data_packets++;

    if (st.seen.intersects(s64, e64)) {
        TcpEventKind kind = classify_retransmission(st, s64, e64);
        switch (kind) {
            case TcpEventKind::RetransmissionPlain: st.pkts_retrans_plain++; break;
            case TcpEventKind::RetransmissionFast:
                st.pkts_retrans_fast++;
                st.dup_ack_count = 0;
                break;
            case TcpEventKind::RetransmissionSpurious:
                st.pkts_retrans_spurious++;
                break;
            default: break;
        }
        events.push_back({kind, pkt.ts_us, dir, s64, e64, 0, 0, FailReason::None});
        // Karn: edges touched by a retransmission never produce RTT samples.
        auto it = st.pending_rtt.upper_bound(s64);
        while (it != st.pending_rtt.end() && it->first <= e64) {
            st.karn_excluded.insert(it->first);
            it = st.pending_rtt.erase(it);
        }
        st.karn_excluded.insert(e64);
        st.seen.add(s64, e64);
        if (s64 <= st.next_seq && e64 > st.next_seq) st.next_seq = e64;
        st.max_seq = std::max(st.max_seq, e64);
        return;
    }

    if (!st.next_valid) {
        st.next_valid = true;
        st.next_seq = s64;
    }

    if (s64 == st.next_seq) {
        st.pkts_in_order++;
        st.next_seq = e64;
    } else if (s64 > st.next_seq) {
        // Bytes we never saw: lost upstream of the capture point, or about
        // to arrive reordered.
        events.push_back({TcpEventKind::LostSegmentInferred, pkt.ts_us, dir,
                          st.next_seq, s64, 0, 0, FailReason::None});
        st.gaps.push_back({st.next_seq, s64, pkt.ts_us});
        st.pkts_in_order++;
        st.next_seq = e64;
    } else {
        // Filling below the high-water mark: reordering if it arrives fast,
        // a late filler otherwise.
        bool within_window = false;
        for (size_t i = 0; i < st.gaps.size(); i++) {
            auto& g = st.gaps[i];
            if (s64 < g.hi && e64 > g.lo) {
                within_window = pkt.ts_us - g.ts_us <= cfg_.reorder_window_us;
                // shrink the gap by the covered range
                TcpDirState::Gap before{g.lo, std::min(g.hi, s64), g.ts_us};
                TcpDirState::Gap after{std::max(g.lo, e64), g.hi, g.ts_us};
                st.gaps.erase(st.gaps.begin() + static_cast<long>(i));
                if (before.lo < before.hi) st.gaps.push_back(before);
                if (after.lo < after.hi) st.gaps.push_back(after);
                break;
            }
        }
        if (within_window) {
            st.pkts_out_of_order++;
            events.push_back(
                {TcpEventKind::OutOfOrder, pkt.ts_us, dir, s64, e64, 0, 0,
                 FailReason::None});
        } else {
            st.pkts_in_order++;
        }
    }

    st.seen.add(s64, e64);
    st.max_seq = std::max(st.max_seq, e64);
    // advance through previously captured out-of-order bytes
    while (st.seen.contains(st.next_seq, st.next_seq + 1)) st.next_seq++;
    if (!st.karn_excluded.count(e64)) st.pending_rtt[e64] = pkt.ts_us;
}

void TcpTracker::on_packet(const PacketRecord& pkt, int dir,
                           std::vector<TcpEvent>& events) {
    TcpDirState& st = dirs_[dir];
    uint8_t flags = pkt.tcp_flags;
    for (int bit = 0; bit < 8; bit++)
        if (flags & (1u << bit)) flag_counts_[bit]++;
    if (flags & tcpflag::kEce)
        events.push_back({TcpEventKind::EceSeen, pkt.ts_us, dir, 0, 0, 0, 0,
                          FailReason::None});
    if (flags & tcpflag::kCwr)
        events.push_back({TcpEventKind::CwrSeen, pkt.ts_us, dir, 0, 0, 0, 0,
                          FailReason::None});

    bool syn = flags & tcpflag::kSyn;
    bool ack = flags & tcpflag::kAck;
    bool rst = flags & tcpflag::kRst;
    bool fin = flags & tcpflag::kFin;

    if (syn) {
        if (pkt.tcp_options.window_scale) {
            st.scale_offered = true;
            st.window_scale = *pkt.tcp_options.window_scale;
        }
        uint64_t s64 = unwrap(st, pkt.tcp_seq);
        if (!st.next_valid || s64 + 1 > st.next_seq) {
            st.next_valid = true;
            st.next_seq = s64 + 1;
            st.max_seq = std::max(st.max_seq, s64 + 1);
        }
        if (!ack && dir == 0) {
            st.syn_count++;
            if (!first_syn_ts_) first_syn_ts_ = pkt.ts_us;
            if (!synack_ts_) {
                if (syn_ts_)
                    events.push_back({TcpEventKind::SynRetry, pkt.ts_us, dir, 0, 0,
                                      0, 0, FailReason::None});
                syn_ts_ = pkt.ts_us;
            }
        } else if (ack && dir == 1 && !synack_ts_) {
            synack_ts_ = pkt.ts_us;
        }
    }
    if (rst) {
        if (dir == 1 && syn_ts_ && !synack_ts_) rst_from_responder_before_synack_ = true;
        rst_seen_ = true;
        if (!close_ts_us_) close_ts_us_ = pkt.ts_us;
    }
    if (fin) {
        st.fin_seen = true;
        st.fin_seq = unwrap(st, pkt.tcp_seq) + pkt.payload_length;
        if (dirs_[0].fin_seen && dirs_[1].fin_seen && !close_ts_us_)
            close_ts_us_ = pkt.ts_us;
    }
    if (ack && !syn && dir == 0 && synack_ts_ && !hs_ack_ts_) hs_ack_ts_ = pkt.ts_us;

    if (ack && !syn) {
        on_ack(pkt, dir, events);
        // advertised window, scaled only when both sides offered the option
        int eff_scale = (dirs_[0].scale_offered && dirs_[1].scale_offered)
                            ? st.window_scale
                            : 0;
        uint64_t scaled = static_cast<uint64_t>(pkt.tcp_window) << eff_scale;
        if (st.has_adv_window && scaled < st.last_adv_window_bytes) {
            events.push_back({TcpEventKind::WindowReduction, pkt.ts_us, dir, 0, 0,
                              st.last_adv_window_bytes, scaled, FailReason::None});
            if (scaled == 0)
                events.push_back({TcpEventKind::ZeroWindow, pkt.ts_us, dir, 0, 0,
                                  st.last_adv_window_bytes, scaled,
                                  FailReason::None});
        }
        st.has_adv_window = true;
        st.last_adv_window_bytes = scaled;
    }

    if (pkt.payload_length > 0 && !syn && !rst) on_data_segment(pkt, dir, events);
}

std::optional<double> RttEstimate::min() const {
    if (ack_samples.empty()) return std::nullopt;
    return *std::min_element(ack_samples.begin(), ack_samples.end());
}

std::optional<double> RttEstimate::median() const {
    if (ack_samples.empty()) return std::nullopt;
    std::vector<double> v = ack_samples;
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

std::optional<double> RttEstimate::mean() const {
    if (ack_samples.empty()) return std::nullopt;
    double sum = 0;
    for (double s : ack_samples) sum += s;
    return sum / static_cast<double>(ack_samples.size());
}

RttEstimate TcpTracker::estimate_rtt() const {
    RttEstimate est;
    if (syn_ts_ && synack_ts_)
        est.handshake_syn_side = static_cast<double>(*synack_ts_ - *syn_ts_) / 1e6;
    if (synack_ts_ && hs_ack_ts_)
        est.handshake_ack_side = static_cast<double>(*hs_ack_ts_ - *synack_ts_) / 1e6;
    if (syn_ts_ && hs_ack_ts_ && synack_ts_)
        est.handshake_total = static_cast<double>(*hs_ack_ts_ - *syn_ts_) / 1e6;
    est.ack_samples = ack_samples_;
    return est;
}

EstablishmentResult TcpTracker::establishment(int64_t now_us) const {
    EstablishmentResult out;
    if (!syn_ts_) return out;
    out.syn_retries = std::max(0, dirs_[0].syn_count - 1);
    if (synack_ts_) return out;
    if (rst_from_responder_before_synack_) {
        out.failure = FailReason::Refused;
    } else if (first_syn_ts_ && now_us - *first_syn_ts_ >= cfg_.syn_timeout_us) {
        out.failure = FailReason::NoAnswer;
    }
    return out;
}

CongestionSummary derive_congestion_events(const std::vector<TcpEvent>& events,
                                           int64_t correlation_window_us) {
    CongestionSummary out;
    auto is_loss = [](TcpEventKind k) {
        return k == TcpEventKind::RetransmissionPlain ||
               k == TcpEventKind::RetransmissionFast ||
               k == TcpEventKind::RetransmissionSpurious ||
               k == TcpEventKind::LostSegmentInferred;
    };
    for (size_t i = 0; i < events.size(); i++) {
        const TcpEvent& ev = events[i];
        if (ev.kind == TcpEventKind::EceSeen || ev.kind == TcpEventKind::CwrSeen) {
            out.count++;
            out.evidence.push_back(i);
        } else if (ev.kind == TcpEventKind::WindowReduction) {
            for (size_t j = 0; j < events.size(); j++) {
                const TcpEvent& other = events[j];
                if (!is_loss(other.kind) || other.direction != ev.direction) continue;
                int64_t dt = other.ts_us - ev.ts_us;
                if (dt < 0) dt = -dt;
                if (dt <= correlation_window_us) {
                    out.count++;
                    out.evidence.push_back(i);
                    out.evidence.push_back(j);
                    break;
                }
            }
        }
    }
    return out;
}

}  // namespace flowscope
