#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "flowscope/tcp_perf.hpp"
#include "trace_builder.hpp"

using namespace flowscope;
using namespace testutil;

namespace {

const uint32_t kClient = ip(10, 0, 1, 5);
const uint32_t kServer = ip(93, 184, 216, 34);

PacketRecord data(int64_t ts_us, uint32_t seq, uint16_t len,
                  uint8_t flags = tcpflag::kAck) {
    return tcp_pkt(ts_us, kClient, 40000, kServer, 443, flags, seq, 0, len);
}

PacketRecord ack_from_server(int64_t ts_us, uint32_t ack, uint16_t window = 65535) {
    return tcp_pkt(ts_us, kServer, 443, kClient, 40000, tcpflag::kAck, 0, ack, 0,
                   window);
}

size_t count_kind(const std::vector<TcpEvent>& events, TcpEventKind k) {
    size_t n = 0;
    for (const auto& e : events)
        if (e.kind == k) n++;
    return n;
}

}  // namespace

TEST_CASE("interval set merges and answers range queries") {
    IntervalSet s;
    s.add(10, 20);
    s.add(30, 40);
    CHECK(s.size() == 2);
    CHECK(s.intersects(15, 35));
    CHECK_FALSE(s.intersects(20, 30));
    CHECK_FALSE(s.contains(10, 25));
    s.add(20, 30);  // bridges the two
    CHECK(s.size() == 1);
    CHECK(s.contains(10, 40));
    s.add(5, 12);
    CHECK(s.contains(5, 40));
    CHECK_FALSE(s.contains(4, 6));
}

TEST_CASE("retransmission of unacked data without dup acks is plain") {
    TcpTracker t;
    std::vector<TcpEvent> ev;
    t.on_packet(data(0, 1000, 100), 0, ev);
    t.on_packet(data(300'000, 1000, 100), 0, ev);
    CHECK(count_kind(ev, TcpEventKind::RetransmissionPlain) == 1);
    CHECK(t.dir_state(0).pkts_retrans_plain == 1);
    CHECK(t.dir_state(0).pkts_in_order == 1);
}

TEST_CASE("retransmission of already-acked data is spurious") {
    TcpTracker t;
    std::vector<TcpEvent> ev;
    t.on_packet(data(0, 1000, 100), 0, ev);
    t.on_packet(ack_from_server(50'000, 1100), 1, ev);
    t.on_packet(data(400'000, 1000, 100), 0, ev);
    CHECK(count_kind(ev, TcpEventKind::RetransmissionSpurious) == 1);
    CHECK(count_kind(ev, TcpEventKind::RetransmissionPlain) == 0);
    CHECK(t.dir_state(0).pkts_retrans_spurious == 1);
}

TEST_CASE("three duplicate acks before the resend make it a fast retransmission") {
    TcpTracker t;
    std::vector<TcpEvent> ev;
    t.on_packet(data(0, 1000, 100), 0, ev);
    t.on_packet(ack_from_server(10'000, 1000), 1, ev);  // baseline ACK
    t.on_packet(ack_from_server(20'000, 1000), 1, ev);  // dup 1
    t.on_packet(ack_from_server(30'000, 1000), 1, ev);  // dup 2
    t.on_packet(ack_from_server(40'000, 1000), 1, ev);  // dup 3
    CHECK(count_kind(ev, TcpEventKind::DuplicateAck) == 3);
    t.on_packet(data(45'000, 1000, 100), 0, ev);
    CHECK(count_kind(ev, TcpEventKind::RetransmissionFast) == 1);
    CHECK(t.dir_state(0).pkts_retrans_fast == 1);
}

TEST_CASE("an ack with a different window is not a duplicate") {
    TcpTracker t;
    std::vector<TcpEvent> ev;
    t.on_packet(data(0, 1000, 100), 0, ev);
    t.on_packet(ack_from_server(10'000, 1000, 60000), 1, ev);
    t.on_packet(ack_from_server(20'000, 1000, 50000), 1, ev);  // window update
    CHECK(count_kind(ev, TcpEventKind::DuplicateAck) == 0);
}

TEST_CASE("a sequence jump leaves an inferred-loss gap") {
    TcpTracker t;
    std::vector<TcpEvent> ev;
    t.on_packet(data(0, 1000, 100), 0, ev);    // [1000,1100)
    t.on_packet(data(10'000, 2000, 100), 0, ev);  // jump: [1100,2000) missing
    REQUIRE(count_kind(ev, TcpEventKind::LostSegmentInferred) == 1);
    const TcpEvent* gap = nullptr;
    for (const auto& e : ev)
        if (e.kind == TcpEventKind::LostSegmentInferred) gap = &e;
    CHECK(gap->seq_hi - gap->seq_lo == 900);
}

TEST_CASE("a gap filled within the reorder window is out-of-order delivery") {
    TcpTracker t;
    std::vector<TcpEvent> ev;
    t.on_packet(data(0, 1000, 100), 0, ev);
    t.on_packet(data(10'000, 1200, 100), 0, ev);  // gap [1100,1200) at t=10ms
    t.on_packet(data(11'000, 1100, 100), 0, ev);  // filled 1ms later
    CHECK(count_kind(ev, TcpEventKind::OutOfOrder) == 1);
    CHECK(t.dir_state(0).pkts_out_of_order == 1);
    CHECK(t.dir_state(0).gaps.empty());
}

TEST_CASE("a gap filled after the reorder window is a late filler, not reordering") {
    TcpTracker t;
    std::vector<TcpEvent> ev;
    t.on_packet(data(0, 1000, 100), 0, ev);
    t.on_packet(data(10'000, 1200, 100), 0, ev);
    t.on_packet(data(20'000, 1100, 100), 0, ev);  // 10ms later, window is 3ms
    CHECK(count_kind(ev, TcpEventKind::OutOfOrder) == 0);
    CHECK(t.dir_state(0).pkts_out_of_order == 0);
    CHECK(t.dir_state(0).pkts_in_order == 3);
}

TEST_CASE("window reductions use the scaled window only when both sides offer scaling") {
    SUBCASE("both offer scale 7") {
        TcpTracker t;
        std::vector<TcpEvent> ev;
        auto syn = tcp_pkt(0, kClient, 40000, kServer, 443, tcpflag::kSyn, 100);
        syn.tcp_options.window_scale = 7;
        t.on_packet(syn, 0, ev);
        auto synack = tcp_pkt(1000, kServer, 443, kClient, 40000,
                              tcpflag::kSyn | tcpflag::kAck, 500, 101);
        synack.tcp_options.window_scale = 7;
        t.on_packet(synack, 1, ev);
        t.on_packet(ack_from_server(2000, 101, 100), 1, ev);  // 100<<7 = 12800
        t.on_packet(ack_from_server(3000, 101, 50), 1, ev);   // 50<<7  = 6400
        REQUIRE(count_kind(ev, TcpEventKind::WindowReduction) == 1);
        for (const auto& e : ev)
            if (e.kind == TcpEventKind::WindowReduction) {
                CHECK(e.from_bytes == 12800);
                CHECK(e.to_bytes == 6400);
            }
    }
    SUBCASE("only one side offers scaling, raw values are used") {
        TcpTracker t;
        std::vector<TcpEvent> ev;
        auto syn = tcp_pkt(0, kClient, 40000, kServer, 443, tcpflag::kSyn, 100);
        syn.tcp_options.window_scale = 7;
        t.on_packet(syn, 0, ev);
        t.on_packet(tcp_pkt(1000, kServer, 443, kClient, 40000,
                            tcpflag::kSyn | tcpflag::kAck, 500, 101),
                    1, ev);
        t.on_packet(ack_from_server(2000, 101, 100), 1, ev);
        t.on_packet(ack_from_server(3000, 101, 50), 1, ev);
        for (const auto& e : ev)
            if (e.kind == TcpEventKind::WindowReduction) {
                CHECK(e.from_bytes == 100);
                CHECK(e.to_bytes == 50);
            }
    }
}

TEST_CASE("a zero advertised window raises both events") {
    TcpTracker t;
    std::vector<TcpEvent> ev;
    t.on_packet(ack_from_server(0, 101, 1000), 1, ev);
    t.on_packet(ack_from_server(1000, 101, 0), 1, ev);
    CHECK(count_kind(ev, TcpEventKind::WindowReduction) == 1);
    CHECK(count_kind(ev, TcpEventKind::ZeroWindow) == 1);
}

TEST_CASE("a growing window is never a reduction") {
    TcpTracker t;
    std::vector<TcpEvent> ev;
    t.on_packet(ack_from_server(0, 101, 1000), 1, ev);
    t.on_packet(ack_from_server(1000, 101, 2000), 1, ev);
    t.on_packet(ack_from_server(2000, 101, 2000), 1, ev);
    CHECK(count_kind(ev, TcpEventKind::WindowReduction) == 0);
}

TEST_CASE("handshake timestamps split the round-trip by side") {
    TcpTracker t;
    std::vector<TcpEvent> ev;
    t.on_packet(tcp_pkt(0, kClient, 40000, kServer, 443, tcpflag::kSyn, 100), 0, ev);
    t.on_packet(tcp_pkt(180'000, kServer, 443, kClient, 40000,
                        tcpflag::kSyn | tcpflag::kAck, 500, 101),
                1, ev);
    t.on_packet(tcp_pkt(181'000, kClient, 40000, kServer, 443, tcpflag::kAck, 101,
                        501),
                0, ev);
    auto rtt = t.estimate_rtt();
    REQUIRE(rtt.handshake_syn_side);
    REQUIRE(rtt.handshake_ack_side);
    REQUIRE(rtt.handshake_total);
    CHECK(*rtt.handshake_syn_side == doctest::Approx(0.180));
    CHECK(*rtt.handshake_ack_side == doctest::Approx(0.001));
    CHECK(*rtt.handshake_total == doctest::Approx(0.181));
    CHECK(t.handshake_seen());
}

TEST_CASE("data-to-ack spacing yields an RTT sample") {
    TcpTracker t;
    std::vector<TcpEvent> ev;
    t.on_packet(data(1'000'000, 1000, 100), 0, ev);
    t.on_packet(ack_from_server(1'200'000, 1100), 1, ev);
    auto rtt = t.estimate_rtt();
    REQUIRE(rtt.ack_samples.size() == 1);
    CHECK(rtt.ack_samples[0] == doctest::Approx(0.2));
    CHECK(*rtt.min() == doctest::Approx(0.2));
    CHECK(*rtt.median() == doctest::Approx(0.2));
    CHECK(*rtt.mean() == doctest::Approx(0.2));
}

TEST_CASE("retransmitted edges never produce RTT samples") {
    TcpTracker t;
    std::vector<TcpEvent> ev;
    t.on_packet(data(0, 1000, 100), 0, ev);
    t.on_packet(data(500'000, 1000, 100), 0, ev);       // retransmission
    t.on_packet(ack_from_server(600'000, 1100), 1, ev);  // ambiguous ACK
    CHECK(t.estimate_rtt().ack_samples.empty());
}

TEST_CASE("congestion events") {
    SUBCASE("rule a: every explicit-notification flag counts") {
        std::vector<TcpEvent> ev{
            {TcpEventKind::EceSeen, 0, 1, 0, 0, 0, 0, FailReason::None},
            {TcpEventKind::CwrSeen, 500, 0, 0, 0, 0, 0, FailReason::None},
        };
        CHECK(derive_congestion_events(ev).count == 2);
    }
    SUBCASE("rule b: a window reduction needs a same-direction loss nearby") {
        std::vector<TcpEvent> ev{
            {TcpEventKind::WindowReduction, 1'000'000, 0, 0, 0, 8000, 4000,
             FailReason::None},
            {TcpEventKind::RetransmissionPlain, 1'500'000, 0, 10, 20, 0, 0,
             FailReason::None},
        };
        auto c = derive_congestion_events(ev);
        CHECK(c.count == 1);
        REQUIRE(c.evidence.size() == 2);
    }
    SUBCASE("a loss in the other direction does not correlate") {
        std::vector<TcpEvent> ev{
            {TcpEventKind::WindowReduction, 1'000'000, 0, 0, 0, 8000, 4000,
             FailReason::None},
            {TcpEventKind::RetransmissionPlain, 1'500'000, 1, 10, 20, 0, 0,
             FailReason::None},
        };
        CHECK(derive_congestion_events(ev).count == 0);
    }
    SUBCASE("a loss outside the correlation window does not correlate") {
        std::vector<TcpEvent> ev{
            {TcpEventKind::WindowReduction, 1'000'000, 0, 0, 0, 8000, 4000,
             FailReason::None},
            {TcpEventKind::RetransmissionPlain, 2'100'000, 0, 10, 20, 0, 0,
             FailReason::None},
        };
        CHECK(derive_congestion_events(ev).count == 0);
        // widening the window brings it back
        CHECK(derive_congestion_events(ev, 2'000'000).count == 1);
    }
    SUBCASE("a lone window reduction is not congestion") {
        std::vector<TcpEvent> ev{
            {TcpEventKind::WindowReduction, 0, 0, 0, 0, 8000, 4000,
             FailReason::None},
        };
        CHECK(derive_congestion_events(ev).count == 0);
    }
}

TEST_CASE("establishment outcomes") {
    SUBCASE("unanswered SYN past the timeout is no-answer") {
        TcpTracker t;
        std::vector<TcpEvent> ev;
        t.on_packet(tcp_pkt(0, kClient, 40000, kServer, 443, tcpflag::kSyn, 100),
                    0, ev);
        auto est = t.establishment(30'000'000);
        CHECK(est.failure == FailReason::NoAnswer);
        CHECK(t.establishment(29'000'000).failure == FailReason::None);
    }
    SUBCASE("RST from the responder before the SYN-ACK is a refusal") {
        TcpTracker t;
        std::vector<TcpEvent> ev;
        t.on_packet(tcp_pkt(0, kClient, 40000, kServer, 443, tcpflag::kSyn, 100),
                    0, ev);
        t.on_packet(tcp_pkt(500, kServer, 443, kClient, 40000,
                            tcpflag::kRst | tcpflag::kAck, 0, 101),
                    1, ev);
        CHECK(t.establishment(1'000'000).failure == FailReason::Refused);
    }
    SUBCASE("a retried SYN that eventually succeeds is counted, not a failure") {
        TcpTracker t;
        std::vector<TcpEvent> ev;
        t.on_packet(tcp_pkt(0, kClient, 40000, kServer, 443, tcpflag::kSyn, 100),
                    0, ev);
        t.on_packet(tcp_pkt(3'000'000, kClient, 40000, kServer, 443, tcpflag::kSyn,
                            100),
                    0, ev);
        t.on_packet(tcp_pkt(3'100'000, kServer, 443, kClient, 40000,
                            tcpflag::kSyn | tcpflag::kAck, 500, 101),
                    1, ev);
        CHECK(count_kind(ev, TcpEventKind::SynRetry) == 1);
        auto est = t.establishment(60'000'000);
        CHECK(est.failure == FailReason::None);
        CHECK(est.syn_retries == 1);
    }
}

TEST_CASE("the flag census counts every set bit") {
    TcpTracker t;
    std::vector<TcpEvent> ev;
    t.on_packet(tcp_pkt(0, kClient, 40000, kServer, 443,
                        tcpflag::kSyn | tcpflag::kEce | tcpflag::kCwr, 100),
                0, ev);
    t.on_packet(tcp_pkt(1000, kClient, 40000, kServer, 443, tcpflag::kAck, 101, 1),
                0, ev);
    const auto& c = t.flag_counts();
    CHECK(c[1] == 1);  // SYN
    CHECK(c[4] == 1);  // ACK
    CHECK(c[6] == 1);  // ECE
    CHECK(c[7] == 1);  // CWR
    CHECK(c[0] == 0);  // FIN
    CHECK(count_kind(ev, TcpEventKind::EceSeen) == 1);
    CHECK(count_kind(ev, TcpEventKind::CwrSeen) == 1);
}

TEST_CASE("sequence numbers unwrap across the 32-bit boundary") {
    TcpTracker t;
    std::vector<TcpEvent> ev;
    t.on_packet(data(0, 0xFFFFFF00u, 0x100), 0, ev);  // ends exactly at the wrap
    t.on_packet(data(1000, 0, 100), 0, ev);
    CHECK(count_kind(ev, TcpEventKind::LostSegmentInferred) == 0);
    CHECK(t.dir_state(0).pkts_in_order == 2);
}

TEST_CASE("every data packet lands in exactly one partition class") {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 10; trial++) {
        TcpTracker t;
        std::vector<TcpEvent> ev;
        int64_t ts = 0;
        uint32_t base = rng();
        for (int i = 0; i < 500; i++) {
            ts += static_cast<int64_t>(rng() % 5000);
            int dir = static_cast<int>(rng() % 2);
            uint32_t seq = base + (rng() % 40) * 100;
            if (rng() % 4 == 0) {
                t.on_packet(tcp_pkt(ts, kServer, 443, kClient, 40000, tcpflag::kAck,
                                    0, base + (rng() % 40) * 100),
                            1 - dir, ev);
            } else {
                uint16_t len = static_cast<uint16_t>(1 + rng() % 300);
                auto p = dir == 0 ? tcp_pkt(ts, kClient, 40000, kServer, 443,
                                            tcpflag::kAck, seq, 0, len)
                                  : tcp_pkt(ts, kServer, 443, kClient, 40000,
                                            tcpflag::kAck, seq, 0, len);
                t.on_packet(p, dir, ev);
            }
        }
        for (int d = 0; d < 2; d++) {
            const auto& s = t.dir_state(d);
            CHECK(s.pkts_in_order + s.pkts_retrans_plain + s.pkts_retrans_fast +
                      s.pkts_retrans_spurious + s.pkts_out_of_order ==
                  s.data_packets);
        }
    }
}
