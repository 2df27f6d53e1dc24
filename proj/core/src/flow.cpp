#include "flowscope/flow.hpp"

#include <algorithm>

namespace flowscope {

FlowKey FlowKey::of(const PacketRecord& pkt) {
    FlowKey key;
    key.protocol = pkt.protocol;
    uint16_t sp = pkt.has_ports ? pkt.src_port : 0;
    uint16_t dp = pkt.has_ports ? pkt.dst_port : 0;
    bool src_first = pkt.src_addr < pkt.dst_addr ||
                     (pkt.src_addr == pkt.dst_addr && sp <= dp);
    if (src_first) {
        key.addr_lo = pkt.src_addr;
        key.port_lo = sp;
        key.addr_hi = pkt.dst_addr;
        key.port_hi = dp;
    } else {
        key.addr_lo = pkt.dst_addr;
        key.port_lo = dp;
        key.addr_hi = pkt.src_addr;
        key.port_hi = sp;
    }
    return key;
}

uint16_t FlowRecord::server_port(const ServiceDb& db) const {
    uint16_t other =
        initiator_addr == key.addr_lo && initiator_port == key.port_lo ? key.port_hi
                                                                       : key.port_lo;
    if (saw_syn) return other;
    uint16_t a = std::min(key.port_lo, key.port_hi);
    uint16_t b = std::max(key.port_lo, key.port_hi);
    bool a_known = db.lookup(a, key.protocol == 6).has_value();
    bool b_known = db.lookup(b, key.protocol == 6).has_value();
    if (a_known == b_known) return a;
    return a_known ? a : b;
}

FlowMetrics flow_metrics(const FlowRecord& flow) {
    FlowMetrics m;
    m.length_pkts = flow.packets_fwd + flow.packets_rev;
    m.bytes_total = flow.bytes_fwd + flow.bytes_rev;
    m.duration_s = static_cast<double>(flow.last_ts_us - flow.first_ts_us) / 1e6;
    if (flow.last_ts_us > flow.first_ts_us)
        m.mean_rate_bits_per_s = 8.0 * static_cast<double>(m.bytes_total) / m.duration_s;
    return m;
}

FlowTable::FlowTable(FlowTableConfig cfg) : cfg_(cfg) {}

std::unique_ptr<FlowRecord> FlowTable::make_flow(const PacketRecord& pkt) {
    auto flow = std::make_unique<FlowRecord>();
    flow->key = FlowKey::of(pkt);
    flow->initiator_addr = pkt.src_addr;
    flow->initiator_port = pkt.has_ports ? pkt.src_port : 0;
    flow->first_ts_us = pkt.ts_us;
    flow->last_ts_us = pkt.ts_us;
    flow->saw_syn = pkt.is_tcp && (pkt.tcp_flags & tcpflag::kSyn) &&
                    !(pkt.tcp_flags & tcpflag::kAck);
    if (pkt.protocol == 6) flow->tcp = std::make_unique<TcpTracker>(cfg_.tcp);
    flows_created_++;
    return flow;
}

FlowTable::UpdateResult FlowTable::update(const PacketRecord& pkt) {
    FlowKey key = FlowKey::of(pkt);
    auto it = active_.find(key);
    if (it != active_.end()) {
        FlowRecord* flow = it->second.get();
        bool is_syn = pkt.is_tcp && (pkt.tcp_flags & tcpflag::kSyn) &&
                      !(pkt.tcp_flags & tcpflag::kAck);
        bool closed = flow->tcp && flow->tcp->close_observed();
        bool past_linger =
            closed && flow->tcp->close_ts_us() &&
            pkt.ts_us > *flow->tcp->close_ts_us() + cfg_.tcp.fin_linger_us;
        bool idle = pkt.ts_us >= flow->last_ts_us + cfg_.idle_timeout_us;
        if ((closed && (is_syn || past_linger)) || idle) {
            std::vector<std::unique_ptr<FlowRecord>> done;
            finish(std::move(it->second), done, !closed);
            active_.erase(it);
            finished_.insert(finished_.end(), std::make_move_iterator(done.begin()),
                             std::make_move_iterator(done.end()));
        } else {
            int dir = flow->direction_of(pkt);
            if (dir == 0) {
                flow->packets_fwd++;
                flow->bytes_fwd += pkt.ip_total_length;
            } else {
                flow->packets_rev++;
                flow->bytes_rev += pkt.ip_total_length;
            }
            flow->last_ts_us = std::max(flow->last_ts_us, pkt.ts_us);
            if (flow->tcp && pkt.is_tcp) flow->tcp->on_packet(pkt, dir, flow->events);
            return {flow, false};
        }
    }
    auto flow = make_flow(pkt);
    flow->packets_fwd = 1;
    flow->bytes_fwd = pkt.ip_total_length;
    if (flow->tcp && pkt.is_tcp) flow->tcp->on_packet(pkt, 0, flow->events);
    FlowRecord* raw = flow.get();
    active_[key] = std::move(flow);
    return {raw, true};
}

void FlowTable::finish(std::unique_ptr<FlowRecord> flow,
                       std::vector<std::unique_ptr<FlowRecord>>& out, bool expired) {
    if (expired)
        flows_expired_++;
    else
        flows_fin_closed_++;
    if (flow->tcp) {
        int64_t now = flow->last_ts_us + cfg_.idle_timeout_us;
        auto est = flow->tcp->establishment(now);
        if (est.failure != FailReason::None)
            flow->events.push_back({TcpEventKind::EstablishmentFailure,
                                    flow->last_ts_us, 0, 0, 0, 0, 0, est.failure});
    }
    out.push_back(std::move(flow));
}

std::vector<std::unique_ptr<FlowRecord>> FlowTable::expire(int64_t now_us) {
    std::vector<std::unique_ptr<FlowRecord>> out;
    for (auto it = active_.begin(); it != active_.end();) {
        if (it->second->last_ts_us + cfg_.idle_timeout_us <= now_us) {
            finish(std::move(it->second), out, true);
            it = active_.erase(it);
        } else {
            ++it;
        }
    }
    out.insert(out.begin(), std::make_move_iterator(finished_.begin()),
               std::make_move_iterator(finished_.end()));
    finished_.clear();
    return out;
}

std::vector<std::unique_ptr<FlowRecord>> FlowTable::flush() {
    std::vector<std::unique_ptr<FlowRecord>> out;
    out.insert(out.end(), std::make_move_iterator(finished_.begin()),
               std::make_move_iterator(finished_.end()));
    finished_.clear();
    for (auto& [key, flow] : active_) {
        bool closed = flow->tcp && flow->tcp->close_observed();
        finish(std::move(flow), out, !closed);
    }
    active_.clear();
    return out;
}

}  // namespace flowscope
