#ifndef FLOWSCOPE_FLOW_HPP
#define FLOWSCOPE_FLOW_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "flowscope/classify.hpp"
#include "flowscope/packet.hpp"
#include "flowscope/tcp_perf.hpp"

namespace flowscope {

// Canonical bidirectional 5-tuple: the numerically smaller address (with its
// port) comes first, so a packet and its reverse produce the same key.
struct FlowKey {
    uint32_t addr_lo = 0;
    uint32_t addr_hi = 0;
    uint16_t port_lo = 0;  // port bound to addr_lo
    uint16_t port_hi = 0;
    uint8_t protocol = 0;

    auto operator<=>(const FlowKey&) const = default;
    static FlowKey of(const PacketRecord& pkt);
};

struct FlowMetrics {
    uint64_t length_pkts = 0;
    uint64_t bytes_total = 0;
    double duration_s = 0;
    std::optional<double> mean_rate_bits_per_s;  // undefined when duration is 0
};

struct FlowRecord {
    FlowKey key;
    uint32_t initiator_addr = 0;
    uint16_t initiator_port = 0;
    bool saw_syn = false;
    int64_t first_ts_us = 0;
    int64_t last_ts_us = 0;
    uint64_t packets_fwd = 0, packets_rev = 0;  // fwd = initiator's direction
    uint64_t bytes_fwd = 0, bytes_rev = 0;      // IPv4 total-length bytes

    std::unique_ptr<TcpTracker> tcp;  // null for non-TCP flows
    std::vector<TcpEvent> events;

    // filled by the pipeline
    Scope scope = Scope::Wan;
    std::string continent;
    ServiceClass service{ServiceCategory::NonIdentified, "NonIdentified"};

    bool bidirectional() const { return packets_fwd > 0 && packets_rev > 0; }
    int direction_of(const PacketRecord& pkt) const {
        return pkt.src_addr == initiator_addr && pkt.src_port == initiator_port ? 0
                                                                                : 1;
    }
    // Destination port of the SYN when captured, else the smaller port that
    // the service database knows, else the smaller port.
    uint16_t server_port(const ServiceDb& db) const;
};

FlowMetrics flow_metrics(const FlowRecord& flow);

struct FlowTableConfig {
    int64_t idle_timeout_us = 60000000;
    TcpTrackerConfig tcp;
};

// Single-writer flow reconstruction over one trace.
class FlowTable {
  public:
    explicit FlowTable(FlowTableConfig cfg = {});

    struct UpdateResult {
        FlowRecord* flow;
        bool is_new;
    };
    // Packets must arrive in non-decreasing timestamp order. Non-first
    // fragments attach to no flow and are ignored here.
    UpdateResult update(const PacketRecord& pkt);

    // Move every active flow idle since `now - idle_timeout` to finished.
    std::vector<std::unique_ptr<FlowRecord>> expire(int64_t now_us);
    // End of trace: finish everything.
    std::vector<std::unique_ptr<FlowRecord>> flush();

    size_t active_count() const { return active_.size(); }
    uint64_t flows_created() const { return flows_created_; }
    uint64_t flows_expired() const { return flows_expired_; }
    uint64_t flows_fin_closed() const { return flows_fin_closed_; }

  private:
    void finish(std::unique_ptr<FlowRecord> flow,
                std::vector<std::unique_ptr<FlowRecord>>& out, bool expired);
    std::unique_ptr<FlowRecord> make_flow(const PacketRecord& pkt);

    FlowTableConfig cfg_;
    std::map<FlowKey, std::unique_ptr<FlowRecord>> active_;
    std::vector<std::unique_ptr<FlowRecord>> finished_;
    uint64_t flows_created_ = 0;
    uint64_t flows_expired_ = 0;
    uint64_t flows_fin_closed_ = 0;
};

}  // namespace flowscope

#endif
