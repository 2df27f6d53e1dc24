#ifndef FLOWSCOPE_PIPELINE_HPP
#define FLOWSCOPE_PIPELINE_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowscope/anon.hpp"
#include "flowscope/classify.hpp"
#include "flowscope/flow.hpp"
#include "flowscope/report.hpp"

namespace flowscope {

class WriteFailure : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Internal guard: report writers refuse to format an address unless an
// anonymizer is in place.
class RefusesRawAddresses : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

struct RunConfig {
    std::vector<std::string> inputs;
    std::string prefix_file;
    std::vector<std::string> lan_cidrs;  // merged with prefix_file contents
    std::vector<std::string> man_cidrs;
    std::string geo_db_path;
    std::string services_path;
    std::string anon_key_hex;  // from config file or FLOWSCOPE_ANON_KEY
    double idle_timeout_s = 60.0;
    double reorder_window_ms = 3.0;
    double correlation_window_s = 1.0;
    double bin_width_s = 3.0;
    double other_threshold_percent = 1.0;
    std::string out_dir = "report";
    bool format_csv = true;
    bool format_text = false;
    bool rate_cdf_linear = false;

    // Flat "key = value" config file; unknown keys rejected.
    static RunConfig load(const std::string& path);
    void merge_env_key();
    PrefixConfig prefixes() const;
    FlowTableConfig flow_config() const;
    // Serialization used for the manifest's config hash; excludes the key.
    std::string canonical() const;
};

// Per-flow summary kept for export and distribution building. Addresses are
// raw here; anonymization happens at the emit boundary.
struct FlowSummary {
    uint32_t src_addr = 0, dst_addr = 0;  // initiator first
    uint16_t src_port = 0, dst_port = 0;
    uint8_t protocol = 0;
    int64_t first_ts_us = 0;
    double duration_s = 0;
    uint64_t packets = 0, packets_fwd = 0, packets_rev = 0;
    uint64_t bytes = 0;
    std::optional<double> mean_rate_bps;
    bool bidirectional = false;
    Scope scope = Scope::Wan;
    std::string continent;
    std::string service = "NonIdentified";
    std::string service_category = "NonIdentified";

    uint64_t retx_plain = 0, retx_fast = 0, retx_spurious = 0;
    uint64_t lost_inferred = 0, out_of_order = 0, dup_acks = 0;
    uint64_t window_reductions = 0, zero_windows = 0, ece = 0, cwr = 0;
    uint64_t congestion_events = 0;
    int syn_retries = 0;
    FailReason establishment_failure = FailReason::None;
    std::optional<double> handshake_rtt_s;

    std::vector<TcpEvent> events;
};

struct CountPair {
    uint64_t count = 0;
    uint64_t bytes = 0;
    CountPair& operator+=(const CountPair& o) {
        count += o.count;
        bytes += o.bytes;
        return *this;
    }
};

struct Aggregates {
    IngestStats ingest;
    std::map<std::string, CountPair> scope_counts;      // per packet
    std::map<std::string, CountPair> transport_counts;  // per packet
    std::map<std::string, CountPair> continent_counts;  // per WAN packet
    uint64_t foreign_both_ends = 0;

    // TCP data-packet partition, both directions of all TCP flows
    uint64_t tcp_in_order = 0, tcp_retx_plain = 0, tcp_retx_fast = 0;
    uint64_t tcp_retx_spurious = 0, tcp_out_of_order = 0;
    uint64_t tcp_data_packets = 0;
    uint64_t tcp_lost_inferred = 0;
    std::array<uint64_t, 8> tcp_flag_counts{};
    uint64_t window_reduction_packets = 0;
    uint64_t congestion_events = 0;
    uint64_t establishment_no_answer = 0, establishment_refused = 0;
    uint64_t syn_retries = 0;

    std::vector<FlowSummary> flows;

    uint64_t tcp_flows() const;
    void merge(Aggregates&& other);
};

struct AnalysisContext {
    PrefixConfig prefixes;
    GeoDb geo;
    ServiceDb services;
    FlowTableConfig flow_cfg;
};

// Classification consumes raw addresses, so this runs before anonymization;
// the emit boundary is where addresses become opaque.
Aggregates analyze_trace(const std::string& path, const AnalysisContext& ctx);

struct EmitResult {
    std::vector<std::string> files;
};

// Writes percent tables, distribution series, flow/event exports and the run
// manifest. `anon` must be non-null: addresses never leave raw.
EmitResult emit_report(const Aggregates& agg, const RunConfig& cfg,
                       const Anonymizer* anon);

// Re-aggregate a previously exported flows.csv (addresses already opaque).
Aggregates load_flow_export(const std::string& flows_csv_path);

std::string sha256_file_hex(const std::string& path);
std::string sha256_hex(const std::string& data);

constexpr const char* kToolVersion = "0.1.0";

}  // namespace flowscope

#endif
