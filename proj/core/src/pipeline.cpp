#include "flowscope/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "flowscope/pcap.hpp"

namespace fs = std::filesystem;

namespace flowscope {

namespace {

std::string strip(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                          (s.front() == '\'' && s.back() == '\'')))
        return s.substr(1, s.size() - 2);
    return s;
}

double parse_num(const std::string& v, const std::string& path, int line) {
    try {
        size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ParseError("expected a number, got '" + v + "'", path, line);
    }
}

}  // namespace

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open", path, 0);
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = strip(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("expected 'key = value'", path, lineno);
        std::string key = strip(line.substr(0, eq));
        std::string value = unquote(strip(line.substr(eq + 1)));
        if (key == "prefix_file")
            cfg.prefix_file = value;
        else if (key == "geo_db")
            cfg.geo_db_path = value;
        else if (key == "services")
            cfg.services_path = value;
        else if (key == "anon_key_hex")
            cfg.anon_key_hex = value;
        else if (key == "idle_timeout_s")
            cfg.idle_timeout_s = parse_num(value, path, lineno);
        else if (key == "reorder_window_ms")
            cfg.reorder_window_ms = parse_num(value, path, lineno);
        else if (key == "correlation_window_s")
            cfg.correlation_window_s = parse_num(value, path, lineno);
        else if (key == "bin_width_s")
            cfg.bin_width_s = parse_num(value, path, lineno);
        else if (key == "other_threshold_percent")
            cfg.other_threshold_percent = parse_num(value, path, lineno);
        else if (key == "out_dir")
            cfg.out_dir = value;
        else if (key == "lan")
            cfg.lan_cidrs.push_back(value);
        else if (key == "man")
            cfg.man_cidrs.push_back(value);
        else if (key == "format") {
            if (value == "csv") {
                cfg.format_csv = true;
                cfg.format_text = false;
            } else if (value == "text") {
                cfg.format_csv = false;
                cfg.format_text = true;
            } else if (value == "both") {
                cfg.format_csv = cfg.format_text = true;
            } else {
                throw ParseError("format must be csv, text or both", path, lineno);
            }
        } else if (key == "rate_cdf_linear") {
            cfg.rate_cdf_linear = value == "true" || value == "1";
        } else {
            throw ParseError("unknown key '" + key + "'", path, lineno);
        }
    }
    if (cfg.idle_timeout_s <= 0 || cfg.bin_width_s <= 0 ||
        cfg.other_threshold_percent <= 0 || cfg.reorder_window_ms <= 0 ||
        cfg.correlation_window_s <= 0)
        throw ParseError("thresholds must be positive", path, 0);
    return cfg;
}

void RunConfig::merge_env_key() {
    if (!anon_key_hex.empty()) return;
    if (const char* env = std::getenv("FLOWSCOPE_ANON_KEY")) anon_key_hex = env;
}

PrefixConfig RunConfig::prefixes() const {
    PrefixConfig cfg;
    if (!prefix_file.empty()) cfg = PrefixConfig::load(prefix_file);
    auto append = [](std::vector<Cidr>& list, const std::vector<std::string>& texts) {
        for (const auto& t : texts) {
            auto c = Cidr::parse(t);
            if (!c) throw ParseError("bad cidr '" + t + "'", "<cli>", 0);
            if (std::find(list.begin(), list.end(), *c) == list.end())
                list.push_back(*c);
        }
    };
    append(cfg.lan, lan_cidrs);
    append(cfg.man, man_cidrs);
    cfg.validate();
    return cfg;
}

FlowTableConfig RunConfig::flow_config() const {
    FlowTableConfig fc;
    fc.idle_timeout_us = static_cast<int64_t>(idle_timeout_s * 1e6);
    fc.tcp.reorder_window_us = static_cast<int64_t>(reorder_window_ms * 1e3);
    fc.tcp.correlation_window_us = static_cast<int64_t>(correlation_window_s * 1e6);
    return fc;
}

std::string RunConfig::canonical() const {
    std::ostringstream out;
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.9g", v);
        return std::string(buf);
    };
    out << "bin_width_s=" << num(bin_width_s) << '\n'
        << "correlation_window_s=" << num(correlation_window_s) << '\n'
        << "format=" << (format_csv ? "csv" : "") << (format_text ? "text" : "")
        << '\n'
        << "geo_db=" << geo_db_path << '\n'
        << "idle_timeout_s=" << num(idle_timeout_s) << '\n';
    for (const auto& c : lan_cidrs) out << "lan=" << c << '\n';
    for (const auto& c : man_cidrs) out << "man=" << c << '\n';
    out << "other_threshold_percent=" << num(other_threshold_percent) << '\n'
        << "prefix_file=" << prefix_file << '\n'
        << "rate_cdf_linear=" << (rate_cdf_linear ? "true" : "false") << '\n'
        << "reorder_window_ms=" << num(reorder_window_ms) << '\n'
        << "services=" << services_path << '\n';
    return out.str();
}

uint64_t Aggregates::tcp_flows() const {
    uint64_t n = 0;
    for (const auto& f : flows)
        if (f.protocol == 6) n++;
    return n;
}

void Aggregates::merge(Aggregates&& other) {
    ingest.packets_total += other.ingest.packets_total;
    ingest.packets_ipv4 += other.ingest.packets_ipv4;
    ingest.packets_ipv6_skipped += other.ingest.packets_ipv6_skipped;
    ingest.packets_non_ip_skipped += other.ingest.packets_non_ip_skipped;
    ingest.packets_truncated += other.ingest.packets_truncated;
    ingest.decode_errors += other.ingest.decode_errors;
    ingest.monotonicity_violations += other.ingest.monotonicity_violations;
    ingest.ipv4_bytes += other.ingest.ipv4_bytes;
    for (auto& [k, v] : other.scope_counts) scope_counts[k] += v;
    for (auto& [k, v] : other.transport_counts) transport_counts[k] += v;
    for (auto& [k, v] : other.continent_counts) continent_counts[k] += v;
    foreign_both_ends += other.foreign_both_ends;
    tcp_in_order += other.tcp_in_order;
    tcp_retx_plain += other.tcp_retx_plain;
    tcp_retx_fast += other.tcp_retx_fast;
    tcp_retx_spurious += other.tcp_retx_spurious;
    tcp_out_of_order += other.tcp_out_of_order;
    tcp_data_packets += other.tcp_data_packets;
    tcp_lost_inferred += other.tcp_lost_inferred;
    for (size_t i = 0; i < 8; i++) tcp_flag_counts[i] += other.tcp_flag_counts[i];
    window_reduction_packets += other.window_reduction_packets;
    congestion_events += other.congestion_events;
    establishment_no_answer += other.establishment_no_answer;
    establishment_refused += other.establishment_refused;
    syn_retries += other.syn_retries;
    flows.insert(flows.end(), std::make_move_iterator(other.flows.begin()),
                 std::make_move_iterator(other.flows.end()));
}

namespace {

FlowSummary summarize_flow(const FlowRecord& flow, const AnalysisContext& ctx) {
    FlowSummary s;
    s.src_addr = flow.initiator_addr;
    s.src_port = flow.initiator_port;
    if (flow.initiator_addr == flow.key.addr_lo &&
        flow.initiator_port == flow.key.port_lo) {
        s.dst_addr = flow.key.addr_hi;
        s.dst_port = flow.key.port_hi;
    } else {
        s.dst_addr = flow.key.addr_lo;
        s.dst_port = flow.key.port_lo;
    }
    s.protocol = flow.key.protocol;
    s.first_ts_us = flow.first_ts_us;
    auto m = flow_metrics(flow);
    s.duration_s = m.duration_s;
    s.packets = m.length_pkts;
    s.packets_fwd = flow.packets_fwd;
    s.packets_rev = flow.packets_rev;
    s.bytes = m.bytes_total;
    s.mean_rate_bps = m.mean_rate_bits_per_s;
    s.bidirectional = flow.bidirectional();
    s.scope = flow.scope;
    s.continent = flow.continent;
    if (flow.key.protocol == 6) {
        auto svc = classify_service(flow.server_port(ctx.services), ctx.services);
        s.service = svc.name;
        switch (svc.category) {
            case ServiceCategory::Ssh: s.service_category = "SSH"; break;
            case ServiceCategory::Dns: s.service_category = "DNS"; break;
            case ServiceCategory::Mail: s.service_category = "Mail"; break;
            case ServiceCategory::Http: s.service_category = "HTTP"; break;
            case ServiceCategory::Https: s.service_category = "HTTPS"; break;
            case ServiceCategory::Named: s.service_category = svc.name; break;
            case ServiceCategory::NonIdentified:
                s.service_category = "NonIdentified";
                break;
        }
    }
    for (const auto& ev : flow.events) {
        switch (ev.kind) {
            case TcpEventKind::RetransmissionPlain: s.retx_plain++; break;
            case TcpEventKind::RetransmissionFast: s.retx_fast++; break;
            case TcpEventKind::RetransmissionSpurious: s.retx_spurious++; break;
            case TcpEventKind::LostSegmentInferred: s.lost_inferred++; break;
            case TcpEventKind::OutOfOrder: s.out_of_order++; break;
            case TcpEventKind::DuplicateAck: s.dup_acks++; break;
            case TcpEventKind::WindowReduction: s.window_reductions++; break;
            case TcpEventKind::ZeroWindow: s.zero_windows++; break;
            case TcpEventKind::EceSeen: s.ece++; break;
            case TcpEventKind::CwrSeen: s.cwr++; break;
            case TcpEventKind::SynRetry: s.syn_retries++; break;
            case TcpEventKind::EstablishmentFailure:
                s.establishment_failure = ev.fail_reason;
                break;
        }
    }
    if (flow.tcp) {
        auto cong = derive_congestion_events(flow.events,
                                             ctx.flow_cfg.tcp.correlation_window_us);
        s.congestion_events = cong.count;
        auto rtt = flow.tcp->estimate_rtt();
        s.handshake_rtt_s = rtt.handshake_total;
    }
    s.events = flow.events;
    return s;
}

void fold_flow_into(Aggregates& agg, const FlowRecord& flow,
                    const AnalysisContext& ctx) {
    FlowSummary s = summarize_flow(flow, ctx);
    if (flow.tcp) {
        for (int d = 0; d < 2; d++) {
            const auto& st = flow.tcp->dir_state(d);
            agg.tcp_in_order += st.pkts_in_order;
            agg.tcp_retx_plain += st.pkts_retrans_plain;
            agg.tcp_retx_fast += st.pkts_retrans_fast;
            agg.tcp_retx_spurious += st.pkts_retrans_spurious;
            agg.tcp_out_of_order += st.pkts_out_of_order;
            agg.tcp_data_packets += st.data_packets;
        }
        for (size_t i = 0; i < 8; i++)
            agg.tcp_flag_counts[i] += flow.tcp->flag_counts()[i];
    }
    agg.tcp_lost_inferred += s.lost_inferred;
    agg.window_reduction_packets += s.window_reductions;
    agg.congestion_events += s.congestion_events;
    agg.syn_retries += static_cast<uint64_t>(s.syn_retries);
    if (s.establishment_failure == FailReason::NoAnswer) agg.establishment_no_answer++;
    if (s.establishment_failure == FailReason::Refused) agg.establishment_refused++;
    agg.flows.push_back(std::move(s));
}

}  // namespace

Aggregates analyze_trace(const std::string& path, const AnalysisContext& ctx) {
    Aggregates agg;
    PcapReader reader(path);
    FlowTable table(ctx.flow_cfg);
    while (auto pkt = reader.next()) {
        auto scope = classify_scope(*pkt, ctx.prefixes);
        if (scope.foreign_both_ends) agg.foreign_both_ends++;
        agg.scope_counts[scope_name(scope.scope)] += {1, pkt->ip_total_length};
        agg.transport_counts[classify_transport(*pkt).label()] +=
            {1, pkt->ip_total_length};
        std::string continent;
        if (scope.scope == Scope::Wan) {
            continent = ctx.geo.lookup(scope.remote_addr);
            agg.continent_counts[continent] += {1, pkt->ip_total_length};
        }
        if (pkt->non_first_fragment) continue;
        auto res = table.update(*pkt);
        if (res.is_new) {
            res.flow->scope = scope.scope;
            res.flow->continent = continent;
        }
    }
    agg.ingest = reader.stats();
    for (auto& flow : table.flush()) fold_flow_into(agg, *flow, ctx);
    std::sort(agg.flows.begin(), agg.flows.end(),
              [](const FlowSummary& a, const FlowSummary& b) {
                  return a.first_ts_us < b.first_ts_us;
              });
    return agg;
}

namespace {

std::string anonymized_addr(uint32_t addr, const Anonymizer* anon) {
    if (!anon)
        throw RefusesRawAddresses(
            "report writer invoked without an anonymizer in place");
    return addr_to_string(anon->anonymize(addr));
}

void write_file(const fs::path& path, const std::string& content,
                std::vector<std::string>& files) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw WriteFailure("cannot write " + path.string());
    out << content;
    if (!out) throw WriteFailure("cannot write " + path.string());
    files.push_back(path.filename().string());
}

const char* fail_name(FailReason r) {
    switch (r) {
        case FailReason::None: return "none";
        case FailReason::NoAnswer: return "no_answer";
        case FailReason::Refused: return "refused";
    }
    return "?";
}

}  // namespace

EmitResult emit_report(const Aggregates& agg, const RunConfig& cfg,
                       const Anonymizer* anon) {
    if (!anon)
        throw RefusesRawAddresses("emit_report requires an anonymizer");
    fs::path dir(cfg.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw WriteFailure("cannot create output directory " + dir.string());
    EmitResult result;

    auto emit_table = [&](const std::string& stem, const PercentTable& table) {
        if (cfg.format_csv) write_file(dir / (stem + ".csv"), table.to_csv(), result.files);
        if (cfg.format_text)
            write_file(dir / (stem + ".txt"), table.to_text(), result.files);
    };
    auto counts_of = [](const std::map<std::string, CountPair>& m,
                        const std::vector<std::string>& order) {
        std::vector<LabeledCount> out;
        for (const auto& label : order) {
            auto it = m.find(label);
            out.push_back({label, it == m.end() ? 0 : it->second.count,
                           it == m.end() ? 0 : it->second.bytes});
        }
        // anything not in the canonical order, sorted
        for (const auto& [label, v] : m)
            if (std::find(order.begin(), order.end(), label) == order.end())
                out.push_back({label, v.count, v.bytes});
        return out;
    };
    auto safe_table = [&](const std::string& title,
                          const std::vector<LabeledCount>& counts) {
        try {
            return percent_table(title, counts);
        } catch (const EmptyUniverse&) {
            PercentTable empty;
            empty.title = title;
            return empty;
        }
    };

    emit_table("scope", safe_table("Traffic distribution by scope",
                                   counts_of(agg.scope_counts, {"LAN", "MAN", "WAN"})));
    emit_table("transport",
               safe_table("Transport protocol spread",
                          counts_of(agg.transport_counts,
                                    {"ICMP", "IGMP", "TCP", "UDP"})));
    emit_table("geography",
               safe_table("Geographic distribution of WAN destinations",
                          counts_of(agg.continent_counts, continent_labels())));

    std::map<std::string, CountPair> service_counts;
    for (const auto& f : agg.flows)
        if (f.protocol == 6) service_counts[f.service_category] += {1, f.bytes};
    {
        std::vector<LabeledCount> counts;
        for (const auto& [label, v] : service_counts)
            counts.push_back({label, v.count, v.bytes});
        PercentTable services = safe_table("TCP services by flow", counts);
        if (!services.rows.empty())
            services = fold_other(services, cfg.other_threshold_percent,
                                  {"SSH", "DNS", "Mail", "HTTP", "HTTPS",
                                   "NonIdentified"});
        emit_table("services", services);
    }

    emit_table("packet_spreading",
               safe_table("TCP data packet spreading",
                          {{"InOrder", agg.tcp_in_order, 0},
                           {"PlainRetransmit", agg.tcp_retx_plain, 0},
                           {"FastRetransmit", agg.tcp_retx_fast, 0},
                           {"SpuriousRetransmit", agg.tcp_retx_spurious, 0},
                           {"OutOfOrder", agg.tcp_out_of_order, 0}}));

    // distribution series
    std::vector<double> lengths, durations, rates;
    uint64_t undefined_rate_flows = 0;
    for (const auto& f : agg.flows) {
        lengths.push_back(static_cast<double>(f.packets));
        durations.push_back(f.duration_s);
        if (f.mean_rate_bps)
            rates.push_back(*f.mean_rate_bps);
        else
            undefined_rate_flows++;
    }
    auto emit_series = [&](const std::string& stem, const DistributionSeries& s) {
        write_file(dir / (stem + ".csv"), s.to_csv(), result.files);
    };
    if (!lengths.empty()) {
        auto cdf = build_cdf(lengths);
        cdf.variable = "flow length (packets)";
        emit_series("length_cdf", cdf);
        auto pdf = build_pdf(durations, cfg.bin_width_s);
        pdf.variable = "flow duration (s)";
        emit_series("duration_pdf", pdf);
    } else {
        emit_series("length_cdf", DistributionSeries{});
        emit_series("duration_pdf", DistributionSeries{});
    }
    if (!rates.empty()) {
        auto cdf = build_cdf(rates, !cfg.rate_cdf_linear);
        cdf.variable = "flow mean rate (bits/s)";
        emit_series("rate_cdf", cdf);
    } else {
        emit_series("rate_cdf", DistributionSeries{});
    }

    // flow export
    {
        std::ostringstream out;
        out << "src_addr,src_port,dst_addr,dst_port,protocol,first_ts,duration_s,"
               "packets,packets_fwd,packets_rev,bytes,mean_rate_bps,bidirectional,"
               "scope,continent,service,retx_plain,retx_fast,retx_spurious,"
               "lost_inferred,out_of_order,dup_acks,window_reductions,zero_windows,"
               "ece,cwr,congestion_events,syn_retries,establishment_failure,"
               "handshake_rtt_s\n";
        char buf[64];
        for (const auto& f : agg.flows) {
            out << anonymized_addr(f.src_addr, anon) << ',' << f.src_port << ','
                << anonymized_addr(f.dst_addr, anon) << ',' << f.dst_port << ','
                << static_cast<int>(f.protocol) << ',';
            std::snprintf(buf, sizeof buf, "%.6f", static_cast<double>(f.first_ts_us) / 1e6);
            out << buf << ',';
            std::snprintf(buf, sizeof buf, "%.6f", f.duration_s);
            out << buf << ',' << f.packets << ',' << f.packets_fwd << ','
                << f.packets_rev << ',' << f.bytes << ',';
            if (f.mean_rate_bps) {
                std::snprintf(buf, sizeof buf, "%.6f", *f.mean_rate_bps);
                out << buf;
            }
            out << ',' << (f.bidirectional ? 1 : 0) << ',' << scope_name(f.scope)
                << ',' << f.continent << ',' << f.service_category << ','
                << f.retx_plain << ',' << f.retx_fast << ',' << f.retx_spurious
                << ',' << f.lost_inferred << ',' << f.out_of_order << ','
                << f.dup_acks << ',' << f.window_reductions << ',' << f.zero_windows
                << ',' << f.ece << ',' << f.cwr << ',' << f.congestion_events << ','
                << f.syn_retries << ',' << fail_name(f.establishment_failure) << ',';
            if (f.handshake_rtt_s) {
                std::snprintf(buf, sizeof buf, "%.6f", *f.handshake_rtt_s);
                out << buf;
            }
            out << '\n';
        }
        write_file(dir / "flows.csv", out.str(), result.files);
    }

    // event log
    {
        std::ostringstream out;
        out << "flow,ts,kind,direction,detail\n";
        char buf[64];
        for (size_t i = 0; i < agg.flows.size(); i++) {
            for (const auto& ev : agg.flows[i].events) {
                std::snprintf(buf, sizeof buf, "%.6f", static_cast<double>(ev.ts_us) / 1e6);
                out << i << ',' << buf << ',' << tcp_event_name(ev.kind) << ','
                    << ev.direction << ',' << ev.detail() << '\n';
            }
        }
        write_file(dir / "events.csv", out.str(), result.files);
    }

    // TCP summary
    {
        uint64_t tcp_flows = agg.tcp_flows();
        uint64_t flows_with_wr = 0;
        std::vector<double> hs;
        for (const auto& f : agg.flows) {
            if (f.window_reductions > 0) flows_with_wr++;
            if (f.handshake_rtt_s) hs.push_back(*f.handshake_rtt_s);
        }
        std::sort(hs.begin(), hs.end());
        std::ostringstream out;
        out << "key,value\n";
        char buf[64];
        auto kv = [&](const std::string& k, const std::string& v) {
            out << k << ',' << v << '\n';
        };
        auto kvn = [&](const std::string& k, double v) {
            std::snprintf(buf, sizeof buf, "%.6g", v);
            kv(k, buf);
        };
        kv("tcp_flows", std::to_string(tcp_flows));
        kv("window_reduction_packets", std::to_string(agg.window_reduction_packets));
        // both the packets-per-flow ratio and the true flow fraction
        if (tcp_flows > 0) {
            kvn("window_reduction_packets_per_flow",
                round_percent(static_cast<double>(agg.window_reduction_packets) /
                              static_cast<double>(tcp_flows)));
            kvn("flows_with_window_reduction_fraction",
                static_cast<double>(flows_with_wr) / static_cast<double>(tcp_flows));
        }
        kv("congestion_events", std::to_string(agg.congestion_events));
        kv("lost_segments_inferred", std::to_string(agg.tcp_lost_inferred));
        static const char* kFlagNames[8] = {"fin", "syn", "rst", "psh",
                                            "ack", "urg", "ece", "cwr"};
        for (int i = 0; i < 8; i++)
            kv(std::string("flag_") + kFlagNames[i],
               std::to_string(agg.tcp_flag_counts[i]));
        kv("establishment_no_answer", std::to_string(agg.establishment_no_answer));
        kv("establishment_refused", std::to_string(agg.establishment_refused));
        kv("syn_retries", std::to_string(agg.syn_retries));
        kv("undefined_rate_flows", std::to_string(undefined_rate_flows));
        if (!hs.empty()) {
            kvn("handshake_rtt_min_s", hs.front());
            kvn("handshake_rtt_median_s",
                hs.size() % 2 ? hs[hs.size() / 2]
                              : (hs[hs.size() / 2 - 1] + hs[hs.size() / 2]) / 2.0);
            double sum = 0;
            for (double v : hs) sum += v;
            kvn("handshake_rtt_mean_s", sum / static_cast<double>(hs.size()));
        }
        kv("foreign_both_ends_packets", std::to_string(agg.foreign_both_ends));
        write_file(dir / "tcp_summary.csv", out.str(), result.files);
    }

    // run manifest
    {
        nlohmann::ordered_json manifest;
        manifest["tool"] = "flowscope";
        manifest["version"] = kToolVersion;
        manifest["config_sha256"] = sha256_hex(cfg.canonical());
        nlohmann::ordered_json traces = nlohmann::ordered_json::array();
        for (const auto& input : cfg.inputs) {
            nlohmann::ordered_json t;
            t["path"] = fs::path(input).filename().string();
            t["sha256"] = sha256_file_hex(input);
            traces.push_back(t);
        }
        manifest["traces"] = traces;
        nlohmann::ordered_json ingest;
        ingest["packets_total"] = agg.ingest.packets_total;
        ingest["packets_ipv4"] = agg.ingest.packets_ipv4;
        ingest["packets_ipv6_skipped"] = agg.ingest.packets_ipv6_skipped;
        ingest["packets_non_ip_skipped"] = agg.ingest.packets_non_ip_skipped;
        ingest["packets_truncated"] = agg.ingest.packets_truncated;
        ingest["decode_errors"] = agg.ingest.decode_errors;
        ingest["monotonicity_violations"] = agg.ingest.monotonicity_violations;
        ingest["ipv4_bytes"] = agg.ingest.ipv4_bytes;
        manifest["ingest"] = ingest;
        manifest["flows"] = agg.flows.size();
        write_file(dir / "manifest.json", manifest.dump(2) + "\n", result.files);
    }

    return result;
}

Aggregates load_flow_export(const std::string& flows_csv_path) {
    std::ifstream in(flows_csv_path);
    if (!in) throw ParseError("cannot open", flows_csv_path, 0);
    Aggregates agg;
    std::string line;
    int lineno = 0;
    std::getline(in, line);  // header
    lineno++;
    while (std::getline(in, line)) {
        lineno++;
        if (strip(line).empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, ',')) cols.push_back(col);
        while (cols.size() < 30) cols.push_back("");
        FlowSummary f;
        auto addr = parse_addr(cols[0]);
        auto daddr = parse_addr(cols[2]);
        if (!addr || !daddr)
            throw ParseError("bad address", flows_csv_path, lineno);
        try {
            f.src_addr = *addr;
            f.src_port = static_cast<uint16_t>(std::stoi(cols[1]));
            f.dst_addr = *daddr;
            f.dst_port = static_cast<uint16_t>(std::stoi(cols[3]));
            f.protocol = static_cast<uint8_t>(std::stoi(cols[4]));
            f.first_ts_us = static_cast<int64_t>(std::stod(cols[5]) * 1e6);
            f.duration_s = std::stod(cols[6]);
            f.packets = std::stoull(cols[7]);
            f.packets_fwd = std::stoull(cols[8]);
            f.packets_rev = std::stoull(cols[9]);
            f.bytes = std::stoull(cols[10]);
            if (!cols[11].empty()) f.mean_rate_bps = std::stod(cols[11]);
            f.bidirectional = cols[12] == "1";
            f.scope = cols[13] == "LAN"   ? Scope::Lan
                      : cols[13] == "MAN" ? Scope::Man
                                          : Scope::Wan;
            f.continent = cols[14];
            f.service_category = cols[15];
            f.service = cols[15];
            f.retx_plain = std::stoull(cols[16]);
            f.retx_fast = std::stoull(cols[17]);
            f.retx_spurious = std::stoull(cols[18]);
            f.lost_inferred = std::stoull(cols[19]);
            f.out_of_order = std::stoull(cols[20]);
            f.dup_acks = std::stoull(cols[21]);
            f.window_reductions = std::stoull(cols[22]);
            f.zero_windows = std::stoull(cols[23]);
            f.ece = std::stoull(cols[24]);
            f.cwr = std::stoull(cols[25]);
            f.congestion_events = std::stoull(cols[26]);
            f.syn_retries = std::stoi(cols[27]);
            f.establishment_failure = cols[28] == "refused"     ? FailReason::Refused
                                      : cols[28] == "no_answer" ? FailReason::NoAnswer
                                                                : FailReason::None;
            if (!cols[29].empty()) f.handshake_rtt_s = std::stod(cols[29]);
        } catch (const std::exception&) {
            throw ParseError("bad field", flows_csv_path, lineno);
        }
        // packet-level tables approximated from flow totals
        agg.scope_counts[scope_name(f.scope)] += {f.packets, f.bytes};
        PacketRecord proto_probe;
        proto_probe.protocol = f.protocol;
        agg.transport_counts[classify_transport(proto_probe).label()] +=
            {f.packets, f.bytes};
        if (f.scope == Scope::Wan && !f.continent.empty())
            agg.continent_counts[f.continent] += {f.packets, f.bytes};
        agg.tcp_lost_inferred += f.lost_inferred;
        agg.window_reduction_packets += f.window_reductions;
        agg.congestion_events += f.congestion_events;
        agg.syn_retries += static_cast<uint64_t>(f.syn_retries);
        if (f.establishment_failure == FailReason::NoAnswer)
            agg.establishment_no_answer++;
        if (f.establishment_failure == FailReason::Refused) agg.establishment_refused++;
        agg.flows.push_back(std::move(f));
    }
    return agg;
}

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    std::string out;
    char buf[3];
    for (unsigned int i = 0; i < len; i++) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        out += buf;
    }
    return out;
}

std::string sha256_file_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw WriteFailure("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
}

}  // namespace flowscope
