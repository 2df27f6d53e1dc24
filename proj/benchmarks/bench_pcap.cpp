#include <benchmark/benchmark.h>

#include <filesystem>
#include <random>

#include "flowscope/pcap.hpp"
#include "trace_builder.hpp"

using namespace flowscope;
using namespace testutil;

namespace {

std::string bench_trace() {
    static std::string path = [] {
        auto p = (std::filesystem::temp_directory_path() / "bench.pcap").string();
        std::mt19937 rng(11);
        TraceBuilder tb;
        int64_t ts = 0;
        for (int i = 0; i < 20000; i++) {
            ts += static_cast<int64_t>(rng() % 1000);
            TcpSpec s{ip(10, 0, 0, static_cast<int>(rng() % 8)),
                      ip(2, 0, 0, static_cast<int>(rng() % 8)),
                      static_cast<uint16_t>(20000 + rng() % 64), 443,
                      static_cast<uint32_t>(rng()), 0, tcpflag::kAck};
            s.payload.assign(rng() % 1200, 'b');
            tb.add(ts, tcp_frame(s));
        }
        tb.write(p);
        return p;
    }();
    return path;
}

}  // namespace

static void BM_PcapDecode(benchmark::State& state) {
    auto path = bench_trace();
    uint64_t pkts = 0;
    for (auto _ : state) {
        PcapReader reader(path);
        while (auto pkt = reader.next()) {
            benchmark::DoNotOptimize(pkt->ip_total_length);
            pkts++;
        }
    }
    state.SetItemsProcessed(static_cast<int64_t>(pkts));
}
BENCHMARK(BM_PcapDecode);

BENCHMARK_MAIN();
