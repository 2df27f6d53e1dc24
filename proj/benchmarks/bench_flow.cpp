#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "flowscope/flow.hpp"
#include "trace_builder.hpp"

using namespace flowscope;
using namespace testutil;

namespace {

std::vector<PacketRecord> synthetic_packets(size_t n, int hosts) {
    std::mt19937 rng(7);
    std::vector<PacketRecord> pkts;
    pkts.reserve(n);
    int64_t ts = 0;
    for (size_t i = 0; i < n; i++) {
        ts += static_cast<int64_t>(rng() % 2000);
        uint32_t a = ip(10, 0, 0, static_cast<int>(rng() % hosts));
        uint32_t b = ip(2, 0, 0, static_cast<int>(rng() % hosts));
        uint16_t sport = static_cast<uint16_t>(20000 + rng() % 64);
        auto p = tcp_pkt(ts, a, sport, b, 443, tcpflag::kAck,
                         static_cast<uint32_t>(i * 100), 0,
                         static_cast<uint16_t>(rng() % 1200));
        if (rng() % 2) {
            std::swap(p.src_addr, p.dst_addr);
            std::swap(p.src_port, p.dst_port);
        }
        pkts.push_back(p);
    }
    return pkts;
}

}  // namespace

static void BM_FlowTableUpdate(benchmark::State& state) {
    auto pkts = synthetic_packets(1 << 14, static_cast<int>(state.range(0)));
    for (auto _ : state) {
        FlowTable table;
        for (const auto& p : pkts) benchmark::DoNotOptimize(table.update(p));
        benchmark::DoNotOptimize(table.flush());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(pkts.size()));
}
BENCHMARK(BM_FlowTableUpdate)->Arg(4)->Arg(16)->Arg(64);
