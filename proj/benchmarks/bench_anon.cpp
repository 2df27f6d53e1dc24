#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "flowscope/anon.hpp"

using namespace flowscope;

static void BM_AnonymizeAddr(benchmark::State& state) {
    Anonymizer anon(AnonKey::from_hex("000102030405060708090a0b0c0d0e0f"));
    std::mt19937 rng(1);
    std::vector<uint32_t> addrs(4096);
    for (auto& a : addrs) a = rng();
    size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(anon.anonymize(addrs[i++ & 4095]));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_AnonymizeAddr);

static void BM_AnonymizeAddrHotPrefix(benchmark::State& state) {
    // addresses from one /16, the common case in a single-site trace
    Anonymizer anon(AnonKey::from_hex("000102030405060708090a0b0c0d0e0f"));
    std::mt19937 rng(2);
    std::vector<uint32_t> addrs(4096);
    for (auto& a : addrs) a = 0x0a000000u | (rng() & 0xffffu);
    size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(anon.anonymize(addrs[i++ & 4095]));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_AnonymizeAddrHotPrefix);
