#include <benchmark/benchmark.h>

#include "ctes/hawkes.hpp"
#include "ctes/imtpp.hpp"
#include "ctes/synthetic.hpp"

namespace {

ctes::Sequence bench_sequence(int len) {
    ctes::Dataset ds = ctes::gen_alternating(1, len, 7);
    return ds.sequences[0];
}

void bm_encode(benchmark::State& state) {
    auto seq = bench_sequence(static_cast<int>(state.range(0)));
    ctes::ModelConfig mc;
    mc.n_marks = 2;
    ctes::MtppModel m = ctes::MtppModel::make(mc, 1);
    for (auto _ : state) {
        ctes::Tape T;
        auto states = m.enc.encode(T, m.params, seq);
        benchmark::DoNotOptimize(states);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_encode)->Arg(64)->Arg(256);

void bm_sequence_nll_grad(benchmark::State& state) {
    auto seq = bench_sequence(static_cast<int>(state.range(0)));
    ctes::ModelConfig mc;
    mc.n_marks = 2;
    ctes::MtppModel m = ctes::MtppModel::make(mc, 1);
    for (auto _ : state) {
        ctes::Tape T;
        ctes::Var loss = m.sequence_nll_t(T, seq);
        T.backward(loss);
        T.accumulate_grads();
        m.params.zero_grads();
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_sequence_nll_grad)->Arg(64)->Arg(256);

void bm_elbo(benchmark::State& state) {
    auto seq = bench_sequence(static_cast<int>(state.range(0)));
    ctes::ModelConfig mc;
    mc.n_marks = 2;
    ctes::ImtppModel m = ctes::ImtppModel::make(mc, {0.0, 1.0}, 1);
    std::uint64_t s = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(m.elbo(seq, s++));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_elbo)->Arg(64)->Arg(128);

void bm_hawkes_simulate(benchmark::State& state) {
    ctes::HawkesParams p;
    p.mu = {0.3, 0.3};
    p.A = {{0.3, 0.2}, {0.2, 0.3}};
    p.beta = 1.0;
    std::uint64_t s = 0;
    for (auto _ : state) {
        auto seq = ctes::simulate_hawkes(p, static_cast<double>(state.range(0)), s++);
        benchmark::DoNotOptimize(seq);
    }
}
BENCHMARK(bm_hawkes_simulate)->Arg(100)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
