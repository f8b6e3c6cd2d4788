#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "drin/gcn.hpp"
#include "drin/kernels.hpp"

namespace {

using namespace drin;

std::vector<float> random_vec(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> d(-1.0f, 1.0f);
    std::vector<float> v(n);
    for (float& x : v) {
        x = d(rng);
    }
    return v;
}

template <bool Parallel>
void BM_MatmulNt(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto d = static_cast<std::size_t>(state.range(1));
    const auto a = random_vec(n * d, 1);
    const auto b = random_vec(d * d, 2);
    std::vector<float> c(n * d);
    for (auto _ : state) {
        if constexpr (Parallel) {
            kernels::matmul_nt<float>(a, b, c, n, d, d, false);
        } else {
            kernels::serial::matmul_nt<float>(a, b, c, n, d, d, false);
        }
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * d * d));
}

template <bool Parallel>
void BM_Propagate(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto d = static_cast<std::size_t>(state.range(1));
    const auto adj = random_vec(n * n, 3);
    const auto x = random_vec(n * d, 4);
    std::vector<float> out(n * d);
    for (auto _ : state) {
        if constexpr (Parallel) {
            kernels::propagate<float>(adj, x, out, n, d);
        } else {
            kernels::serial::propagate<float>(adj, x, out, n, d);
        }
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * d));
}

void BM_GcnStep(benchmark::State& state) {
    const auto r = static_cast<std::size_t>(state.range(0));
    const auto d = static_cast<std::size_t>(state.range(1));
    const std::size_t n = VertexRoles{r}.n();
    std::mt19937_64 rng(5);
    GcnStack<float> stack = GcnStack<float>::init(2, d, d, Activation::tanh, rng);
    const Tensor<float> H(Shape{n, d}, random_vec(n * d, 6));
    const Tensor<float> M = relation_mask<float>(r);
    Tensor<float> A(Shape{n, n});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            A(i, j) = M(i, j) * 0.5f;
        }
    }
    for (auto _ : state) {
        Tape<float> tape;
        const MentionGraph<float> g{tape.leaf(H), tape.constant(A), M, VertexRoles{r}};
        const auto vars = stack.bind(tape);
        const LayerOutput out = stack_forward(tape, g, vars, stack.activation);
        tape.backward(tape.sum(out.H));
    }
}

BENCHMARK(BM_MatmulNt<false>)->Args({18, 256})->Args({34, 768})->Args({256, 768});
BENCHMARK(BM_MatmulNt<true>)->Args({18, 256})->Args({34, 768})->Args({256, 768});
BENCHMARK(BM_Propagate<false>)->Args({34, 768})->Args({130, 768});
BENCHMARK(BM_Propagate<true>)->Args({34, 768})->Args({130, 768});
BENCHMARK(BM_GcnStep)->Args({8, 256})->Args({16, 256})->Args({8, 768})->Args({16, 768});

} // namespace

BENCHMARK_MAIN();
