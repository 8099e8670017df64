// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include "lee/datagen/grammar.hpp"
#include "lee/expr/evaluate.hpp"
#include "lee/tensor/kernels.hpp"
#include "lee/util/rng.hpp"

namespace {

using lee::tensor::Index;
using lee::tensor::Matrix;
namespace kernels = lee::tensor::kernels;

Matrix random_matrix(Index r, Index c, std::uint64_t seed) {
  lee::Rng rng(seed);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
  const Index n = state.range(0);
  const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  Matrix c(n, n);
  for (auto _ : state) {
    if constexpr (Parallel) kernels::gemm(a, b, c);
    else kernels::gemm_serial(a, b, c);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}

kernels::AttentionLayout packed_layout(Index segments, Index len) {
  kernels::AttentionLayout l;
  for (Index s = 0; s <= segments; ++s) {
    l.q_offsets.push_back(s * len);
    l.k_offsets.push_back(s * len);
  }
  return l;
}

template <bool Parallel>
void BM_Attention(benchmark::State& state) {
  const Index segments = state.range(0), len = 48, d = 64;
  const auto layout = packed_layout(segments, len);
  const Matrix q = random_matrix(segments * len, d, 3), k = random_matrix(segments * len, d, 4),
               v = random_matrix(segments * len, d, 5);
  Matrix out;
  for (auto _ : state) {
    if constexpr (Parallel) kernels::attention_forward(q, k, v, 4, layout, out, nullptr);
    else kernels::attention_forward_serial(q, k, v, 4, layout, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_Evaluate(benchmark::State& state) {
  const std::size_t rows = static_cast<std::size_t>(state.range(0));
  lee::Rng rng(6);
  lee::datagen::GrammarConfig cfg;
  cfg.k_max = 3;
  const auto e = lee::datagen::sample_expression(rng, cfg, 3);
  std::vector<double> x(rows * 3);
  for (double& v : x) v = rng.uniform(-10, 10);
  const lee::expr::Program prog(e);
  const lee::expr::MatrixView view{x, rows, 3};
  std::vector<double> out(rows);
  for (auto _ : state) {
    if constexpr (Parallel) prog.run(view, prog.constants(), out);
    else prog.run_serial(view, prog.constants(), out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
}

}  // namespace

BENCHMARK(BM_Gemm<false>)->Name("gemm/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_Gemm<true>)->Name("gemm/omp")->Arg(64)->Arg(256);
BENCHMARK(BM_Attention<false>)->Name("attention/serial")->Arg(8)->Arg(32);
BENCHMARK(BM_Attention<true>)->Name("attention/omp")->Arg(8)->Arg(32);
BENCHMARK(BM_Evaluate<false>)->Name("evaluate/serial")->Arg(2000)->Arg(100000);
BENCHMARK(BM_Evaluate<true>)->Name("evaluate/omp")->Arg(2000)->Arg(100000);

BENCHMARK_MAIN();
