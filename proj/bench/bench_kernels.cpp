// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include "rcd/embedding.hpp"
#include "rcd/kernels.hpp"
#include "rcd/ranker.hpp"
#include "rcd/rng.hpp"
#include "rcd/synthetic.hpp"

namespace {

rcd::Tensor random_tensor(std::size_t r, std::size_t c, std::uint64_t seed) {
  rcd::Rng rng(seed);
  rcd::Tensor t(r, c);
  for (auto& x : t.values()) x = rng.uniform(-1, 1);
  return t;
}

template <void (*Kernel)(const rcd::Tensor&, const rcd::Tensor&, rcd::Tensor&)>
void BM_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const rcd::Tensor a = random_tensor(n, n, 1), b = random_tensor(n, n, 2);
  rcd::Tensor out;
  for (auto _ : state) {
    Kernel(a, b, out);
    benchmark::DoNotOptimize(out.values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <void (*Kernel)(const rcd::Tensor&, const rcd::Tensor&, rcd::Tensor&)>
void BM_matmul_tn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const rcd::Tensor a = random_tensor(n, n, 3), b = random_tensor(n, n, 4);
  rcd::Tensor out(n, n);
  for (auto _ : state) {
    Kernel(a, b, out);
    benchmark::DoNotOptimize(out.values().data());
  }
}

BENCHMARK(BM_matmul<rcd::kernels::serial::matmul>)->Name("matmul/serial")->RangeMultiplier(2)->Range(64, 512);
BENCHMARK(BM_matmul<rcd::kernels::parallel::matmul>)->Name("matmul/parallel")->RangeMultiplier(2)->Range(64, 512);
BENCHMARK(BM_matmul_tn<rcd::kernels::serial::matmul_tn_acc>)->Name("matmul_tn/serial")->Range(64, 512);
BENCHMARK(BM_matmul_tn<rcd::kernels::parallel::matmul_tn_acc>)->Name("matmul_tn/parallel")->Range(64, 512);

struct RankFixture {
  rcd::TrainedModel model;
  std::vector<rcd::EmbeddedGraph> graphs;

  RankFixture() {
    rcd::GenConfig gen;
    gen.n_commits = 64;
    graphs = rcd::embed_dataset(rcd::generate(gen), rcd::HashingEmbedder(64));
    model = rcd::init_model(rcd::ModelConfig{});
  }
};

const RankFixture& rank_fixture() {
  static const RankFixture f;
  return f;
}

void BM_rank_serial(benchmark::State& state) {
  const auto& f = rank_fixture();
  for (auto _ : state) benchmark::DoNotOptimize(rcd::rank_all_serial(f.model, f.graphs));
}

void BM_rank_parallel(benchmark::State& state) {
  const auto& f = rank_fixture();
  const int jobs = rcd::kernels::max_threads();
  for (auto _ : state) benchmark::DoNotOptimize(rcd::rank_all(f.model, f.graphs, jobs));
}

BENCHMARK(BM_rank_serial)->Name("rank_all/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_rank_parallel)->Name("rank_all/parallel")->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
