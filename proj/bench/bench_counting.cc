#include <benchmark/benchmark.h>

#include "maskcheck/counting.h"
#include "maskcheck/frontend.h"

using namespace maskcheck;

namespace {

const char* kProgram = R"(
#private k;
#random r, s;
a = k ^ r;
b = a - s;
c = (b ^ r) @ s;
)";

CountingProblem make(int width, std::vector<std::string> names) {
  static std::map<int, std::shared_ptr<Program>> progs;
  auto& p = progs[width];
  if (!p) p = std::make_shared<Program>(elaborate(parse(kProgram), width));
  return CountingProblem(*p->ctx, p->computations(p->find_all(names)));
}

// {b} is secret independent, so every key is enumerated.
void BM_Serial(benchmark::State& state) {
  CountingProblem p = make(static_cast<int>(state.range(0)), {"b"});
  for (auto _ : state) benchmark::DoNotOptimize(bf_decide(p).outcome);
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * p.domain() * p.random_space()));
}

void BM_Parallel(benchmark::State& state) {
  CountingProblem p = make(static_cast<int>(state.range(0)), {"b"});
  int workers = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(parallel_decide(p, workers).outcome);
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * p.domain() * p.random_space()));
}

void BM_SerialPair(benchmark::State& state) {
  CountingProblem p = make(static_cast<int>(state.range(0)), {"a", "c"});
  for (auto _ : state) benchmark::DoNotOptimize(bf_decide(p).outcome);
}

void BM_ParallelPair(benchmark::State& state) {
  CountingProblem p = make(static_cast<int>(state.range(0)), {"a", "c"});
  int workers = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(parallel_decide(p, workers).outcome);
}

}  // namespace

BENCHMARK(BM_Serial)->Arg(4)->Arg(6)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Parallel)->ArgsProduct({{4, 6, 8}, {1, 2, 4, 8}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SerialPair)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ParallelPair)->ArgsProduct({{4, 8}, {1, 4}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
