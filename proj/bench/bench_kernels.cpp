// Serial reference kernels against their OpenMP versions, and a training
// batch gradient on one thread against several.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "arcnet/kernels.hpp"
#include "arcnet/train.hpp"

using namespace arcnet;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

template <bool Parallel>
void BM_matvec(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto w = random_vec(n * n, 1), x = random_vec(n, 2);
  std::vector<double> y(n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::omp::matvec<double>(w, n, n, x, y);
    } else {
      kernels::serial::matvec<double>(w, n, n, x, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n));
}

template <bool Parallel>
void BM_matvec_t(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto w = random_vec(n * n, 1), x = random_vec(n, 2);
  std::vector<double> y(n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::omp::matvec_t<double>(w, n, n, x, y);
    } else {
      kernels::serial::matvec_t<double>(w, n, n, x, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n));
}

template <bool Parallel>
void BM_add_outer(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto g = random_vec(n * n, 1), a = random_vec(n, 2), b = random_vec(n, 3);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::omp::add_outer<double>(g, n, n, a, b);
    } else {
      kernels::serial::add_outer<double>(g, n, n, a, b);
    }
    benchmark::DoNotOptimize(g.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n));
}

void BM_batch_gradient(benchmark::State& state) {
  const auto threads = static_cast<std::size_t>(state.range(0));
  SyntheticConfig sc;
  sc.n_conversations = 16;
  sc.dims = {32, 16, 16};
  Corpus c = synth_generate(sc);
  auto view = LabelView::for_corpus(c);
  ModelConfig mc;
  mc.feature_dims = c.dims;
  mc.party_dim = 32;
  mc.context_dim = 32;
  mc.emotion_dim = 24;
  mc.n_classes = 2;
  auto model = ModelParams<double>::random(mc, 1);
  ShiftNetConfig shc;
  shc.feature_dim = 32;
  shc.hidden_dim = 32;
  auto shift = ShiftNetParams<double>::random(shc, 1);
  ParamSet<double> set;
  model.collect(set);
  shift.collect(set);
  std::vector<std::size_t> batch(c.conversations.size());
  for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = i;
  for (auto _ : state) {
    set.zero_grad();
    benchmark::DoNotOptimize(batch_gradient(set, model, &shift, c, batch, view, 1.0, true, ForwardOptions{}, threads));
  }
}

}  // namespace

BENCHMARK(BM_matvec<false>)->Name("matvec/serial")->Arg(128)->Arg(512)->Arg(1024);
BENCHMARK(BM_matvec<true>)->Name("matvec/omp")->Arg(128)->Arg(512)->Arg(1024);
BENCHMARK(BM_matvec_t<false>)->Name("matvec_t/serial")->Arg(128)->Arg(512)->Arg(1024);
BENCHMARK(BM_matvec_t<true>)->Name("matvec_t/omp")->Arg(128)->Arg(512)->Arg(1024);
BENCHMARK(BM_add_outer<false>)->Name("add_outer/serial")->Arg(128)->Arg(512)->Arg(1024);
BENCHMARK(BM_add_outer<true>)->Name("add_outer/omp")->Arg(128)->Arg(512)->Arg(1024);
BENCHMARK(BM_batch_gradient)->Name("batch_gradient/threads")->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
