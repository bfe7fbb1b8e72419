#include <benchmark/benchmark.h>

#include <socpalm/socpalm.hpp>

#include <random>

using namespace socpalm;

namespace {

Vec random_vec(Index n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

void BM_Project(benchmark::State& state) {
  const Index blocks = state.range(0), dim = state.range(1);
  ConeSpec k;
  k.add_second_order(dim, blocks);
  const Vec x = random_vec(k.total_dim(), 1);
  Vec out;
  for (auto _ : state) {
    project_into(k, x, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * k.total_dim());
}
BENCHMARK(BM_Project)->Args({1000, 3})->Args({1000, 401})->Args({10, 10000});

void BM_NewtonSolveMeb(benchmark::State& state) {
  const MebProblem g = gen_meb(state.range(0), state.range(1));
  const ProblemData& p = g.problem;
  const Vec y = random_vec(p.n(), 2);
  const JacobianElement j = jacobian_element(p.cone(), y);
  const NewtonSystem sys = NewtonSystem::assemble_linear(p.A(), j, 1.0, 1e-4);
  const Vec rhs = random_vec(p.m(), 3);
  for (auto _ : state) {
    SpdSolution s = solve_spd(sys, rhs, 1e-10);
    benchmark::DoNotOptimize(s.d.data());
  }
}
BENCHMARK(BM_NewtonSolveMeb)->Args({1000, 400})->Args({8000, 100})->Unit(benchmark::kMillisecond);

void BM_SolveMeb(benchmark::State& state) {
  const MebProblem g = gen_meb(state.range(0), state.range(1));
  for (auto _ : state) {
    SolveResult r = solve(g.problem);
    benchmark::DoNotOptimize(r.kkt.d1);
  }
}
BENCHMARK(BM_SolveMeb)->Args({200, 50})->Args({1000, 100})->Unit(benchmark::kMillisecond);

void BM_SolveTrs(benchmark::State& state) {
  const TrsData d = generate_trs(state.range(0), 1);
  const TrsProblem t = build_trs(d.H, d.c);
  for (auto _ : state) {
    SolveResult r = solve(t.problem);
    benchmark::DoNotOptimize(r.kkt.d1);
  }
}
BENCHMARK(BM_SolveTrs)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
