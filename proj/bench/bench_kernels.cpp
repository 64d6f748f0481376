// Serial reference against OpenMP for each kernel, plus one full tree solve.
// The benchmark argument selects the path: 0 = serial, 1 = parallel.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "rbsde/solver.hpp"

using namespace rbsde;

namespace {

Exec exec_of(const benchmark::State& s) { return s.range(0) == 0 ? Exec::Serial : Exec::Parallel; }

std::vector<double> gaussian(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

void BM_tree_average(benchmark::State& s) {
  const int d = 2, width = 6;
  const std::vector<double> q{0.8, 0.2};
  const std::size_t parents = 1 << 16, branching = (1u << d) * q.size();
  const auto next = gaussian(parents * branching * width, 1);
  std::vector<double> out(parents * width);
  kernels::TreeAverageArgs a{d, q, parents, next, width, out};
  for (auto _ : s) {
    kernels::tree_average(exec_of(s), a);
    benchmark::DoNotOptimize(out.data());
  }
  s.SetItemsProcessed(s.iterations() * parents);
}

void BM_design_matrix(benchmark::State& s) {
  const std::size_t rows = 1 << 16;
  const int d = 2, k = 1;
  const auto w = gaussian(rows * d, 2);
  std::vector<std::int32_t> counts(rows * k);
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] = static_cast<std::int32_t>(i % 3);
  kernels::DesignArgs a{rows, d, k, w, counts, 2};
  Mat out;
  for (auto _ : s) {
    kernels::design_matrix(exec_of(s), a, out);
    benchmark::DoNotOptimize(out.data());
  }
  s.SetItemsProcessed(s.iterations() * rows);
}

void BM_sample_step(benchmark::State& s) {
  const std::size_t paths = 1 << 16;
  const int d = 2;
  const std::vector<double> lh{0.05, 0.1};
  const auto prev_w = gaussian(paths * d, 3);
  const std::vector<std::int32_t> prev_counts(paths * 2, 0);
  std::vector<double> w(paths * d), dw(paths * d), dnu(paths * 2);
  std::vector<std::int32_t> counts(paths * 2);
  kernels::SampleStepArgs a;
  a.brownian_dim = d;
  a.lambda_h = lh;
  a.step = 0.125;
  a.seed = 7;
  a.step_index = 1;
  a.paths = paths;
  a.prev_w = prev_w;
  a.prev_counts = prev_counts;
  a.w = w, a.dw = dw, a.dnu = dnu, a.counts = counts;
  for (auto _ : s) {
    kernels::sample_step(exec_of(s), a);
    benchmark::DoNotOptimize(w.data());
  }
  s.SetItemsProcessed(s.iterations() * paths);
}

void BM_backward_step(benchmark::State& s) {
  const std::size_t nodes = 1 << 15;
  const int m = 2, d = 2, k = 0;
  const auto moments = gaussian(nodes * m * (1 + d + k), 4);
  const std::vector<ConvexBody> body{ConvexBody::ball(Vec::Zero(m), 0.5)};
  const DriverFn f = [](double, const Vec& y, const Mat&, const Mat&) -> Vec { return 0.5 * y; };
  std::vector<double> y(nodes * m), z(nodes * m * d), v, dk(nodes * m), target(nodes * m), drift(nodes * m);
  kernels::BackwardStepArgs a;
  a.nodes = nodes, a.m = m, a.d = d, a.k_marks = k;
  a.t = 0.5, a.step = 0.125, a.penalty_weight = 8.0;
  a.moments = moments;
  a.bodies = body;
  a.driver = &f;
  a.y = y, a.z = z, a.v = v, a.dk = dk, a.target = target, a.drift = drift;
  for (auto _ : s) {
    kernels::backward_step(exec_of(s), a);
    benchmark::DoNotOptimize(y.data());
  }
  s.SetItemsProcessed(s.iterations() * nodes);
}

// Clipped terminal in a box, f = 2y, on a 2^12-leaf tree.
void BM_solve_penalized(benchmark::State& s) {
  NoiseModel nm;
  nm.steps = 12;
  const auto scen = build_tree(nm);
  const DomainPath dom(motion::Static{ConvexBody::box(Vec::Constant(1, -0.5), Vec::Constant(1, 0.5))}, 1.0,
                       [](double, const NoiseHistory&) { return Vec::Zero(1); });
  BsdeProblem p;
  p.terminal = [](const NoiseHistory& h) { return Vec(h.brownian_at(h.time()).cwiseMax(-0.5).cwiseMin(0.5)); };
  p.driver = [](double, const Vec& y, const Mat&, const Mat&) { return Vec(2.0 * y); };
  p.lipschitz = 2.0;
  for (auto _ : s) benchmark::DoNotOptimize(solve_penalized(p, dom, scen, 16, {exec_of(s)}));
  s.SetItemsProcessed(s.iterations() * scen.total_nodes());
}

}  // namespace

BENCHMARK(BM_tree_average)->Arg(0)->Arg(1);
BENCHMARK(BM_design_matrix)->Arg(0)->Arg(1);
BENCHMARK(BM_sample_step)->Arg(0)->Arg(1);
BENCHMARK(BM_backward_step)->Arg(0)->Arg(1);
BENCHMARK(BM_solve_penalized)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
