#include <cmath>
#include <vector>

#include <benchmark/benchmark.h>

#include "umsa/experiment.hpp"
#include "umsa/lattice.hpp"
#include "umsa/models.hpp"
#include "umsa/score.hpp"
#include "umsa/smc.hpp"

namespace {

using namespace umsa;

// OU desk data: T = 10 unit-spaced observations.
struct OuDesk {
  ExperimentConfig config = preset("ou_desk");
  OuModel model{config.sigma, config.obs_sd, config.x0};
  ObservationRecord obs = load_observations(config, model);
  ParameterVector theta = model.make_parameters({0.5});
};

void BM_EulerPropagate(benchmark::State& state) {
  const OuModel model(0.4, 1.0, 100.0);
  const int level = static_cast<int>(state.range(0));
  const double theta = 0.5;
  const double x = 100.0;
  const std::size_t steps = 1024;
  RngStream rng(1, 0);
  std::vector<double> out(steps);
  std::vector<double> scratch;
  for (auto _ : state) {
    propagate(model, {&theta, 1}, level, {&x, 1}, steps, rng, out, scratch);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * steps);
}
BENCHMARK(BM_EulerPropagate)->Arg(4)->Arg(8);

void BM_KangarooPropagate(benchmark::State& state) {
  const KangarooModel model;
  const std::vector<double> theta{2.397, 4.429e-3, 0.84, 17.631};
  const double x = std::log(400.0) / 0.84;
  const std::size_t steps = 1024;
  RngStream rng(2, 0);
  std::vector<double> out(steps);
  std::vector<double> scratch;
  for (auto _ : state) {
    propagate(model, theta, 6, {&x, 1}, steps, rng, out, scratch);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * steps);
}
BENCHMARK(BM_KangarooPropagate);

void BM_MaximalCoupling(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  RngStream rng(3, 0);
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = rng.uniform();
    b[i] = rng.uniform();
  }
  const Pmf r1(a);
  const Pmf r2(b);
  for (auto _ : state) {
    const MaximalCoupling coupling(r1, r2);
    for (std::size_t k = 0; k < n; ++k) benchmark::DoNotOptimize(coupling.sample(rng));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_MaximalCoupling)->Arg(50)->Arg(500);

void BM_CpfSweep(benchmark::State& state) {
  const OuDesk desk;
  const int level = static_cast<int>(state.range(0));
  RngStream rng(4, 0);
  ConditionalParticleFilter filter(desk.model, desk.obs, level, 50);
  LatticePath path = initial_path(desk.model, desk.theta, level, filter.grid().steps(), rng);
  for (auto _ : state) path = filter.sweep(desk.theta.values(), path, rng);
}
BENCHMARK(BM_CpfSweep)->Arg(3)->Arg(6);

void BM_CcpfSweep(benchmark::State& state) {
  const OuDesk desk;
  const int level = static_cast<int>(state.range(0));
  RngStream rng(5, 0);
  CoupledConditionalParticleFilter filter(desk.model, desk.obs, level, 50);
  CoupledPathPair pair = initial_path_coupled(desk.model, desk.theta, level,
                                              filter.fine_grid().steps(),
                                              filter.coarse_grid().steps(), rng);
  for (auto _ : state) pair = filter.sweep(desk.theta.values(), desk.theta.values(), pair, rng);
}
BENCHMARK(BM_CcpfSweep)->Arg(4)->Arg(6);

void BM_Score(benchmark::State& state) {
  const OuDesk desk;
  RngStream rng(6, 0);
  const ObservationGrid grid = align_observations(desk.obs, 6);
  const LatticePath path = initial_path(desk.model, desk.theta, 6, grid.steps(), rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(score_h_l(desk.model, desk.theta.values(), path, grid, desk.obs));
  }
}
BENCHMARK(BM_Score);

}  // namespace

BENCHMARK_MAIN();
