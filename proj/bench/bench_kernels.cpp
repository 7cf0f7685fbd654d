// Serial reference vs OpenMP kernel, pairwise.

#include "funmidas/distribution.hpp"
#include "funmidas/forecast.hpp"
#include "funmidas/montecarlo.hpp"
#include "funmidas/random.hpp"

#include <benchmark/benchmark.h>

using namespace funmidas;

namespace {

std::vector<double> samples(int n) {
  Rng rng(1);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = std::clamp(5.0 + 1.5 * rnd::normal(rng), 0.0, 10.0);
  return v;
}

const dist::SupportGrid kGrid(0.0, 10.0, 1001);

void BM_KdeSerial(benchmark::State& st) {
  const auto s = samples(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(dist::kde_estimate_serial(s, kGrid));
}

void BM_KdeParallel(benchmark::State& st) {
  const auto s = samples(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(dist::kde_estimate(s, kGrid));
}

std::vector<dist::DensityOnGrid> density_panel(int n) {
  std::vector<dist::DensityOnGrid> d;
  for (int t = 0; t < n; ++t) {
    const auto s = samples(500 + t);
    d.push_back(dist::kde_estimate_serial(s, kGrid));
  }
  return d;
}

void BM_LqdSerial(benchmark::State& st) {
  const auto d = density_panel(static_cast<int>(st.range(0)));
  const dist::TauGrid tau;
  for (auto _ : st) benchmark::DoNotOptimize(dist::lqd_transform_all_serial(d, tau));
}

void BM_LqdParallel(benchmark::State& st) {
  const auto d = density_panel(static_cast<int>(st.range(0)));
  const dist::TauGrid tau;
  for (auto _ : st) benchmark::DoNotOptimize(dist::lqd_transform_all(d, tau));
}

struct NowcastInput {
  fpca::FPCABasis basis;
  Matrix draws;
};

NowcastInput nowcast_input(int n_draws) {
  mc::DGPConfig cfg;
  NowcastInput in{mc::make_basis_skewt(cfg), Matrix(n_draws, cfg.K)};
  Rng rng(2);
  for (Eigen::Index i = 0; i < in.draws.size(); ++i) in.draws.data()[i] = 0.3 * rnd::normal(rng);
  return in;
}

void BM_NowcastSerial(benchmark::State& st) {
  const auto in = nowcast_input(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(forecast::density_nowcast_serial(in.draws, in.basis, kGrid));
}

void BM_NowcastParallel(benchmark::State& st) {
  const auto in = nowcast_input(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(forecast::density_nowcast(in.draws, in.basis, kGrid));
}

mc::DGPConfig small_study(int reps) {
  mc::DGPConfig c;
  c.T = 30;
  c.n_x = 4;
  c.p_x = 8;
  c.beta = {Vector(4), Vector(4), Vector(4)};
  c.beta[0] << 0.6, 0.0, -0.4, 0.0;
  c.beta[1] << 0.0, 0.5, 0.0, 0.0;
  c.beta[2] << 0.0, 0.0, 0.3, -0.5;
  c.micro_n = 500;
  c.reps = reps;
  return c;
}

mc::StudyOptions study_options() {
  mc::StudyOptions o;
  o.settings.lag.p_x = 8;
  o.settings.n_draws = 100;
  o.settings.prior.gibbs.n_draws = 600;
  o.settings.prior.gibbs.n_burn = 200;
  return o;
}

void BM_StudySerial(benchmark::State& st) {
  const auto c = small_study(static_cast<int>(st.range(0)));
  const auto o = study_options();
  for (auto _ : st) benchmark::DoNotOptimize(mc::run_mc_study_serial(c, o));
}

void BM_StudyParallel(benchmark::State& st) {
  const auto c = small_study(static_cast<int>(st.range(0)));
  const auto o = study_options();
  for (auto _ : st) benchmark::DoNotOptimize(mc::run_mc_study(c, o));
}

}  // namespace

BENCHMARK(BM_KdeSerial)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KdeParallel)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LqdSerial)->Arg(30)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LqdParallel)->Arg(30)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NowcastSerial)->Arg(500)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NowcastParallel)->Arg(500)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StudySerial)->Arg(4)->Unit(benchmark::kMillisecond)->Iterations(1);
BENCHMARK(BM_StudyParallel)->Arg(4)->Unit(benchmark::kMillisecond)->Iterations(1);

BENCHMARK_MAIN();
