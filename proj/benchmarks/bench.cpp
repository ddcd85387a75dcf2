// Microbenchmarks for the hot paths: the vectorized E-step, the penalized
// theta sweep, spectral initialization and structure recovery.

#include <benchmark/benchmark.h>

#include "hlcm/estimator.hpp"
#include "hlcm/model.hpp"
#include "hlcm/recovery.hpp"
#include "hlcm/rng.hpp"
#include "hlcm/simulate.hpp"

namespace {

hlcm::ResponseData make_data(int n, int items, std::uint64_t seed) {
  hlcm::SimSpec spec;
  spec.model = hlcm::ModelType::dina;
  spec.hierarchy = hlcm::hierarchy_template(hlcm::HierarchyTemplate::linear, 4);
  spec.n_subjects = n;
  spec.n_items = items;
  spec.theta_low = 0.1;
  spec.theta_high = 0.9;
  spec.seed = seed;
  return hlcm::simulate_dataset(spec).second;
}

void bm_e_step(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const hlcm::ResponseData data = make_data(1000, 30, 1);
  hlcm::PhiloxRng rng(1, 3);
  const hlcm::LcmParams params = hlcm::random_init(data.n_items(), m, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(hlcm::e_step(data, params));
  }
}

void bm_theta_sweep(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const hlcm::ResponseData data = make_data(1000, 30, 2);
  hlcm::PhiloxRng rng(2, 3);
  const hlcm::LcmParams params = hlcm::random_init(data.n_items(), m, rng);
  const hlcm::PosteriorMatrix posterior = hlcm::e_step(data, params);

  hlcm::EmConfig config;
  config.m_upper = m;
  config.lambda2 = 0.5;
  config.tau = 0.1;
  hlcm::AdmmState admm;
  admm.d = hlcm::Matrix::Zero(data.n_items(), hlcm::AdmmState::n_pairs(m));
  admm.mu = hlcm::Matrix::Zero(data.n_items(), hlcm::AdmmState::n_pairs(m));

  for (auto _ : state) {
    hlcm::Matrix theta = params.item_params;
    hlcm::AdmmState working = admm;
    hlcm::update_item_params(data, posterior, theta, working, params.proportions, config);
    benchmark::DoNotOptimize(theta);
  }
}

void bm_spectral_init(benchmark::State& state) {
  const hlcm::ResponseData data = make_data(static_cast<int>(state.range(0)), 30, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(hlcm::spectral_init(data, 16));
  }
}

void bm_recover(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  // A clean (k+1)-class chain: staircase theta over k levels.
  hlcm::LcmParams params;
  const int m = k + 1;
  params.proportions = hlcm::Vector::Constant(m, 1.0 / m);
  params.item_params = hlcm::Matrix(3 * k, m);
  for (int j = 0; j < params.item_params.rows(); ++j)
    for (int c = 0; c < m; ++c)
      params.item_params(j, c) = c > j % k ? 0.9 : 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(hlcm::recover(params, 1e-4, 0.01, 0.0));
  }
}

void bm_fit_small(benchmark::State& state) {
  const hlcm::ResponseData data = make_data(300, 20, 4);
  hlcm::EmConfig config;
  config.m_upper = 8;
  config.lambda1 = 0.02;
  config.lambda2 = 0.5;
  config.tau = 0.1;
  config.max_outer_iters = 50;
  const hlcm::LcmParams init = hlcm::spectral_init(data, config.m_upper);
  for (auto _ : state) {
    benchmark::DoNotOptimize(hlcm::fit(data, config, init));
  }
}

}  // namespace

BENCHMARK(bm_e_step)->Arg(8)->Arg(16)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_theta_sweep)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_spectral_init)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_recover)->Arg(4)->Arg(8)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_fit_small)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
