// Microbenchmarks for the hot paths: forward pass, clustering, and a full
// training step (forward + backward + Adam).

#include <benchmark/benchmark.h>

#include "reschunk/training.hpp"

using namespace reschunk;

namespace {

ModelConfig bench_config(int J, int F) {
  ModelConfig cfg;
  cfg.J = J;
  cfg.D = 3;
  cfg.T = 24;
  cfg.p = 24;
  cfg.n_chunks = 6;
  cfg.F = F;
  cfg.edge_hidden = F;
  return cfg;
}

Matrix random_input(const ModelConfig& cfg, Rng& rng) {
  Matrix x0(cfg.T, cfg.K());
  for (Eigen::Index i = 0; i < x0.size(); ++i) x0.data()[i] = normal01(rng);
  return x0;
}

void bm_forward(benchmark::State& state) {
  const ModelConfig cfg = bench_config(static_cast<int>(state.range(0)),
                                       static_cast<int>(state.range(1)));
  Rng rng = make_rng(1);
  ModelParams params = make_model(cfg, rng);
  Matrix x0 = random_input(cfg, rng);
  ForwardCache cache;
  for (auto _ : state) {
    ForwardResult res = forward(x0, params, rng, SampleMode::train, cache);
    benchmark::DoNotOptimize(res.y0_hat.data());
  }
}

void bm_predict(benchmark::State& state) {
  const ModelConfig cfg = bench_config(static_cast<int>(state.range(0)),
                                       static_cast<int>(state.range(1)));
  Rng rng = make_rng(1);
  ModelParams params = make_model(cfg, rng);
  Matrix x0 = random_input(cfg, rng);
  for (auto _ : state) {
    auto [y, part] = predict(x0, params);
    benchmark::DoNotOptimize(y.data());
  }
}

void bm_group_joints(benchmark::State& state) {
  const int J = static_cast<int>(state.range(0));
  Rng rng = make_rng(2);
  Matrix C(J, J);
  for (int i = 0; i < J; ++i) {
    C(i, i) = 1.0;
    for (int j = i + 1; j < J; ++j) C(i, j) = C(j, i) = uniform01(rng);
  }
  for (auto _ : state) {
    JointPartition part = group_joints(C, 0.5);
    benchmark::DoNotOptimize(part.group_count);
  }
}

void bm_train_step(benchmark::State& state) {
  const ModelConfig cfg = bench_config(static_cast<int>(state.range(0)),
                                       static_cast<int>(state.range(1)));
  Rng rng = make_rng(3);
  ModelParams params = make_model(cfg, rng);
  Matrix x0 = random_input(cfg, rng);
  Matrix y0 = random_input(cfg, rng);
  AdamState adam = make_adam_state(params);
  OptimizerConfig opt;
  ForwardCache cache;
  for (auto _ : state) {
    ForwardResult res = forward(x0, params, rng, SampleMode::train, cache);
    Matrix y1 = coarsen(y0, res.partition, cfg.D);
    LossBreakdown loss = total_loss(res, y0, y1, cfg);
    benchmark::DoNotOptimize(loss.total);
    ModelGrads grads = zero_grads(params);
    Matrix d_y0 = recon_loss_grad(res.y0_hat, y0, cfg.sigma0);
    Matrix d_y1 = recon_loss_grad(res.y1_hat, y1, cfg.sigma1);
    Matrix d_logits = cfg.kl_weight * kl_loss_grad(res.posterior);
    backward(params, cache, d_y0, d_y1, d_logits, grads);
    adam_step(params, grads, adam, opt);
  }
}

}  // namespace

BENCHMARK(bm_forward)->Args({8, 32})->Args({22, 64})->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_predict)->Args({8, 32})->Args({22, 64})->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_group_joints)->Arg(8)->Arg(22)->Arg(64);
BENCHMARK(bm_train_step)->Args({8, 32})->Args({22, 64})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
