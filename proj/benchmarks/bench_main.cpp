/*
 * Copyright 2026 The proxpnp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <benchmark/benchmark.h>

#include "proxpnp/denoisers.hpp"
#include "proxpnp/dictlearn.hpp"
#include "proxpnp/experiments.hpp"
#include "proxpnp/rng.hpp"
#include "proxpnp/solvers.hpp"

namespace proxpnp {
namespace {

double sq(double v) { return v * v; }

void BM_AdApply(benchmark::State& state) {
  const int layers = static_cast<int>(state.range(0));
  const CsInstance cs = gen_cs_instance(50, 20, 100, 0);
  const AnalysisDenoiser d =
      AnalysisDenoiser::with_default_step(cs.gamma_op, Regularizer::l1(), 0.1, layers);
  const Vector v = Rng(0, Stream::kSignal).uniform_vector(50);
  for (auto _ : state) benchmark::DoNotOptimize(ad_apply(d, WarmState::zeros(100), v));
  state.SetItemsProcessed(state.iterations() * layers);
}
BENCHMARK(BM_AdApply)->Arg(1)->Arg(20)->Arg(100);

void BM_SdApply(benchmark::State& state) {
  const int layers = static_cast<int>(state.range(0));
  const CsInstance cs = gen_cs_instance(50, 20, 100, 0);
  const SynthesisDenoiser d =
      SynthesisDenoiser::with_default_step(cs.dict_op, Regularizer::l1(), 0.1, layers);
  const Vector v = Rng(0, Stream::kSignal).uniform_vector(50);
  for (auto _ : state) benchmark::DoNotOptimize(sd_apply(d, WarmState::zeros(100), v));
  state.SetItemsProcessed(state.iterations() * layers);
}
BENCHMARK(BM_SdApply)->Arg(1)->Arg(20)->Arg(100);

void BM_FbPnpAnalysisCs(benchmark::State& state) {
  const CsInstance cs = gen_cs_instance(50, 20, 100, 0);
  const AnalysisDenoiser d = AnalysisDenoiser::with_default_step(
      cs.gamma_op, Regularizer::l1(), 0.005, static_cast<int>(state.range(0)));
  SolverConfig cfg{1.8 / sq(cs.problem.a.spectral_norm()), 100};
  cfg.record_every = 100;
  TraceOptions opts;
  opts.record_wall_time = false;
  for (auto _ : state)
    benchmark::DoNotOptimize(fb_pnp_analysis(cs.problem.a, cs.problem.y, d, cfg, Vector::Zero(50),
                                             WarmState::zeros(100), opts));
}
BENCHMARK(BM_FbPnpAnalysisCs)->Arg(1)->Arg(20)->Unit(benchmark::kMicrosecond);

void BM_LorisVerhoevenCs(benchmark::State& state) {
  const CsInstance cs = gen_cs_instance(50, 20, 100, 0);
  SolverConfig cfg{1.8 / sq(cs.problem.a.spectral_norm()), 100};
  cfg.record_every = 100;
  const double sigma = 0.9 / sq(cs.gamma_op.spectral_norm());
  TraceOptions opts;
  opts.record_wall_time = false;
  for (auto _ : state)
    benchmark::DoNotOptimize(loris_verhoeven(cs.problem.a, cs.problem.y, cs.gamma_op,
                                             Regularizer::l1(), 0.005, sigma, cfg,
                                             Vector::Zero(50), WarmState::zeros(100), opts));
}
BENCHMARK(BM_LorisVerhoevenCs)->Unit(benchmark::kMicrosecond);

void BM_Conv2d(benchmark::State& state) {
  const Index n = state.range(0);
  const LinearOperator op = LinearOperator::conv2d_circular(Rng(1).normal_matrix(9, 9), n, n);
  const Vector x = Rng(2).normal_vector(n * n);
  Vector out;
  for (auto _ : state) {
    op.apply_to(x, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_Conv2d)->Arg(64)->Arg(128);

void BM_FilterBank(benchmark::State& state) {
  const Index n = 64;
  std::vector<Matrix> filters;
  for (int f = 0; f < state.range(0); ++f) filters.push_back(Rng(f).normal_matrix(5, 5));
  const LinearOperator op =
      LinearOperator::filter_bank(filters, n, n, FilterBankDirection::kAnalysis);
  const Vector x = Rng(99).normal_vector(n * n);
  Vector out, back;
  for (auto _ : state) {
    op.apply_to(x, out);
    op.apply_adjoint_to(out, back);
    benchmark::DoNotOptimize(back.data());
  }
}
BENCHMARK(BM_FilterBank)->Arg(2)->Arg(8)->Arg(32);

void BM_DenoiseLossGrad(benchmark::State& state) {
  const DictParams d = DictParams::random_filters(DenoiserMode::kAnalysis, 8, 5, 16, 16, 1, 0.3);
  Rng rng(2, Stream::kSignal);
  std::vector<Vector> clean;
  for (int i = 0; i < 16; ++i) clean.push_back(rng.uniform_vector(256));
  const auto batch = make_noisy_pairs(clean, 0.1, 3);
  LossConfig cfg;
  cfg.lambda = 0.05;
  cfg.layers = static_cast<int>(state.range(0));
  cfg.fixed_step = 1.8 / sq(d.op().spectral_norm());
  for (auto _ : state) benchmark::DoNotOptimize(denoise_loss_grad(d, batch, cfg));
}
BENCHMARK(BM_DenoiseLossGrad)->Arg(1)->Arg(5)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace proxpnp

BENCHMARK_MAIN();
