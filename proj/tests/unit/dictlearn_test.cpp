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

#include <gtest/gtest.h>

#include <Eigen/QR>
#include <cmath>
#include <set>

#include "proxpnp/dictlearn.hpp"
#include "proxpnp/rng.hpp"

namespace proxpnp {
namespace {

std::vector<TrainingPair> toy_batch(Index n, int count, std::uint64_t seed, double eps = 0.1) {
  Rng rng(seed, Stream::kSignal);
  std::vector<Vector> clean;
  for (int i = 0; i < count; ++i) clean.push_back(rng.uniform_vector(n));
  return make_noisy_pairs(clean, eps, seed);
}

double default_step(const DictParams& d) {
  const double n = d.op().spectral_norm();
  return 1.8 / (n * n);
}

// Plain re-implementation of the unrolled forward pass on dense matrices.
double straight_line_loss(const Matrix& m, DenoiserMode mode, const std::vector<TrainingPair>& batch,
                          double lambda, int layers, double step) {
  double total = 0.0;
  for (const TrainingPair& p : batch) {
    Vector out;
    if (mode == DenoiserMode::kAnalysis) {
      Vector u = Vector::Zero(m.rows());
      for (int l = 0; l < layers; ++l) {
        Vector w = u - step * m * (m.transpose() * u - p.noisy);
        for (Index i = 0; i < w.size(); ++i) w[i] = std::max(-lambda, std::min(lambda, w[i]));
        u = w;
      }
      out = p.noisy - m.transpose() * u;
    } else {
      Vector z = Vector::Zero(m.cols());
      for (int l = 0; l < layers; ++l) {
        Vector w = z - step * m.transpose() * (m * z - p.noisy);
        for (Index i = 0; i < w.size(); ++i)
          w[i] = std::copysign(std::max(std::abs(w[i]) - step * lambda, 0.0), w[i]);
        z = w;
      }
      out = m * z;
    }
    total += 0.5 * (out - p.clean).squaredNorm();
  }
  return total / static_cast<double>(batch.size());
}

// Central differences on `coords` random parameters with a frozen inner step.
void check_gradient(const DictParams& dict, const std::vector<TrainingPair>& batch, LossConfig cfg,
                    std::uint64_t seed) {
  cfg.fixed_step = default_step(dict);
  const LossGrad lg = denoise_loss_grad(dict, batch, cfg);
  const Vector g = lg.grad.flat();
  const Vector theta = dict.flat();
  Rng rng(seed, Stream::kSampling);
  const double h = 1e-6;
  for (int c = 0; c < 10; ++c) {
    const Index i = static_cast<Index>(rng.below(static_cast<std::uint64_t>(theta.size())));
    DictParams plus = dict, minus = dict;
    Vector tp = theta, tm = theta;
    tp[i] += h;
    tm[i] -= h;
    plus.set_flat(tp);
    minus.set_flat(tm);
    const double fd = (denoise_loss(plus, batch, cfg) - denoise_loss(minus, batch, cfg)) / (2 * h);
    const double denom = std::max({std::abs(fd), std::abs(g[i]), 1e-8});
    EXPECT_LE(std::abs(fd - g[i]) / denom, 1e-4) << "param " << i << " fd " << fd << " bp " << g[i];
  }
}

class GradientCheck : public ::testing::TestWithParam<std::tuple<DenoiserMode, int, bool>> {};

TEST_P(GradientCheck, BackpropMatchesFiniteDifferences) {
  const auto [mode, layers, filters] = GetParam();
  LossConfig cfg;
  cfg.layers = layers;
  if (filters) {
    const DictParams d = DictParams::random_filters(mode, 3, 3, 6, 6, 21, 0.3);
    cfg.lambda = mode == DenoiserMode::kAnalysis ? 0.05 : 0.5;
    check_gradient(d, toy_batch(36, 4, 22), cfg, 23);
  } else {
    const DictParams d = DictParams::random_dense(mode, 8, 12, 24);
    cfg.lambda = mode == DenoiserMode::kAnalysis ? 0.05 : 0.5;
    check_gradient(d, toy_batch(8, 5, 25), cfg, 26);
  }
}

INSTANTIATE_TEST_SUITE_P(
    ModesAndDepths, GradientCheck,
    ::testing::Combine(::testing::Values(DenoiserMode::kAnalysis, DenoiserMode::kSynthesis),
                       ::testing::Values(1, 3), ::testing::Bool()));

TEST(DenoiseLoss, MatchesStraightLineForward) {
  for (DenoiserMode mode : {DenoiserMode::kAnalysis, DenoiserMode::kSynthesis}) {
    const DictParams d = DictParams::random_dense(mode, 64, 96, 31);
    const auto batch = toy_batch(64, 6, 32);
    LossConfig cfg;
    cfg.lambda = 0.2;
    cfg.layers = 4;
    const double ref = straight_line_loss(d.dense, mode, batch, cfg.lambda, cfg.layers, default_step(d));
    EXPECT_NEAR(denoise_loss(d, batch, cfg), ref, 1e-12 * ref);
  }
}

TEST(DenoiseLoss, OrthogonalIdentityLimit) {
  Eigen::HouseholderQR<Matrix> qr(Rng(33).normal_matrix(6, 6));
  const Matrix q = qr.householderQ();
  std::vector<TrainingPair> batch;
  for (const auto& p : toy_batch(6, 4, 34)) batch.push_back({p.clean, p.clean});
  LossConfig cfg;
  cfg.layers = 1;
  cfg.fixed_step = 1.0;
  for (double lambda : {1e-3, 1e-6}) {
    cfg.lambda = lambda;
    // one SD layer with zeta = 1 on an orthogonal D is a soft threshold of the input
    const double loss = denoise_loss(DictParams::from_dense(DenoiserMode::kSynthesis, q), batch, cfg);
    EXPECT_LE(loss, 0.5 * 6 * lambda * lambda * (1 + 1e-9));
  }
}

TEST(DenoiseLoss, HugeLambdaKillsSynthesisCodes) {
  const DictParams d = DictParams::random_dense(DenoiserMode::kSynthesis, 8, 12, 35);
  const auto batch = toy_batch(8, 5, 36);
  LossConfig cfg;
  cfg.lambda = 1e6;
  cfg.layers = 3;
  double expected = 0.0;
  for (const auto& p : batch) expected += 0.5 * p.clean.squaredNorm();
  EXPECT_DOUBLE_EQ(denoise_loss(d, batch, cfg), expected / 5);
}

TEST(DenoiseLossGrad, SmoothQuadraticClosedForm) {
  // lambda = 0, one layer, square D: x = D (zeta D^T v) = zeta D D^T v.
  const Index n = 5;
  const Matrix d = Rng(37).normal_matrix(n, n);
  const auto batch = toy_batch(n, 3, 38);
  LossConfig cfg;
  cfg.lambda = 0.0;
  cfg.layers = 1;
  cfg.fixed_step = 0.05;
  const double z = *cfg.fixed_step;
  Matrix expected = Matrix::Zero(n, n);
  for (const auto& p : batch) {
    const Vector r = z * d * d.transpose() * p.noisy - p.clean;
    // d/dD of 1/2 ||z D D^T v - c||^2 = z (r v^T D + v r^T D)
    expected += z * (r * p.noisy.transpose() * d + p.noisy * r.transpose() * d);
  }
  expected /= 3.0;
  const LossGrad lg =
      denoise_loss_grad(DictParams::from_dense(DenoiserMode::kSynthesis, d), batch, cfg);
  EXPECT_LE((lg.grad.dense - expected).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(DenoiseLossGrad, ZeroBatchGivesZeroGradient) {
  for (DenoiserMode mode : {DenoiserMode::kAnalysis, DenoiserMode::kSynthesis}) {
    const DictParams d = DictParams::random_dense(mode, 4, 6, 39);
    LossConfig cfg;
    cfg.lambda = 0.3;
    cfg.layers = 3;
    const LossGrad lg = denoise_loss_grad(d, {{Vector::Zero(4), Vector::Zero(4)}}, cfg);
    EXPECT_EQ(lg.loss, 0.0);
    EXPECT_EQ(lg.grad.flat(), Vector::Zero(d.num_params()));
  }
}

TEST(DenoiseForward, MasksMatchActivityPattern) {
  const DictParams d = DictParams::random_dense(DenoiserMode::kSynthesis, 8, 12, 40);
  LossConfig cfg;
  cfg.lambda = 0.5;
  cfg.layers = 3;
  const auto batch = toy_batch(8, 1, 41);
  const ForwardTape tape = denoise_forward(d, d.op(), default_step(d), batch[0].noisy, cfg);
  ASSERT_EQ(tape.masks.size(), 3u);
  for (std::size_t l = 0; l < 3; ++l)
    for (Index i = 0; i < 12; ++i)
      EXPECT_EQ(tape.masks[l][static_cast<std::size_t>(i)], tape.states[l + 1][i] != 0.0);
}

TEST(TrainDictionary, ZeroLearningRateLeavesDictionaryUnchanged) {
  const DictParams d = DictParams::random_dense(DenoiserMode::kAnalysis, 8, 12, 42);
  TrainConfig cfg;
  cfg.loss.lambda = 0.1;
  cfg.epochs = 1;
  cfg.learning_rate = 0.0;
  const TrainResult r = train_dictionary(d, toy_batch(8, 10, 43), cfg);
  EXPECT_EQ(r.dict.dense, d.dense);
  EXPECT_EQ(r.loss_history.size(), 2u);
}

TEST(TrainDictionary, ToyRunDecreasesLoss) {
  for (DenoiserMode mode : {DenoiserMode::kAnalysis, DenoiserMode::kSynthesis}) {
    const DictParams d = DictParams::random_filters(mode, 4, 3, 8, 8, 44, 0.3);
    TrainConfig cfg;
    cfg.loss.lambda = mode == DenoiserMode::kAnalysis ? 0.02 : 0.05;
    cfg.loss.layers = 3;
    cfg.epochs = 200;
    cfg.batch = 4;
    cfg.learning_rate = 0.02;
    cfg.seed = 45;
    const auto data = toy_batch(64, 16, 46, 0.05);
    const TrainResult r = train_dictionary(d, data, cfg);
    EXPECT_LT(r.loss_history.back(), r.loss_history.front());
    // held-out patches benefit too
    const auto held = toy_batch(64, 16, 47, 0.05);
    EXPECT_LT(denoise_loss(r.dict, held, cfg.loss), denoise_loss(d, held, cfg.loss));
  }
}

TEST(TrainDictionary, DeterministicForSeed) {
  const DictParams d = DictParams::random_dense(DenoiserMode::kSynthesis, 8, 12, 48);
  TrainConfig cfg;
  cfg.loss.lambda = 0.1;
  cfg.loss.layers = 2;
  cfg.epochs = 5;
  cfg.batch = 3;
  cfg.learning_rate = 0.01;
  cfg.seed = 7;
  const auto data = toy_batch(8, 10, 49);
  const TrainResult a = train_dictionary(d, data, cfg);
  const TrainResult b = train_dictionary(d, data, cfg);
  EXPECT_EQ(a.loss_history, b.loss_history);
  EXPECT_EQ(a.dict.dense, b.dict.dense);
}

TEST(TrainDictionary, DivergenceIsReported) {
  const DictParams d = DictParams::random_dense(DenoiserMode::kSynthesis, 8, 12, 50);
  TrainConfig cfg;
  cfg.loss.lambda = 0.1;
  cfg.loss.fixed_step = 0.1;
  cfg.epochs = 50;
  cfg.learning_rate = 1e6;
  EXPECT_THROW(train_dictionary(d, toy_batch(8, 10, 51), cfg), NumericalError);
}

TEST(DictParams, FlatRoundTrip) {
  DictParams d = DictParams::random_filters(DenoiserMode::kAnalysis, 2, 3, 5, 5, 52);
  EXPECT_EQ(d.num_params(), 18);
  const Vector theta = Rng(53).normal_vector(18);
  d.set_flat(theta);
  EXPECT_EQ(d.flat(), theta);
  EXPECT_EQ(d.filters[0](0, 1), theta[1]);
  EXPECT_EQ(d.filters[1](0, 0), theta[9]);
  EXPECT_THROW(d.set_flat(Vector::Zero(17)), DimensionError);
}

TEST(MakeNoisyPairs, NoiseStatistics) {
  const std::vector<Vector> clean(10, Vector::Zero(2000));
  const auto pairs = make_noisy_pairs(clean, 0.05, 54);
  double sum = 0.0, sum2 = 0.0;
  for (const auto& p : pairs) {
    sum += p.noisy.sum();
    sum2 += p.noisy.squaredNorm();
  }
  const double count = 20000;
  const double mean = sum / count;
  EXPECT_NEAR(std::sqrt(sum2 / count - mean * mean), 0.05, 0.05 * 0.05);
  EXPECT_NEAR(mean, 0.0, 0.002);
}

TEST(SamplePatches, ShapesAndDeterminism) {
  const Matrix img = Rng(55).normal_matrix(10, 12);
  const auto a = sample_patches({img}, 4, 30, 56);
  const auto b = sample_patches({img}, 4, 30, 56);
  ASSERT_EQ(a.size(), 30u);
  std::set<double> firsts;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].size(), 16);
    EXPECT_EQ(a[i], b[i]);
    firsts.insert(a[i][0]);
  }
  EXPECT_GT(firsts.size(), 5u);
  EXPECT_THROW(sample_patches({img}, 11, 1, 0), DimensionError);
}

}  // namespace
}  // namespace proxpnp
