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

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "proxpnp/linops.hpp"
#include "proxpnp/prox.hpp"

namespace proxpnp {

enum class DenoiserMode { kAnalysis, kSynthesis };

/// Trainable dictionary: a dense matrix or a bank of convolution filters.
///
/// In analysis mode the operator is Gamma (signal -> coefficients); in
/// synthesis mode it is D (coefficients -> signal). A filter bank uses the
/// matching FilterBankDirection.
struct DictParams {
  DenoiserMode mode = DenoiserMode::kAnalysis;
  Matrix dense;                  // used when filters is empty
  std::vector<Matrix> filters;   // F kernels of equal size
  Index rows = 0;                // image shape for filter banks
  Index cols = 0;

  static DictParams from_dense(DenoiserMode mode, Matrix m);
  static DictParams from_filters(DenoiserMode mode, std::vector<Matrix> filters, Index rows,
                                 Index cols);
  /// i.i.d. N(0, scale^2) entries from the dictionary stream of `seed`.
  static DictParams random_dense(DenoiserMode mode, Index signal_dim, Index coef_dim,
                                 std::uint64_t seed, double scale = 1.0);
  static DictParams random_filters(DenoiserMode mode, int count, Index kernel_size, Index rows,
                                   Index cols, std::uint64_t seed, double scale = 1.0);

  bool is_filter_bank() const { return !filters.empty(); }
  LinearOperator op() const;
  Index signal_dim() const;
  Index coef_dim() const;

  Index num_params() const;
  Vector flat() const;
  void set_flat(const Vector& p);
  /// A DictParams of the same shape filled with zeros.
  DictParams zeros_like() const;

  /// Adds scale * d<g_out, op(a_in)>/d(params) to this (used as a gradient
  /// accumulator of the same shape as the dictionary it describes).
  void accumulate(const Vector& g_out, const Vector& a_in, double scale);
};

struct TrainingPair {
  Vector clean;
  Vector noisy;
};

struct LossConfig {
  double lambda = 0.0;
  int layers = 1;
  /// Inner step (sigma or zeta). When absent it is 1.8 / ||op||^2 for the
  /// current dictionary, treated as a constant during differentiation.
  std::optional<double> fixed_step;
  /// Prox inputs within this distance of a threshold get zero derivative.
  double kink_tol = 1e-9;
};

/// Forward pass of one sample from the cold start 0, keeping what backprop needs.
struct ForwardTape {
  double step = 0.0;
  std::vector<Vector> states;                 // u_0..u_L or z_0..z_L
  std::vector<std::vector<bool>> masks;       // per layer: derivative of the prox is 1
  Vector output;
};

ForwardTape denoise_forward(const DictParams& dict, const LinearOperator& op, double step,
                            const Vector& noisy, const LossConfig& cfg);

/// Mean over pairs of 1/2 ||G_L(0; noisy) - clean||^2 (l1 regularizer).
double denoise_loss(const DictParams& dict, const std::vector<TrainingPair>& batch,
                    const LossConfig& cfg);

struct LossGrad {
  double loss = 0.0;
  DictParams grad;
};

/// Loss and its gradient with respect to the dictionary, by reverse-mode
/// differentiation through the unrolled layers.
LossGrad denoise_loss_grad(const DictParams& dict, const std::vector<TrainingPair>& batch,
                           const LossConfig& cfg);

struct TrainConfig {
  LossConfig loss;
  int epochs = 1;
  double learning_rate = 0.0;
  int batch = 16;
  std::uint64_t seed = 0;
};

struct TrainResult {
  DictParams dict;
  std::vector<double> loss_history;  // full-data loss before training and after each epoch
};

/// Plain minibatch gradient descent with a fixed learning rate; minibatch
/// order is a seeded shuffle per epoch. Throws NumericalError on a
/// non-finite loss.
TrainResult train_dictionary(DictParams init, const std::vector<TrainingPair>& data,
                             const TrainConfig& cfg);

/// Pairs (clean, clean + epsilon w) with w drawn from the noise stream of `seed`.
std::vector<TrainingPair> make_noisy_pairs(const std::vector<Vector>& clean, double epsilon,
                                           std::uint64_t seed);

/// `count` patches of size patch x patch cut at seeded positions from
/// row-major images of the given shapes.
std::vector<Vector> sample_patches(const std::vector<Matrix>& images, Index patch, int count,
                                   std::uint64_t seed);

}  // namespace proxpnp
