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

#include <optional>
#include <string>

#include "proxpnp/linops.hpp"
#include "proxpnp/prox.hpp"

namespace proxpnp {

/// Inner step factor used when no step is given: step = 1.8 / ||op||^2.
inline constexpr double kDefaultStepFactor = 1.8;

/// Inner iterate carried across outer iterations: the dual vector u for the
/// analysis denoiser, the code z for the synthesis denoiser.
struct WarmState {
  Vector vec;

  static WarmState zeros(Index n) { return WarmState{Vector::Zero(n)}; }
};

/// Unrolled dual forward-backward denoiser for min_x 1/2||x - v||^2 + lambda g(Gamma x).
///
/// Each layer is u <- prox_{sigma (lambda g)^*}(u - sigma Gamma (Gamma^T u - v)),
/// and the output after `layers` steps is x = v - Gamma^T u.
struct AnalysisDenoiser {
  LinearOperator gamma_op;  // R^N -> R^S
  Regularizer g;
  double lambda = 0.0;
  double sigma = 0.0;
  int layers = 1;

  /// sigma = 1.8 / ||Gamma||^2
  static AnalysisDenoiser with_default_step(LinearOperator gamma_op, Regularizer g, double lambda,
                                            int layers);

  Index signal_dim() const { return gamma_op.in_dim(); }
  Index coef_dim() const { return gamma_op.out_dim(); }
  AnalysisDenoiser with_lambda(double new_lambda) const;
  AnalysisDenoiser with_layers(int new_layers) const;
  /// Set when sigma >= 2 / ||Gamma||^2, where the dual iterations may diverge.
  std::optional<std::string> step_warning() const;
};

/// Unrolled forward-backward denoiser for min_z 1/2||D z - v||^2 + lambda g(z).
///
/// Each layer is z <- prox_{zeta lambda g}(z - zeta D^T (D z - v)), and the
/// output after `layers` steps is x = D z.
struct SynthesisDenoiser {
  LinearOperator dict_op;  // R^S -> R^N
  Regularizer g;
  double lambda = 0.0;
  double zeta = 0.0;
  int layers = 1;

  /// zeta = 1.8 / ||D||^2
  static SynthesisDenoiser with_default_step(LinearOperator dict_op, Regularizer g, double lambda,
                                             int layers);

  Index signal_dim() const { return dict_op.out_dim(); }
  Index coef_dim() const { return dict_op.in_dim(); }
  SynthesisDenoiser with_lambda(double new_lambda) const;
  SynthesisDenoiser with_layers(int new_layers) const;
  std::optional<std::string> step_warning() const;
};

struct DenoiseResult {
  Vector x;
  WarmState state;
};

struct SynthesisProxResult {
  Vector x;
  Vector z;
  long iterations = 0;
};

Vector ad_layer(const AnalysisDenoiser& d, const Vector& u, const Vector& v);

/// `layers` applications of ad_layer from `state`. Once a layer leaves the
/// state bitwise unchanged the remaining layers are skipped, which does not
/// change the result.
DenoiseResult ad_apply(const AnalysisDenoiser& d, const WarmState& state, const Vector& v);

Vector sd_layer(const SynthesisDenoiser& d, const Vector& z, const Vector& v);
DenoiseResult sd_apply(const SynthesisDenoiser& d, const WarmState& state, const Vector& v);

/// Runs dual forward-backward from zero until ||u_{l+1} - u_l|| <= tol and
/// returns v - Gamma^T u. Throws NumericalError after `max_iter` steps.
Vector ad_prox_oracle(const AnalysisDenoiser& d, const Vector& v, double tol,
                      long max_iter = 1'000'000);

/// Forward-backward on the code objective until ||z_{l+1} - z_l|| <= tol.
SynthesisProxResult sd_prox_oracle(const SynthesisDenoiser& d, const Vector& v, double tol,
                                   long max_iter = 1'000'000);

/// 1/2 ||Gamma^T u - v||^2 + (lambda g)^*(u); the conjugate term is only
/// available for l1, where it is the indicator of the lambda ball (checked
/// with a relative slack of `feasibility_slack`).
double analysis_dual_objective(const AnalysisDenoiser& d, const Vector& u, const Vector& v,
                               double feasibility_slack = 0.0);

/// 1/2 ||D z - v||^2 + lambda g(z)
double synthesis_code_objective(const SynthesisDenoiser& d, const Vector& z, const Vector& v);

}  // namespace proxpnp
