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

#include <functional>
#include <optional>

#include "proxpnp/denoisers.hpp"
#include "proxpnp/linops.hpp"
#include "proxpnp/prox.hpp"
#include "proxpnp/trace.hpp"

namespace proxpnp {

struct SolverConfig {
  double tau = 0.0;  // outer step
  long max_outer = 1;
  bool warm_start = true;
  double stop_tol = 0.0;  // on ||x_{k+1} - x_k||; 0 runs all max_outer iterations
  long record_every = 1;
};

/// Called with (k, x_k, coef_k) for k = 0 (the initial point) through the
/// last iteration. coef is the solver's own state: the dual u for AD-PnP,
/// the scaled dual u~ for Loris-Verhoeven, the code z for synthesis solvers.
using IterateObserver = std::function<void(long, const Vector&, const Vector&)>;

struct TraceOptions {
  std::optional<Vector> x_ref;
  std::optional<Vector> coef_ref;
  std::optional<Vector> x_true;  // enables the psnr column
  double psnr_peak = 1.0;
  bool record_wall_time = true;
  IterateObserver observer;
};

struct SolverResult {
  Vector x;
  WarmState state;
  SolverTrace trace;
  long iterations = 0;
};

/// FB-PnP with the analysis denoiser:
///   v_k = x_k - tau A^T (A x_k - y)
///   u_{k+1} = AD with lambda_eff = tau * d.lambda, d.layers layers, from u_k
///   x_{k+1} = v_k - Gamma^T u_{k+1}
/// Requires tau < 2/||A||^2. With warm_start off the dual restarts from 0.
SolverResult fb_pnp_analysis(const LinearOperator& a, const Vector& y, const AnalysisDenoiser& d,
                             const SolverConfig& cfg, const Vector& x0, const WarmState& u0,
                             const TraceOptions& opts = {});

/// FB-PnP with the synthesis denoiser: x_{k+1} = D z_{k+1}, where z_{k+1} is
/// the SD output on v_k with soft threshold zeta * tau * d.lambda.
/// Requires tau < 2/||A||^2, and tau * zeta < 2/||A D||^2 when d.layers == 1.
SolverResult fb_pnp_synthesis(const LinearOperator& a, const Vector& y,
                              const SynthesisDenoiser& d, const SolverConfig& cfg,
                              const Vector& x0, const WarmState& z0,
                              const TraceOptions& opts = {});

/// Scaled Loris-Verhoeven primal-dual iterations for
/// min_x 1/2||A x - y||^2 + lambda g(Gamma x):
///   p = x - tau A^T (A x - y)
///   u~ <- prox_{(sigma/tau) (lambda g)^*}(u~ + (sigma/tau) Gamma (p - tau Gamma^T u~))
///   x <- p - tau Gamma^T u~
/// Uses cfg.tau and requires tau < 2/||A||^2 and sigma < 1/||Gamma||^2.
SolverResult loris_verhoeven(const LinearOperator& a, const Vector& y,
                             const LinearOperator& gamma_op, const Regularizer& g, double lambda,
                             double sigma, const SolverConfig& cfg, const Vector& x0,
                             const WarmState& u0, const TraceOptions& opts = {});

/// ISTA on min_z 1/2||A D z - y||^2 + lambda g(z) with step cfg.tau, which
/// must be below 2/||A D||^2. The result's x is D z.
SolverResult fb_synthesis_direct(const LinearOperator& a, const LinearOperator& dict_op,
                                 const Vector& y, const Regularizer& g, double lambda,
                                 const SolverConfig& cfg, const WarmState& z0,
                                 const TraceOptions& opts = {});

/// Optimality residual of the l1 synthesis problem at z. With
/// r = D^T A^T (A D z - y) this is the largest of max(|r_i| - lambda, 0)
/// over z_i = 0 and |r_i + lambda sign(z_i)| over z_i != 0.
double kkt_residual_lasso(const Vector& z, const LinearOperator& a, const LinearOperator& dict_op,
                          const Vector& y, double lambda);

/// 1/2||A x - y||^2 + lambda g(Gamma x)
double objective_analysis(const LinearOperator& a, const Vector& y, const LinearOperator& gamma_op,
                          const Regularizer& g, double lambda, const Vector& x);

/// 1/2||A D z - y||^2 + lambda g(z)
double objective_synthesis(const LinearOperator& a, const LinearOperator& dict_op,
                           const Vector& y, const Regularizer& g, double lambda, const Vector& z);

}  // namespace proxpnp
