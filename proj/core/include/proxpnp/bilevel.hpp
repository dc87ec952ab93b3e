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
#include <functional>
#include <optional>
#include <vector>

#include "proxpnp/linops.hpp"
#include "proxpnp/prox.hpp"

namespace proxpnp {

/// Data term f~ with a beta-Lipschitz gradient.
struct SmoothFunction {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> grad;
  double beta = 0.0;

  /// 1/2 ||A x - y||^2 with beta = ||A||^2.
  static SmoothFunction least_squares(const LinearOperator& a, const Vector& y);
  /// 1/2 ||x - c||^2 with beta = 1.
  static SmoothFunction quadratic(const Vector& center);
};

/// Approximates prox_{gamma g}(x) with `layers` steps of some iterative
/// scheme started from u. Must be deterministic.
using ProxApproximator = std::function<Vector(const Vector& x, const Vector& u, int layers)>;

/// Returns prox(g, gamma, x) whatever the start and layer count.
ProxApproximator exact_prox_approximator(const Regularizer& g, double gamma);

/// Forward-backward on min_u gamma g(u) + 1/2 ||u - x||^2 with step eta in
/// (0, 2): u <- prox(g, eta gamma, u - eta (u - x)). Each step contracts the
/// distance to the prox by |1 - eta|.
ProxApproximator fb_prox_approximator(const Regularizer& g, double gamma, double eta);

struct BilevelConfig {
  double mu = 1.0;
  double lambda = 1.0;
  double tau = 0.0;
  int inner_L = 1;
  std::optional<double> alpha_L;
  long max_outer = 1;
};

struct BilevelRecord {
  long k = 0;
  double h = 0.0;                    // f~(x_k) + Moreau envelope at x_k
  double grad_h_norm = 0.0;          // ||grad f~(x_k) + mu (x_k - p(x_k))||
  double inner_gap = 0.0;            // ||u_k - p(x_k)||
  std::optional<double> lyapunov;    // h + phi ||u_k - p(x_k)||^2 when phi is known
};

struct BilevelResult {
  Vector x;
  Vector u;
  std::vector<BilevelRecord> trace;
  std::optional<double> phi;
};

/// Positive root of 8 a^2 (1 - 2 a^2) phi^2 + 2 (beta + mu)(1 - 2 a^2) phi - mu^2,
/// computed in the cancellation-free form 2 mu^2 / (b + sqrt(b^2 + 4 a mu^2)).
double bilevel_phi(double alpha_L, double beta_tilde, double mu);

/// Step bound 2 phi (1 - 2 alpha^2) / mu^2 for the inexact scheme. Tends to
/// 1 / (beta + mu) as alpha -> 0. Throws ConfigError unless 0 < alpha < 1/sqrt(2).
double bilevel_step_bound(double alpha_L, double beta_tilde, double mu);

/// Exact smoothed gradient descent
///   x_{k+1} = x_k - tau (grad f~(x_k) + mu (x_k - u_k)),  u_{k+1} = prox(g, lambda/mu, x_{k+1})
/// with u_0 = prox(g, lambda/mu, x_0). Requires tau < 2 / (beta + mu).
BilevelResult gd_moreau(const SmoothFunction& f, const Regularizer& g, double lambda, double mu,
                        double tau, long max_outer, const Vector& x0);

/// Inexact scheme: as gd_moreau, but u_{k+1} = inner(x_{k+1}, u_k, inner_L).
/// With alpha_L given, tau may not exceed bilevel_step_bound and the trace
/// carries the Lyapunov value for phi = bilevel_phi; without it tau must be
/// below min(2 / mu^2, 1 / (beta + mu)).
BilevelResult bilevel_inexact(const SmoothFunction& f, const Regularizer& g,
                              const BilevelConfig& cfg, const ProxApproximator& inner,
                              const Vector& x0, const Vector& u0);

/// Largest observed ||inner(x, u, layers) - p(x)|| / ||u - p(x)|| over seeded
/// Gaussian pairs (x, u) in R^n scaled by `scale`, with p(x) = prox(g, lambda/mu, x).
/// Pairs with ||u - p(x)|| < 1e-12 are skipped; throws NumericalError if all are.
double estimate_alpha(const ProxApproximator& inner, int layers, const Regularizer& g,
                      double lambda, double mu, Index n, int samples, std::uint64_t seed,
                      double scale = 1.0);

}  // namespace proxpnp
