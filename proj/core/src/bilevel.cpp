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

#include "proxpnp/bilevel.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "proxpnp/rng.hpp"

namespace proxpnp {

namespace {

void check_smoothing(const char* who, double lambda, double mu, double tau) {
  auto fail = [who](const char* what) { throw ConfigError(std::string(who) + ": " + what); };
  if (!(mu > 0.0)) fail("mu must be positive");
  if (!(lambda > 0.0)) fail("lambda must be positive");
  if (!(tau > 0.0) || !std::isfinite(tau)) fail("tau must be finite and positive");
}

BilevelRecord make_record(const SmoothFunction& f, const Regularizer& g, double lambda, double mu,
                          long k, const Vector& x, const Vector& u, std::optional<double> phi) {
  const Vector p = prox(g, lambda / mu, x);
  BilevelRecord rec;
  rec.k = k;
  const double fx = f.value ? f.value(x) : std::numeric_limits<double>::quiet_NaN();
  rec.h = fx + lambda * g.value(p) + 0.5 * mu * (x - p).squaredNorm();
  rec.grad_h_norm = (f.grad(x) + mu * (x - p)).norm();
  rec.inner_gap = (u - p).norm();
  if (phi) rec.lyapunov = rec.h + *phi * rec.inner_gap * rec.inner_gap;
  return rec;
}

BilevelResult run(const SmoothFunction& f, const Regularizer& g, double lambda, double mu,
                  double tau, long max_outer, const Vector& x0, const Vector& u0,
                  const std::function<Vector(const Vector&, const Vector&)>& update_u,
                  std::optional<double> phi) {
  if (!f.grad) throw ConfigError("smooth term needs a gradient");
  check_length("bilevel u0", x0.size(), u0.size());
  BilevelResult out{x0, u0, {}, phi};
  out.trace.reserve(static_cast<std::size_t>(max_outer) + 1);
  out.trace.push_back(make_record(f, g, lambda, mu, 0, out.x, out.u, phi));
  for (long k = 1; k <= max_outer; ++k) {
    Vector grad = f.grad(out.x) + mu * (out.x - out.u);
    out.x -= tau * grad;
    out.u = update_u(out.x, out.u);
    if (!out.x.allFinite()) throw NumericalError("bilevel iterates became non-finite");
    out.trace.push_back(make_record(f, g, lambda, mu, k, out.x, out.u, phi));
  }
  return out;
}

}  // namespace

SmoothFunction SmoothFunction::least_squares(const LinearOperator& a, const Vector& y) {
  check_length("least_squares measurements", a.out_dim(), y.size());
  const double n = a.spectral_norm();
  return SmoothFunction{[a, y](const Vector& x) { return 0.5 * (a.apply(x) - y).squaredNorm(); },
                        [a, y](const Vector& x) { return a.apply_adjoint(a.apply(x) - y); },
                        n * n};
}

SmoothFunction SmoothFunction::quadratic(const Vector& center) {
  return SmoothFunction{[center](const Vector& x) { return 0.5 * (x - center).squaredNorm(); },
                        [center](const Vector& x) -> Vector { return x - center; }, 1.0};
}

ProxApproximator exact_prox_approximator(const Regularizer& g, double gamma) {
  if (!(gamma > 0.0)) throw ConfigError("exact_prox_approximator: gamma must be positive");
  return [g, gamma](const Vector& x, const Vector&, int) { return prox(g, gamma, x); };
}

ProxApproximator fb_prox_approximator(const Regularizer& g, double gamma, double eta) {
  if (!(gamma > 0.0)) throw ConfigError("fb_prox_approximator: gamma must be positive");
  if (!(eta > 0.0 && eta < 2.0)) throw ConfigError("fb_prox_approximator: eta must be in (0, 2)");
  return [g, gamma, eta](const Vector& x, const Vector& u0, int layers) {
    Vector u = u0;
    for (int l = 0; l < layers; ++l) u = prox(g, eta * gamma, u - eta * (u - x));
    return u;
  };
}

double bilevel_phi(double alpha_L, double beta_tilde, double mu) {
  if (!(alpha_L > 0.0 && alpha_L < 1.0 / std::sqrt(2.0)))
    throw ConfigError("alpha_L must lie in (0, 1/sqrt(2))");
  if (!(mu > 0.0)) throw ConfigError("mu must be positive");
  if (!(beta_tilde >= 0.0)) throw ConfigError("beta_tilde must be non-negative");
  const double a2 = alpha_L * alpha_L;
  const double shrink = 1.0 - 2.0 * a2;
  const double qa = 8.0 * a2 * shrink;
  const double qb = 2.0 * (beta_tilde + mu) * shrink;
  const double mu2 = mu * mu;
  return 2.0 * mu2 / (qb + std::sqrt(qb * qb + 4.0 * qa * mu2));
}

double bilevel_step_bound(double alpha_L, double beta_tilde, double mu) {
  const double phi = bilevel_phi(alpha_L, beta_tilde, mu);
  return 2.0 * phi * (1.0 - 2.0 * alpha_L * alpha_L) / (mu * mu);
}

BilevelResult gd_moreau(const SmoothFunction& f, const Regularizer& g, double lambda, double mu,
                        double tau, long max_outer, const Vector& x0) {
  check_smoothing("gd_moreau", lambda, mu, tau);
  if (!(tau < 2.0 / (f.beta + mu))) {
    std::ostringstream msg;
    msg << "gd_moreau: tau = " << tau << " must be below 2/(beta + mu) = " << 2.0 / (f.beta + mu);
    throw ConfigError(msg.str());
  }
  const double gamma = lambda / mu;
  return run(f, g, lambda, mu, tau, max_outer, x0, prox(g, gamma, x0),
             [&](const Vector& x, const Vector&) { return prox(g, gamma, x); }, std::nullopt);
}

BilevelResult bilevel_inexact(const SmoothFunction& f, const Regularizer& g,
                              const BilevelConfig& cfg, const ProxApproximator& inner,
                              const Vector& x0, const Vector& u0) {
  check_smoothing("bilevel_inexact", cfg.lambda, cfg.mu, cfg.tau);
  if (cfg.inner_L < 0) throw ConfigError("bilevel_inexact: inner_L must be non-negative");
  if (!inner) throw ConfigError("bilevel_inexact: missing inner approximator");
  std::optional<double> phi;
  double bound = 0.0;
  bool inclusive = false;
  if (cfg.alpha_L) {
    phi = bilevel_phi(*cfg.alpha_L, f.beta, cfg.mu);
    bound = bilevel_step_bound(*cfg.alpha_L, f.beta, cfg.mu);
    inclusive = true;
  } else {
    bound = std::min(2.0 / (cfg.mu * cfg.mu), 1.0 / (f.beta + cfg.mu));
  }
  if (inclusive ? cfg.tau > bound : cfg.tau >= bound) {
    std::ostringstream msg;
    msg << "bilevel_inexact: tau = " << cfg.tau << " exceeds the step bound " << bound;
    throw ConfigError(msg.str());
  }
  const int layers = cfg.inner_L;
  return run(f, g, cfg.lambda, cfg.mu, cfg.tau, cfg.max_outer, x0, u0,
             [&](const Vector& x, const Vector& u) { return inner(x, u, layers); }, phi);
}

double estimate_alpha(const ProxApproximator& inner, int layers, const Regularizer& g,
                      double lambda, double mu, Index n, int samples, std::uint64_t seed,
                      double scale) {
  if (samples < 1) throw ConfigError("estimate_alpha: samples must be positive");
  if (!(lambda > 0.0) || !(mu > 0.0))
    throw ConfigError("estimate_alpha: lambda and mu must be positive");
  Rng rng(seed, Stream::kSampling);
  double worst = 0.0;
  int used = 0;
  for (int s = 0; s < samples; ++s) {
    const Vector x = scale * rng.normal_vector(n);
    const Vector u = scale * rng.normal_vector(n);
    const Vector p = prox(g, lambda / mu, x);
    const double denom = (u - p).norm();
    if (denom < 1e-12) continue;
    worst = std::max(worst, (inner(x, u, layers) - p).norm() / denom);
    ++used;
  }
  if (used == 0) throw NumericalError("estimate_alpha: every sample was degenerate");
  return worst;
}

}  // namespace proxpnp
