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

#include "proxpnp/solvers.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace proxpnp {

namespace {

using Clock = std::chrono::steady_clock;

void check_solver_config(const char* who, const SolverConfig& cfg) {
  auto fail = [who](const std::string& what) { throw ConfigError(std::string(who) + ": " + what); };
  if (!(cfg.tau > 0.0) || !std::isfinite(cfg.tau)) fail("step must be finite and positive");
  if (cfg.max_outer < 0) fail("max_outer must be non-negative");
  if (!(cfg.stop_tol >= 0.0)) fail("stop_tol must be non-negative");
  if (cfg.record_every < 1) fail("record_every must be positive");
}

void check_below(const char* who, const char* name, double value, double bound,
                 const char* formula) {
  if (value < bound) return;
  std::ostringstream msg;
  msg << who << ": " << name << " = " << value << " must be below " << formula << " = " << bound;
  throw ConfigError(msg.str());
}

double squared_norm(const LinearOperator& op) {
  const double n = op.spectral_norm();
  return n * n;
}

// Writes records and forwards iterates to the observer.
class Recorder {
 public:
  Recorder(const SolverConfig& cfg, const TraceOptions& opts, Index x_dim, Index coef_dim)
      : cfg_(cfg), opts_(opts), start_(Clock::now()) {
    if (opts.x_ref) check_length("trace x_ref", x_dim, opts.x_ref->size());
    if (opts.coef_ref) check_length("trace coef_ref", coef_dim, opts.coef_ref->size());
    if (opts.x_true) check_length("trace x_true", x_dim, opts.x_true->size());
  }

  template <class Objective>
  void visit(long k, bool last, const Vector& x, const Vector& coef, Objective&& objective) {
    if (opts_.observer) opts_.observer(k, x, coef);
    if (k % cfg_.record_every != 0 && !last) return;
    if (!trace_.records.empty() && trace_.records.back().k == k) return;
    TraceRecord rec;
    rec.k = k;
    if (opts_.x_ref) rec.dx_ref = (x - *opts_.x_ref).norm();
    if (opts_.coef_ref) rec.dcoef_ref = (coef - *opts_.coef_ref).norm();
    rec.objective = objective();
    if (opts_.x_true) rec.psnr = psnr(x, *opts_.x_true, opts_.psnr_peak);
    if (opts_.record_wall_time)
      rec.wall_s = std::chrono::duration<double>(Clock::now() - start_).count();
    trace_.records.push_back(rec);
  }

  SolverTrace take() { return std::move(trace_); }

 private:
  const SolverConfig& cfg_;
  const TraceOptions& opts_;
  Clock::time_point start_;
  SolverTrace trace_;
};

// v = x - tau A^T (A x - y)
void gradient_step(const LinearOperator& a, const Vector& y, double tau, const Vector& x,
                   Vector& resid, Vector& grad, Vector& v) {
  a.apply_to(x, resid);
  resid -= y;
  a.apply_adjoint_to(resid, grad);
  v = x - tau * grad;
}

void check_problem(const char* who, const LinearOperator& a, const Vector& y, Index signal_dim) {
  check_length((std::string(who) + " measurements").c_str(), a.out_dim(), y.size());
  check_length((std::string(who) + " operator/signal").c_str(), signal_dim, a.in_dim());
}

}  // namespace

SolverResult fb_pnp_analysis(const LinearOperator& a, const Vector& y, const AnalysisDenoiser& d,
                             const SolverConfig& cfg, const Vector& x0, const WarmState& u0,
                             const TraceOptions& opts) {
  constexpr const char* who = "fb_pnp_analysis";
  check_solver_config(who, cfg);
  check_problem(who, a, y, d.signal_dim());
  check_length("fb_pnp_analysis x0", d.signal_dim(), x0.size());
  check_length("fb_pnp_analysis u0", d.coef_dim(), u0.vec.size());
  check_below(who, "tau", cfg.tau, 2.0 / squared_norm(a), "2/||A||^2");
  check_below(who, "sigma", d.sigma, 2.0 / squared_norm(d.gamma_op), "2/||Gamma||^2");

  const AnalysisDenoiser d_eff = d.with_lambda(cfg.tau * d.lambda);
  const auto objective = [&](const Vector& x) {
    return objective_analysis(a, y, d.gamma_op, d.g, d.lambda, x);
  };
  Recorder rec(cfg, opts, x0.size(), u0.vec.size());
  Vector x = x0;
  WarmState u = u0;
  Vector resid, grad, v;
  rec.visit(0, cfg.max_outer == 0, x, u.vec, [&] { return objective(x); });
  long k = 0;
  while (k < cfg.max_outer) {
    gradient_step(a, y, cfg.tau, x, resid, grad, v);
    DenoiseResult out =
        ad_apply(d_eff, cfg.warm_start ? u : WarmState::zeros(d.coef_dim()), v);
    const double step = (out.x - x).norm();
    x = std::move(out.x);
    u = std::move(out.state);
    ++k;
    const bool last = k == cfg.max_outer || (cfg.stop_tol > 0.0 && step <= cfg.stop_tol);
    rec.visit(k, last, x, u.vec, [&] { return objective(x); });
    if (last) break;
  }
  return {std::move(x), std::move(u), rec.take(), k};
}

SolverResult fb_pnp_synthesis(const LinearOperator& a, const Vector& y,
                              const SynthesisDenoiser& d, const SolverConfig& cfg,
                              const Vector& x0, const WarmState& z0, const TraceOptions& opts) {
  constexpr const char* who = "fb_pnp_synthesis";
  check_solver_config(who, cfg);
  check_problem(who, a, y, d.signal_dim());
  check_length("fb_pnp_synthesis x0", d.signal_dim(), x0.size());
  check_length("fb_pnp_synthesis z0", d.coef_dim(), z0.vec.size());
  check_below(who, "tau", cfg.tau, 2.0 / squared_norm(a), "2/||A||^2");
  check_below(who, "zeta", d.zeta, 2.0 / squared_norm(d.dict_op), "2/||D||^2");
  if (d.layers == 1) {
    check_below(who, "tau * zeta", cfg.tau * d.zeta,
                2.0 / squared_norm(LinearOperator::compose(a, d.dict_op)),
                "2/||AD||^2");
  }

  const SynthesisDenoiser d_eff = d.with_lambda(cfg.tau * d.lambda);
  const auto objective = [&](const Vector& z) {
    return objective_synthesis(a, d.dict_op, y, d.g, d.lambda, z);
  };
  Recorder rec(cfg, opts, x0.size(), z0.vec.size());
  Vector x = x0;
  WarmState z = z0;
  Vector resid, grad, v;
  rec.visit(0, cfg.max_outer == 0, x, z.vec, [&] { return objective(z.vec); });
  long k = 0;
  while (k < cfg.max_outer) {
    gradient_step(a, y, cfg.tau, x, resid, grad, v);
    DenoiseResult out =
        sd_apply(d_eff, cfg.warm_start ? z : WarmState::zeros(d.coef_dim()), v);
    const double step = (out.x - x).norm();
    x = std::move(out.x);
    z = std::move(out.state);
    ++k;
    const bool last = k == cfg.max_outer || (cfg.stop_tol > 0.0 && step <= cfg.stop_tol);
    rec.visit(k, last, x, z.vec, [&] { return objective(z.vec); });
    if (last) break;
  }
  return {std::move(x), std::move(z), rec.take(), k};
}

SolverResult loris_verhoeven(const LinearOperator& a, const Vector& y,
                             const LinearOperator& gamma_op, const Regularizer& g, double lambda,
                             double sigma, const SolverConfig& cfg, const Vector& x0,
                             const WarmState& u0, const TraceOptions& opts) {
  constexpr const char* who = "loris_verhoeven";
  check_solver_config(who, cfg);
  check_problem(who, a, y, gamma_op.in_dim());
  check_length("loris_verhoeven x0", gamma_op.in_dim(), x0.size());
  check_length("loris_verhoeven u0", gamma_op.out_dim(), u0.vec.size());
  if (!(sigma > 0.0)) throw ConfigError("loris_verhoeven: sigma must be positive");
  if (!(lambda >= 0.0)) throw ConfigError("loris_verhoeven: lambda must be non-negative");
  check_below(who, "tau", cfg.tau, 2.0 / squared_norm(a), "2/||A||^2");
  check_below(who, "sigma", sigma, 1.0 / squared_norm(gamma_op), "1/||Gamma||^2");

  const double tau = cfg.tau;
  const double ratio = sigma / tau;
  const auto objective = [&](const Vector& x) {
    return objective_analysis(a, y, gamma_op, g, lambda, x);
  };
  Recorder rec(cfg, opts, x0.size(), u0.vec.size());
  Vector x = x0;
  Vector u = u0.vec;
  Vector resid, grad, p, back, fwd;
  rec.visit(0, cfg.max_outer == 0, x, u, [&] { return objective(x); });
  long k = 0;
  while (k < cfg.max_outer) {
    gradient_step(a, y, tau, x, resid, grad, p);
    gamma_op.apply_adjoint_to(u, back);
    const Vector x_bar = p - tau * back;
    gamma_op.apply_to(x_bar, fwd);
    const Vector w = u + ratio * fwd;
    u = lambda == 0.0 ? Vector::Zero(w.size()) : prox_conjugate_scaled(g, ratio, lambda, w);
    gamma_op.apply_adjoint_to(u, back);
    Vector x_next = p - tau * back;
    const double step = (x_next - x).norm();
    x = std::move(x_next);
    ++k;
    const bool last = k == cfg.max_outer || (cfg.stop_tol > 0.0 && step <= cfg.stop_tol);
    rec.visit(k, last, x, u, [&] { return objective(x); });
    if (last) break;
  }
  return {std::move(x), WarmState{std::move(u)}, rec.take(), k};
}

SolverResult fb_synthesis_direct(const LinearOperator& a, const LinearOperator& dict_op,
                                 const Vector& y, const Regularizer& g, double lambda,
                                 const SolverConfig& cfg, const WarmState& z0,
                                 const TraceOptions& opts) {
  constexpr const char* who = "fb_synthesis_direct";
  check_solver_config(who, cfg);
  check_problem(who, a, y, dict_op.out_dim());
  check_length("fb_synthesis_direct z0", dict_op.in_dim(), z0.vec.size());
  if (!(lambda >= 0.0)) throw ConfigError("fb_synthesis_direct: lambda must be non-negative");
  const LinearOperator ad = LinearOperator::compose(a, dict_op);
  check_below(who, "step", cfg.tau, 2.0 / squared_norm(ad), "2/||AD||^2");

  const double gamma = cfg.tau;
  const auto objective = [&](const Vector& z) {
    return objective_synthesis(a, dict_op, y, g, lambda, z);
  };
  Recorder rec(cfg, opts, dict_op.out_dim(), z0.vec.size());
  Vector z = z0.vec;
  Vector x = dict_op.apply(z);
  Vector resid, grad;
  rec.visit(0, cfg.max_outer == 0, x, z, [&] { return objective(z); });
  long k = 0;
  while (k < cfg.max_outer) {
    ad.apply_to(z, resid);
    resid -= y;
    ad.apply_adjoint_to(resid, grad);
    Vector w = z - gamma * grad;
    Vector z_next = lambda == 0.0 ? std::move(w) : prox(g, gamma * lambda, w);
    Vector x_next = dict_op.apply(z_next);
    const double step = (x_next - x).norm();
    z = std::move(z_next);
    x = std::move(x_next);
    ++k;
    const bool last = k == cfg.max_outer || (cfg.stop_tol > 0.0 && step <= cfg.stop_tol);
    rec.visit(k, last, x, z, [&] { return objective(z); });
    if (last) break;
  }
  return {std::move(x), WarmState{std::move(z)}, rec.take(), k};
}

double kkt_residual_lasso(const Vector& z, const LinearOperator& a, const LinearOperator& dict_op,
                          const Vector& y, double lambda) {
  const Vector r = dict_op.apply_adjoint(a.apply_adjoint(a.apply(dict_op.apply(z)) - y));
  double worst = 0.0;
  for (Index i = 0; i < z.size(); ++i) {
    const double ri = r[i];
    const double term = z[i] == 0.0 ? std::max(std::abs(ri) - lambda, 0.0)
                                    : std::abs(ri + lambda * (z[i] > 0.0 ? 1.0 : -1.0));
    worst = std::max(worst, term);
  }
  return worst;
}

double objective_analysis(const LinearOperator& a, const Vector& y, const LinearOperator& gamma_op,
                          const Regularizer& g, double lambda, const Vector& x) {
  const double data = 0.5 * (a.apply(x) - y).squaredNorm();
  return lambda == 0.0 ? data : data + lambda * g.value(gamma_op.apply(x));
}

double objective_synthesis(const LinearOperator& a, const LinearOperator& dict_op,
                           const Vector& y, const Regularizer& g, double lambda, const Vector& z) {
  const double data = 0.5 * (a.apply(dict_op.apply(z)) - y).squaredNorm();
  return lambda == 0.0 ? data : data + lambda * g.value(z);
}

}  // namespace proxpnp
