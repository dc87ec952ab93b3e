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

#include "proxpnp/denoisers.hpp"

#include <cmath>
#include <sstream>

namespace proxpnp {

namespace {

struct Workspace {
  Vector residual;
  Vector back;
};

void check_config(const char* what, double lambda, double step, int layers) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw ConfigError(std::string(what) + ": lambda must be finite and non-negative");
  if (!(step > 0.0) || !std::isfinite(step))
    throw ConfigError(std::string(what) + ": step size must be finite and positive");
  if (layers < 0) throw ConfigError(std::string(what) + ": layer count must be non-negative");
}

std::optional<std::string> step_warning_for(const char* name, double step, double norm) {
  const double bound = 2.0 / (norm * norm);
  if (step < bound) return std::nullopt;
  std::ostringstream msg;
  msg << name << " = " << step << " is not below 2/||op||^2 = " << bound
      << "; inner iterations may diverge";
  return msg.str();
}

// u <- prox_{sigma (lambda g)^*}(u - sigma Gamma (Gamma^T u - v))
Vector ad_step(const AnalysisDenoiser& d, const Vector& u, const Vector& v, Workspace& ws) {
  d.gamma_op.apply_adjoint_to(u, ws.residual);
  ws.residual -= v;
  d.gamma_op.apply_to(ws.residual, ws.back);
  const Vector w = u - d.sigma * ws.back;
  if (d.lambda == 0.0) return Vector::Zero(w.size());
  return prox_conjugate_scaled(d.g, d.sigma, d.lambda, w);
}

// z <- prox_{zeta lambda g}(z - zeta D^T (D z - v))
Vector sd_step(const SynthesisDenoiser& d, const Vector& z, const Vector& v, Workspace& ws) {
  d.dict_op.apply_to(z, ws.residual);
  ws.residual -= v;
  d.dict_op.apply_adjoint_to(ws.residual, ws.back);
  Vector w = z - d.zeta * ws.back;
  if (d.lambda == 0.0) return w;
  return prox(d.g, d.zeta * d.lambda, w);
}

}  // namespace

AnalysisDenoiser AnalysisDenoiser::with_default_step(LinearOperator gamma_op, Regularizer g,
                                                     double lambda, int layers) {
  const double n = gamma_op.spectral_norm();
  if (!(n > 0.0)) throw ConfigError("analysis operator has zero norm");
  return AnalysisDenoiser{std::move(gamma_op), g, lambda, kDefaultStepFactor / (n * n), layers};
}

AnalysisDenoiser AnalysisDenoiser::with_lambda(double new_lambda) const {
  AnalysisDenoiser copy = *this;
  copy.lambda = new_lambda;
  return copy;
}

AnalysisDenoiser AnalysisDenoiser::with_layers(int new_layers) const {
  AnalysisDenoiser copy = *this;
  copy.layers = new_layers;
  return copy;
}

std::optional<std::string> AnalysisDenoiser::step_warning() const {
  return step_warning_for("sigma", sigma, gamma_op.spectral_norm());
}

SynthesisDenoiser SynthesisDenoiser::with_default_step(LinearOperator dict_op, Regularizer g,
                                                       double lambda, int layers) {
  const double n = dict_op.spectral_norm();
  if (!(n > 0.0)) throw ConfigError("synthesis dictionary has zero norm");
  return SynthesisDenoiser{std::move(dict_op), g, lambda, kDefaultStepFactor / (n * n), layers};
}

SynthesisDenoiser SynthesisDenoiser::with_lambda(double new_lambda) const {
  SynthesisDenoiser copy = *this;
  copy.lambda = new_lambda;
  return copy;
}

SynthesisDenoiser SynthesisDenoiser::with_layers(int new_layers) const {
  SynthesisDenoiser copy = *this;
  copy.layers = new_layers;
  return copy;
}

std::optional<std::string> SynthesisDenoiser::step_warning() const {
  return step_warning_for("zeta", zeta, dict_op.spectral_norm());
}

Vector ad_layer(const AnalysisDenoiser& d, const Vector& u, const Vector& v) {
  check_config("analysis denoiser", d.lambda, d.sigma, d.layers);
  check_length("ad_layer dual", d.coef_dim(), u.size());
  check_length("ad_layer input", d.signal_dim(), v.size());
  Workspace ws;
  return ad_step(d, u, v, ws);
}

DenoiseResult ad_apply(const AnalysisDenoiser& d, const WarmState& state, const Vector& v) {
  check_config("analysis denoiser", d.lambda, d.sigma, d.layers);
  check_length("ad_apply warm state", d.coef_dim(), state.vec.size());
  check_length("ad_apply input", d.signal_dim(), v.size());
  Workspace ws;
  Vector u = state.vec;
  for (int l = 0; l < d.layers; ++l) {
    Vector next = ad_step(d, u, v, ws);
    const bool fixed = next == u;
    u = std::move(next);
    if (fixed) break;
  }
  Vector x = v - d.gamma_op.apply_adjoint(u);
  return {std::move(x), WarmState{std::move(u)}};
}

Vector sd_layer(const SynthesisDenoiser& d, const Vector& z, const Vector& v) {
  check_config("synthesis denoiser", d.lambda, d.zeta, d.layers);
  check_length("sd_layer code", d.coef_dim(), z.size());
  check_length("sd_layer input", d.signal_dim(), v.size());
  Workspace ws;
  return sd_step(d, z, v, ws);
}

DenoiseResult sd_apply(const SynthesisDenoiser& d, const WarmState& state, const Vector& v) {
  check_config("synthesis denoiser", d.lambda, d.zeta, d.layers);
  check_length("sd_apply warm state", d.coef_dim(), state.vec.size());
  check_length("sd_apply input", d.signal_dim(), v.size());
  Workspace ws;
  Vector z = state.vec;
  for (int l = 0; l < d.layers; ++l) {
    Vector next = sd_step(d, z, v, ws);
    const bool fixed = next == z;
    z = std::move(next);
    if (fixed) break;
  }
  Vector x = d.dict_op.apply(z);
  return {std::move(x), WarmState{std::move(z)}};
}

Vector ad_prox_oracle(const AnalysisDenoiser& d, const Vector& v, double tol, long max_iter) {
  check_config("analysis denoiser", d.lambda, d.sigma, d.layers);
  check_length("ad_prox_oracle input", d.signal_dim(), v.size());
  if (!(tol > 0.0)) throw ConfigError("ad_prox_oracle: tol must be positive");
  if (auto warn = d.step_warning()) throw ConfigError("ad_prox_oracle: " + *warn);
  Workspace ws;
  Vector u = Vector::Zero(d.coef_dim());
  double residual = 0.0;
  for (long it = 0; it < max_iter; ++it) {
    Vector next = ad_step(d, u, v, ws);
    residual = (next - u).norm();
    u = std::move(next);
    if (residual <= tol) return v - d.gamma_op.apply_adjoint(u);
  }
  std::ostringstream msg;
  msg << "ad_prox_oracle: no convergence after " << max_iter << " iterations (last step "
      << residual << ", tol " << tol << ")";
  throw NumericalError(msg.str());
}

SynthesisProxResult sd_prox_oracle(const SynthesisDenoiser& d, const Vector& v, double tol,
                                   long max_iter) {
  check_config("synthesis denoiser", d.lambda, d.zeta, d.layers);
  check_length("sd_prox_oracle input", d.signal_dim(), v.size());
  if (!(tol > 0.0)) throw ConfigError("sd_prox_oracle: tol must be positive");
  if (auto warn = d.step_warning()) throw ConfigError("sd_prox_oracle: " + *warn);
  Workspace ws;
  Vector z = Vector::Zero(d.coef_dim());
  double residual = 0.0;
  for (long it = 0; it < max_iter; ++it) {
    Vector next = sd_step(d, z, v, ws);
    residual = (next - z).norm();
    z = std::move(next);
    if (residual <= tol) {
      Vector x = d.dict_op.apply(z);
      return {std::move(x), std::move(z), it + 1};
    }
  }
  std::ostringstream msg;
  msg << "sd_prox_oracle: no convergence after " << max_iter << " iterations (last step "
      << residual << ", tol " << tol << ")";
  throw NumericalError(msg.str());
}

double analysis_dual_objective(const AnalysisDenoiser& d, const Vector& u, const Vector& v,
                               double feasibility_slack) {
  if (!d.g.is_l1()) throw ConfigError("analysis_dual_objective is only defined for l1");
  const double smooth = 0.5 * (d.gamma_op.apply_adjoint(u) - v).squaredNorm();
  const double radius = d.lambda * (1.0 + feasibility_slack);
  return u.lpNorm<Eigen::Infinity>() <= radius ? smooth : kInfinity;
}

double synthesis_code_objective(const SynthesisDenoiser& d, const Vector& z, const Vector& v) {
  return 0.5 * (d.dict_op.apply(z) - v).squaredNorm() + d.lambda * d.g.value(z);
}

}  // namespace proxpnp
