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

#include "proxpnp/prox.hpp"

#include <cmath>
#include <sstream>

namespace proxpnp {

namespace {

void require_positive(const char* what, double x) {
  if (!(x > 0.0)) {
    std::ostringstream msg;
    msg << what << " must be positive, got " << x;
    throw ConfigError(msg.str());
  }
}

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

}  // namespace

Regularizer::Regularizer(Kind kind) : kind_(kind) {}

Regularizer Regularizer::linf_ball(double radius) {
  require_positive("l-infinity ball radius", radius);
  return Regularizer(LinfBallIndicator{radius});
}

double Regularizer::value(const Vector& x) const {
  return std::visit(Overloaded{
                        [&](const L1Norm&) { return x.lpNorm<1>(); },
                        [&](const LinfBallIndicator& b) {
                          return x.size() == 0 || x.lpNorm<Eigen::Infinity>() <= b.radius
                                     ? 0.0
                                     : kInfinity;
                        },
                    },
                    kind_);
}

Vector soft_threshold(const Vector& v, double t) {
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    const double mag = std::max(std::abs(v[i]) - t, 0.0);
    out[i] = mag == 0.0 ? 0.0 : std::copysign(mag, v[i]);
  }
  return out;
}

Vector clip(const Vector& v, double r) { return v.cwiseMax(-r).cwiseMin(r); }

namespace {

// Projection onto [-r, r] written as p = v - c with |c| <= |v|, which makes
// v - p exact, so p + (v - p) == v bit for bit. p may sit up to one ulp of v
// inside the boundary but never outside it.
Vector project_linf(const Vector& v, double r) {
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    const double x = v[i];
    if (std::abs(x) <= r) {
      out[i] = x;
      continue;
    }
    const double away = std::copysign(kInfinity, x);
    double c = x - std::copysign(r, x);
    double p = x - c;
    while (std::abs(p) > r) {
      c = std::nextafter(c, away);
      p = x - c;
    }
    out[i] = p;
  }
  return out;
}

}  // namespace

Vector prox(const Regularizer& g, double gamma, const Vector& v) {
  require_positive("prox step gamma", gamma);
  return std::visit(Overloaded{
                        [&](const L1Norm&) { return soft_threshold(v, gamma); },
                        [&](const LinfBallIndicator& b) { return project_linf(v, b.radius); },
                    },
                    g.kind());
}

Vector prox_conjugate(const Regularizer& g, double gamma, const Vector& v) {
  return v - prox(g, gamma, v);
}

Vector prox_conjugate_scaled(const Regularizer& g, double scale, double gamma, const Vector& v) {
  require_positive("conjugate prox scale", scale);
  if (g.is_l1()) return prox_conjugate(g, gamma, v);
  return v - scale * prox(g, gamma / scale, v / scale);
}

double moreau_envelope_value(const Regularizer& g, double lambda, double mu, const Vector& x) {
  require_positive("envelope lambda", lambda);
  require_positive("envelope mu", mu);
  const Vector p = prox(g, lambda / mu, x);
  return lambda * g.value(p) + 0.5 * mu * (x - p).squaredNorm();
}

Vector moreau_envelope_grad(const Regularizer& g, double lambda, double mu, const Vector& x) {
  require_positive("envelope lambda", lambda);
  require_positive("envelope mu", mu);
  return mu * (x - prox(g, lambda / mu, x));
}

}  // namespace proxpnp
