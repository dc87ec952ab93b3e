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

#include <limits>
#include <variant>

#include "proxpnp/types.hpp"

namespace proxpnp {

/// g(x) = ||x||_1
struct L1Norm {};

/// g(x) = indicator of { ||x||_inf <= radius }
struct LinfBallIndicator {
  double radius = 1.0;
};

/// A separable convex function g. The regularization weight is not stored:
/// every call receives the effective scaling explicitly.
class Regularizer {
 public:
  using Kind = std::variant<L1Norm, LinfBallIndicator>;

  Regularizer() = default;
  Regularizer(Kind kind);  // NOLINT(google-explicit-constructor)

  static Regularizer l1() { return Regularizer(L1Norm{}); }
  static Regularizer linf_ball(double radius);

  const Kind& kind() const { return kind_; }
  bool is_l1() const { return std::holds_alternative<L1Norm>(kind_); }

  /// g(x); +inf for an indicator evaluated outside its set.
  double value(const Vector& x) const;

 private:
  Kind kind_ = L1Norm{};
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// argmin_x gamma * g(x) + 1/2 ||x - v||^2
Vector prox(const Regularizer& g, double gamma, const Vector& v);

/// prox of (gamma g)^*, evaluated through the Moreau decomposition
/// v - prox(g, gamma, v); the two halves always sum to v exactly.
Vector prox_conjugate(const Regularizer& g, double gamma, const Vector& v);

/// prox of scale * (gamma g)^*.
///
/// When g is positively homogeneous (l1), (gamma g)^* is an indicator and the
/// scale drops out, so this is prox_conjugate(g, gamma, v). Otherwise the
/// scaled Moreau identity v - scale * prox(g, gamma / scale, v / scale) is used.
Vector prox_conjugate_scaled(const Regularizer& g, double scale, double gamma, const Vector& v);

/// Moreau envelope min_u lambda g(u) + mu/2 ||x - u||^2.
double moreau_envelope_value(const Regularizer& g, double lambda, double mu, const Vector& x);

/// Gradient mu (x - prox(g, lambda / mu, x)); mu-Lipschitz.
Vector moreau_envelope_grad(const Regularizer& g, double lambda, double mu, const Vector& x);

/// Componentwise sign(v) max(|v| - t, 0); the kink |v| = t maps to 0.
Vector soft_threshold(const Vector& v, double t);

/// Componentwise clip to [-r, r].
Vector clip(const Vector& v, double r);

}  // namespace proxpnp
