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
#include <memory>
#include <optional>
#include <vector>

#include "proxpnp/types.hpp"

namespace proxpnp {

struct PowerIterationOptions {
  double tol = 1e-8;
  int max_iter = 1000;
  std::uint64_t seed = 0;
};

struct SpectralNormEstimate {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

enum class OperatorKind { kDense, kConv2dCircular, kFilterBank, kComposition };

/// Direction of a filter bank. kAnalysis maps one image to F coefficient
/// planes (x -> [k_f * x]_f); kSynthesis maps F planes to one image
/// (z -> sum_f k_f * z_f).
enum class FilterBankDirection { kAnalysis, kSynthesis };

/// Immutable linear map R^in_dim -> R^out_dim with an exact adjoint.
///
/// LinearOperator is a cheap handle: copies share the same underlying
/// operator and spectral-norm cache. Images are flattened row-major and
/// convolutions are circular, with the kernel anchored at (rows/2, cols/2):
///
///   (k * x)[i, j] = sum_{a,b} k[a, b] x[(i - a + rows/2) mod H, (j - b + cols/2) mod W]
///
/// All apply paths are reentrant; the spectral-norm cache is guarded.
class LinearOperator {
 public:
  static LinearOperator dense(Matrix m);
  static LinearOperator identity(Index n);
  static LinearOperator conv2d_circular(Matrix kernel, Index rows, Index cols);
  static LinearOperator filter_bank(std::vector<Matrix> filters, Index rows, Index cols,
                                    FilterBankDirection direction);
  /// outer o inner, i.e. v -> outer(inner(v)).
  static LinearOperator compose(const LinearOperator& outer, const LinearOperator& inner);

  OperatorKind kind() const;
  Index in_dim() const;
  Index out_dim() const;

  Vector apply(const Vector& v) const;
  Vector apply_adjoint(const Vector& u) const;
  /// Allocation-free variants; `out` is resized as needed and must not alias the input.
  void apply_to(const Vector& v, Vector& out) const;
  void apply_adjoint_to(const Vector& u, Vector& out) const;

  /// Largest singular value. Estimated once by power iteration with default
  /// options, then served from the cache.
  double spectral_norm() const;
  std::optional<double> cached_spectral_norm() const;

  // Structural accessors; each returns nullptr when the kind does not match.
  const Matrix* dense_matrix() const;
  const Matrix* conv_kernel() const;
  const std::vector<Matrix>* filters() const;
  std::optional<FilterBankDirection> filter_direction() const;
  /// Image shape for convolution-type operators, (0, 0) otherwise.
  std::pair<Index, Index> image_shape() const;

  struct Node;

 private:
  explicit LinearOperator(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;

  friend SpectralNormEstimate spectral_norm(const LinearOperator&, const PowerIterationOptions&);
};

/// Power iteration on op^T op or op op^T (whichever acts on the smaller
/// space) from a seeded Gaussian start. Stops when successive square roots
/// of the Rayleigh quotient agree to `tol` relatively, or at `max_iter`
/// with `converged = false`. Fills the operator's cache if it is empty.
SpectralNormEstimate spectral_norm(const LinearOperator& op,
                                   const PowerIterationOptions& options = {});

namespace detail {

/// dst[i, j] += scale * src[(i - di) mod H, (j - dj) mod W]
void add_circular_shift(const double* src, double* dst, Index rows, Index cols, Index di,
                        Index dj, double scale);

/// Gradient of <g, k * x> with respect to the taps of a kh x kw kernel.
Matrix kernel_gradient(const double* g, const double* x, Index rows, Index cols, Index kh,
                       Index kw);

}  // namespace detail

}  // namespace proxpnp
