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

#include "proxpnp/linops.hpp"

#include <cmath>
#include <mutex>
#include <sstream>
#include <variant>

#include "proxpnp/rng.hpp"

namespace proxpnp {

namespace {

struct DenseOp {
  Matrix m;
};

struct ConvOp {
  Matrix kernel;
  Index rows;
  Index cols;
};

struct FilterBankOp {
  std::vector<Matrix> filters;
  Index rows;
  Index cols;
  FilterBankDirection direction;
};

struct CompositionOp {
  LinearOperator outer;
  LinearOperator inner;
};

Index wrap(Index i, Index n) {
  const Index r = i % n;
  return r < 0 ? r + n : r;
}

// out += k * x (forward) or out += k^T * x (adjoint), single plane.
void conv_accumulate(const Matrix& k, const double* x, double* out, Index rows, Index cols,
                     bool adjoint) {
  const Index ca = k.rows() / 2;
  const Index cb = k.cols() / 2;
  for (Index a = 0; a < k.rows(); ++a) {
    for (Index b = 0; b < k.cols(); ++b) {
      const double tap = k(a, b);
      if (tap == 0.0) continue;
      const Index di = a - ca;
      const Index dj = b - cb;
      if (adjoint)
        detail::add_circular_shift(x, out, rows, cols, -di, -dj, tap);
      else
        detail::add_circular_shift(x, out, rows, cols, di, dj, tap);
    }
  }
}

}  // namespace

struct LinearOperator::Node {
  std::variant<DenseOp, ConvOp, FilterBankOp, CompositionOp> op;
  Index in_dim = 0;
  Index out_dim = 0;
  mutable std::mutex cache_mutex;
  mutable std::optional<double> norm_cache;
};

namespace detail {

void add_circular_shift(const double* src, double* dst, Index rows, Index cols, Index di,
                        Index dj, double scale) {
  const Index s = wrap(-dj, cols);
  for (Index i = 0; i < rows; ++i) {
    const double* srow = src + wrap(i - di, rows) * cols;
    double* drow = dst + i * cols;
    const Index head = cols - s;
    for (Index j = 0; j < head; ++j) drow[j] += scale * srow[j + s];
    for (Index j = head; j < cols; ++j) drow[j] += scale * srow[j + s - cols];
  }
}

Matrix kernel_gradient(const double* g, const double* x, Index rows, Index cols, Index kh,
                       Index kw) {
  Matrix grad = Matrix::Zero(kh, kw);
  const Index ca = kh / 2;
  const Index cb = kw / 2;
  for (Index a = 0; a < kh; ++a) {
    for (Index b = 0; b < kw; ++b) {
      const Index di = a - ca;
      const Index s = wrap(-(b - cb), cols);
      double acc = 0.0;
      for (Index i = 0; i < rows; ++i) {
        const double* xrow = x + wrap(i - di, rows) * cols;
        const double* grow = g + i * cols;
        const Index head = cols - s;
        for (Index j = 0; j < head; ++j) acc += grow[j] * xrow[j + s];
        for (Index j = head; j < cols; ++j) acc += grow[j] * xrow[j + s - cols];
      }
      grad(a, b) = acc;
    }
  }
  return grad;
}

}  // namespace detail

LinearOperator LinearOperator::dense(Matrix m) {
  if (m.rows() < 1 || m.cols() < 1) throw ConfigError("dense operator needs a non-empty matrix");
  auto node = std::make_shared<Node>();
  node->in_dim = m.cols();
  node->out_dim = m.rows();
  node->op = DenseOp{std::move(m)};
  return LinearOperator(std::move(node));
}

LinearOperator LinearOperator::identity(Index n) { return dense(Matrix::Identity(n, n)); }

LinearOperator LinearOperator::conv2d_circular(Matrix kernel, Index rows, Index cols) {
  if (rows < 1 || cols < 1) throw ConfigError("convolution image shape must be positive");
  if (kernel.rows() < 1 || kernel.cols() < 1) throw ConfigError("convolution kernel is empty");
  if (kernel.rows() > rows || kernel.cols() > cols)
    throw ConfigError("convolution kernel is larger than the image");
  auto node = std::make_shared<Node>();
  node->in_dim = rows * cols;
  node->out_dim = rows * cols;
  node->op = ConvOp{std::move(kernel), rows, cols};
  return LinearOperator(std::move(node));
}

LinearOperator LinearOperator::filter_bank(std::vector<Matrix> filters, Index rows, Index cols,
                                           FilterBankDirection direction) {
  if (filters.empty()) throw ConfigError("filter bank needs at least one filter");
  if (rows < 1 || cols < 1) throw ConfigError("filter bank image shape must be positive");
  for (const auto& f : filters) {
    if (f.rows() != filters.front().rows() || f.cols() != filters.front().cols())
      throw ConfigError("filter bank filters must share one size");
    if (f.rows() < 1 || f.cols() < 1 || f.rows() > rows || f.cols() > cols)
      throw ConfigError("filter size incompatible with the image shape");
  }
  auto node = std::make_shared<Node>();
  const Index pixels = rows * cols;
  const Index planes = static_cast<Index>(filters.size()) * pixels;
  node->in_dim = direction == FilterBankDirection::kAnalysis ? pixels : planes;
  node->out_dim = direction == FilterBankDirection::kAnalysis ? planes : pixels;
  node->op = FilterBankOp{std::move(filters), rows, cols, direction};
  return LinearOperator(std::move(node));
}

LinearOperator LinearOperator::compose(const LinearOperator& outer, const LinearOperator& inner) {
  if (outer.in_dim() != inner.out_dim()) {
    std::ostringstream msg;
    msg << "cannot compose: outer expects " << outer.in_dim() << " inputs, inner produces "
        << inner.out_dim();
    throw DimensionError(msg.str());
  }
  auto node = std::make_shared<Node>();
  node->in_dim = inner.in_dim();
  node->out_dim = outer.out_dim();
  node->op = CompositionOp{outer, inner};
  return LinearOperator(std::move(node));
}

OperatorKind LinearOperator::kind() const {
  return static_cast<OperatorKind>(node_->op.index());
}

Index LinearOperator::in_dim() const { return node_->in_dim; }
Index LinearOperator::out_dim() const { return node_->out_dim; }

Vector LinearOperator::apply(const Vector& v) const {
  Vector out;
  apply_to(v, out);
  return out;
}

Vector LinearOperator::apply_adjoint(const Vector& u) const {
  Vector out;
  apply_adjoint_to(u, out);
  return out;
}

void LinearOperator::apply_to(const Vector& v, Vector& out) const {
  check_length("LinearOperator::apply", in_dim(), v.size());
  std::visit(
      [&](const auto& op) {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, DenseOp>) {
          out.noalias() = op.m * v;
        } else if constexpr (std::is_same_v<T, ConvOp>) {
          out.setZero(out_dim());
          conv_accumulate(op.kernel, v.data(), out.data(), op.rows, op.cols, false);
        } else if constexpr (std::is_same_v<T, FilterBankOp>) {
          const Index pixels = op.rows * op.cols;
          out.setZero(out_dim());
          for (std::size_t f = 0; f < op.filters.size(); ++f) {
            const Index off = static_cast<Index>(f) * pixels;
            if (op.direction == FilterBankDirection::kAnalysis)
              conv_accumulate(op.filters[f], v.data(), out.data() + off, op.rows, op.cols, false);
            else
              conv_accumulate(op.filters[f], v.data() + off, out.data(), op.rows, op.cols, false);
          }
        } else {
          const Vector mid = op.inner.apply(v);
          op.outer.apply_to(mid, out);
        }
      },
      node_->op);
}

void LinearOperator::apply_adjoint_to(const Vector& u, Vector& out) const {
  check_length("LinearOperator::apply_adjoint", out_dim(), u.size());
  std::visit(
      [&](const auto& op) {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, DenseOp>) {
          out.noalias() = op.m.transpose() * u;
        } else if constexpr (std::is_same_v<T, ConvOp>) {
          out.setZero(in_dim());
          conv_accumulate(op.kernel, u.data(), out.data(), op.rows, op.cols, true);
        } else if constexpr (std::is_same_v<T, FilterBankOp>) {
          const Index pixels = op.rows * op.cols;
          out.setZero(in_dim());
          for (std::size_t f = 0; f < op.filters.size(); ++f) {
            const Index off = static_cast<Index>(f) * pixels;
            if (op.direction == FilterBankDirection::kAnalysis)
              conv_accumulate(op.filters[f], u.data() + off, out.data(), op.rows, op.cols, true);
            else
              conv_accumulate(op.filters[f], u.data(), out.data() + off, op.rows, op.cols, true);
          }
        } else {
          const Vector mid = op.outer.apply_adjoint(u);
          op.inner.apply_adjoint_to(mid, out);
        }
      },
      node_->op);
}

double LinearOperator::spectral_norm() const {
  if (auto cached = cached_spectral_norm()) return *cached;
  return proxpnp::spectral_norm(*this).value;
}

std::optional<double> LinearOperator::cached_spectral_norm() const {
  std::lock_guard lock(node_->cache_mutex);
  return node_->norm_cache;
}

const Matrix* LinearOperator::dense_matrix() const {
  const auto* op = std::get_if<DenseOp>(&node_->op);
  return op ? &op->m : nullptr;
}

const Matrix* LinearOperator::conv_kernel() const {
  const auto* op = std::get_if<ConvOp>(&node_->op);
  return op ? &op->kernel : nullptr;
}

const std::vector<Matrix>* LinearOperator::filters() const {
  const auto* op = std::get_if<FilterBankOp>(&node_->op);
  return op ? &op->filters : nullptr;
}

std::optional<FilterBankDirection> LinearOperator::filter_direction() const {
  const auto* op = std::get_if<FilterBankOp>(&node_->op);
  if (!op) return std::nullopt;
  return op->direction;
}

std::pair<Index, Index> LinearOperator::image_shape() const {
  if (const auto* op = std::get_if<ConvOp>(&node_->op)) return {op->rows, op->cols};
  if (const auto* op = std::get_if<FilterBankOp>(&node_->op)) return {op->rows, op->cols};
  return {0, 0};
}

SpectralNormEstimate spectral_norm(const LinearOperator& op, const PowerIterationOptions& options) {
  if (options.tol <= 0.0 || options.max_iter < 1)
    throw ConfigError("power iteration needs tol > 0 and max_iter >= 1");
  const bool gram_on_input = op.in_dim() <= op.out_dim();
  const Index n = gram_on_input ? op.in_dim() : op.out_dim();

  Rng rng(options.seed, Stream::kPowerIteration);
  Vector v = rng.normal_vector(n);
  v /= v.norm();

  SpectralNormEstimate est;
  Vector mid, w;
  double previous = -1.0;
  for (int it = 1; it <= options.max_iter; ++it) {
    if (gram_on_input) {
      op.apply_to(v, mid);
      op.apply_adjoint_to(mid, w);
    } else {
      op.apply_adjoint_to(v, mid);
      op.apply_to(mid, w);
    }
    const double rayleigh = v.dot(w);
    const double value = std::sqrt(std::max(rayleigh, 0.0));
    est.value = value;
    est.iterations = it;
    const double wnorm = w.norm();
    if (wnorm == 0.0) {
      est.converged = true;
      break;
    }
    if (previous >= 0.0 && std::abs(value - previous) < options.tol * value) {
      est.converged = true;
      break;
    }
    previous = value;
    v = w / wnorm;
  }

  std::lock_guard lock(op.node_->cache_mutex);
  if (!op.node_->norm_cache) op.node_->norm_cache = est.value;
  return est;
}

}  // namespace proxpnp
