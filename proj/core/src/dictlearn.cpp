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

#include "proxpnp/dictlearn.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "proxpnp/denoisers.hpp"
#include "proxpnp/rng.hpp"

namespace proxpnp {

namespace {

Stream dictionary_stream(DenoiserMode mode) {
  return mode == DenoiserMode::kAnalysis ? Stream::kAnalysisDictionary
                                         : Stream::kSynthesisDictionary;
}

FilterBankDirection direction_of(DenoiserMode mode) {
  return mode == DenoiserMode::kAnalysis ? FilterBankDirection::kAnalysis
                                         : FilterBankDirection::kSynthesis;
}

void check_loss_config(const LossConfig& cfg) {
  if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda))
    throw ConfigError("training lambda must be finite and non-negative");
  if (cfg.layers < 1) throw ConfigError("training needs at least one layer");
  if (cfg.fixed_step && !(*cfg.fixed_step > 0.0))
    throw ConfigError("training inner step must be positive");
  if (!(cfg.kink_tol >= 0.0)) throw ConfigError("kink tolerance must be non-negative");
}

double inner_step(const LinearOperator& op, const LossConfig& cfg) {
  if (cfg.fixed_step) return *cfg.fixed_step;
  const double n = op.spectral_norm();
  if (!(n > 0.0)) throw NumericalError("dictionary has zero spectral norm");
  return kDefaultStepFactor / (n * n);
}

void check_pair(const DictParams& dict, const TrainingPair& p) {
  check_length("training clean sample", dict.signal_dim(), p.clean.size());
  check_length("training noisy sample", dict.signal_dim(), p.noisy.size());
}

}  // namespace

DictParams DictParams::from_dense(DenoiserMode mode, Matrix m) {
  if (m.size() == 0) throw ConfigError("dense dictionary must be non-empty");
  DictParams d;
  d.mode = mode;
  d.dense = std::move(m);
  return d;
}

DictParams DictParams::from_filters(DenoiserMode mode, std::vector<Matrix> filters, Index rows,
                                    Index cols) {
  if (filters.empty()) throw ConfigError("filter bank needs at least one filter");
  for (const Matrix& k : filters) {
    if (k.rows() != filters.front().rows() || k.cols() != filters.front().cols())
      throw DimensionError("all filters of a bank must share one size");
  }
  if (rows < 1 || cols < 1) throw ConfigError("filter bank image shape must be positive");
  DictParams d;
  d.mode = mode;
  d.filters = std::move(filters);
  d.rows = rows;
  d.cols = cols;
  return d;
}

DictParams DictParams::random_dense(DenoiserMode mode, Index signal_dim, Index coef_dim,
                                    std::uint64_t seed, double scale) {
  Rng rng(seed, dictionary_stream(mode));
  Matrix m = mode == DenoiserMode::kAnalysis ? rng.normal_matrix(coef_dim, signal_dim)
                                             : rng.normal_matrix(signal_dim, coef_dim);
  return from_dense(mode, scale * m);
}

DictParams DictParams::random_filters(DenoiserMode mode, int count, Index kernel_size, Index rows,
                                      Index cols, std::uint64_t seed, double scale) {
  if (count < 1 || kernel_size < 1) throw ConfigError("filter count and size must be positive");
  Rng rng(seed, dictionary_stream(mode));
  std::vector<Matrix> filters;
  for (int f = 0; f < count; ++f)
    filters.push_back(scale * rng.normal_matrix(kernel_size, kernel_size));
  return from_filters(mode, std::move(filters), rows, cols);
}

LinearOperator DictParams::op() const {
  if (is_filter_bank()) return LinearOperator::filter_bank(filters, rows, cols, direction_of(mode));
  return LinearOperator::dense(dense);
}

Index DictParams::signal_dim() const {
  if (is_filter_bank()) return rows * cols;
  return mode == DenoiserMode::kAnalysis ? dense.cols() : dense.rows();
}

Index DictParams::coef_dim() const {
  if (is_filter_bank()) return static_cast<Index>(filters.size()) * rows * cols;
  return mode == DenoiserMode::kAnalysis ? dense.rows() : dense.cols();
}

Index DictParams::num_params() const {
  if (!is_filter_bank()) return dense.size();
  return static_cast<Index>(filters.size()) * filters.front().size();
}

// Row-major per matrix, filters in order.
Vector DictParams::flat() const {
  Vector p(num_params());
  Index at = 0;
  auto put = [&](const Matrix& m) {
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) p[at++] = m(i, j);
  };
  if (is_filter_bank()) {
    for (const Matrix& k : filters) put(k);
  } else {
    put(dense);
  }
  return p;
}

void DictParams::set_flat(const Vector& p) {
  check_length("dictionary parameters", num_params(), p.size());
  Index at = 0;
  auto take = [&](Matrix& m) {
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) m(i, j) = p[at++];
  };
  if (is_filter_bank()) {
    for (Matrix& k : filters) take(k);
  } else {
    take(dense);
  }
}

DictParams DictParams::zeros_like() const {
  DictParams z = *this;
  z.set_flat(Vector::Zero(num_params()));
  return z;
}

void DictParams::accumulate(const Vector& g_out, const Vector& a_in, double scale) {
  if (!is_filter_bank()) {
    dense.noalias() += scale * g_out * a_in.transpose();
    return;
  }
  const Index pixels = rows * cols;
  const Index kh = filters.front().rows();
  const Index kw = filters.front().cols();
  for (std::size_t f = 0; f < filters.size(); ++f) {
    const Index off = static_cast<Index>(f) * pixels;
    if (mode == DenoiserMode::kAnalysis) {
      filters[f] += scale * detail::kernel_gradient(g_out.data() + off, a_in.data(), rows, cols,
                                                    kh, kw);
    } else {
      filters[f] += scale * detail::kernel_gradient(g_out.data(), a_in.data() + off, rows, cols,
                                                    kh, kw);
    }
  }
}

ForwardTape denoise_forward(const DictParams& dict, const LinearOperator& op, double step,
                            const Vector& noisy, const LossConfig& cfg) {
  check_length("denoise_forward input", dict.signal_dim(), noisy.size());
  ForwardTape tape;
  tape.step = step;
  tape.states.reserve(static_cast<std::size_t>(cfg.layers) + 1);
  tape.states.push_back(Vector::Zero(dict.coef_dim()));
  Vector r;
  Vector back;
  for (int l = 0; l < cfg.layers; ++l) {
    const Vector& s = tape.states.back();
    Vector w;
    std::vector<bool> mask(static_cast<std::size_t>(s.size()));
    Vector next(s.size());
    if (dict.mode == DenoiserMode::kAnalysis) {
      // u <- clip(u - sigma Gamma (Gamma^T u - v), lambda)
      op.apply_adjoint_to(s, r);
      r -= noisy;
      op.apply_to(r, back);
      w = s - step * back;
      const double radius = cfg.lambda;
      for (Index i = 0; i < w.size(); ++i) {
        const double a = std::abs(w[i]);
        next[i] = a <= radius ? w[i] : std::copysign(radius, w[i]);
        mask[static_cast<std::size_t>(i)] = radius - a > cfg.kink_tol;
      }
    } else {
      // z <- soft(z - zeta D^T (D z - v), zeta lambda)
      op.apply_to(s, r);
      r -= noisy;
      op.apply_adjoint_to(r, back);
      w = s - step * back;
      const double t = step * cfg.lambda;
      next = soft_threshold(w, t);
      for (Index i = 0; i < w.size(); ++i)
        mask[static_cast<std::size_t>(i)] = std::abs(w[i]) - t > cfg.kink_tol;
    }
    tape.masks.push_back(std::move(mask));
    tape.states.push_back(std::move(next));
  }
  if (dict.mode == DenoiserMode::kAnalysis)
    tape.output = noisy - op.apply_adjoint(tape.states.back());
  else
    tape.output = op.apply(tape.states.back());
  return tape;
}

double denoise_loss(const DictParams& dict, const std::vector<TrainingPair>& batch,
                    const LossConfig& cfg) {
  check_loss_config(cfg);
  if (batch.empty()) throw ConfigError("empty training batch");
  const LinearOperator op = dict.op();
  const double step = inner_step(op, cfg);
  double total = 0.0;
  for (const TrainingPair& p : batch) {
    check_pair(dict, p);
    total += 0.5 * (denoise_forward(dict, op, step, p.noisy, cfg).output - p.clean).squaredNorm();
  }
  return total / static_cast<double>(batch.size());
}

LossGrad denoise_loss_grad(const DictParams& dict, const std::vector<TrainingPair>& batch,
                           const LossConfig& cfg) {
  check_loss_config(cfg);
  if (batch.empty()) throw ConfigError("empty training batch");
  const LinearOperator op = dict.op();
  const double step = inner_step(op, cfg);
  const double weight = 1.0 / static_cast<double>(batch.size());
  LossGrad out{0.0, dict.zeros_like()};
  DictParams& grad = out.grad;
  const bool analysis = dict.mode == DenoiserMode::kAnalysis;

  for (const TrainingPair& p : batch) {
    check_pair(dict, p);
    const ForwardTape tape = denoise_forward(dict, op, step, p.noisy, cfg);
    const Vector gx = tape.output - p.clean;
    out.loss += 0.5 * gx.squaredNorm() * weight;

    Vector gs;  // gradient with respect to the current state
    if (analysis) {
      // x = v - Gamma^T u_L
      gs = -op.apply(gx);
      grad.accumulate(tape.states.back(), gx, -weight);
    } else {
      // x = D z_L
      gs = op.apply_adjoint(gx);
      grad.accumulate(gx, tape.states.back(), weight);
    }
    for (int l = cfg.layers - 1; l >= 0; --l) {
      const std::vector<bool>& mask = tape.masks[static_cast<std::size_t>(l)];
      const Vector& s = tape.states[static_cast<std::size_t>(l)];
      Vector gw = gs;
      for (Index i = 0; i < gw.size(); ++i)
        if (!mask[static_cast<std::size_t>(i)]) gw[i] = 0.0;
      if (analysis) {
        // w = u - sigma Gamma r, r = Gamma^T u - v
        const Vector r = op.apply_adjoint(s) - p.noisy;
        const Vector gt = op.apply_adjoint(gw);
        grad.accumulate(gw, r, -step * weight);
        grad.accumulate(s, gt, -step * weight);
        gs = gw - step * op.apply(gt);
      } else {
        // w = z - zeta D^T r, r = D z - v
        const Vector r = op.apply(s) - p.noisy;
        const Vector dg = op.apply(gw);
        grad.accumulate(r, gw, -step * weight);
        grad.accumulate(dg, s, -step * weight);
        gs = gw - step * op.apply_adjoint(dg);
      }
    }
  }
  return out;
}

TrainResult train_dictionary(DictParams init, const std::vector<TrainingPair>& data,
                             const TrainConfig& cfg) {
  check_loss_config(cfg.loss);
  if (data.empty()) throw ConfigError("training set is empty");
  if (cfg.epochs < 0) throw ConfigError("epochs must be non-negative");
  if (cfg.batch < 1) throw ConfigError("batch size must be positive");
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate))
    throw ConfigError("learning rate must be finite and non-negative");

  TrainResult out{std::move(init), {}};
  auto full_loss = [&] {
    const double loss = denoise_loss(out.dict, data, cfg.loss);
    if (!std::isfinite(loss)) {
      std::ostringstream msg;
      msg << "training loss became non-finite after " << out.loss_history.size() - 1
          << " epochs";
      throw NumericalError(msg.str());
    }
    return loss;
  };
  out.loss_history.push_back(full_loss());

  std::vector<std::size_t> order(data.size());
  std::vector<TrainingPair> batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(cfg.seed ^ static_cast<std::uint64_t>(epoch), Stream::kSampling);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      batch.clear();
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      for (std::size_t i = start; i < stop; ++i) batch.push_back(data[order[i]]);
      const LossGrad lg = denoise_loss_grad(out.dict, batch, cfg.loss);
      if (!std::isfinite(lg.loss)) throw NumericalError("non-finite minibatch loss");
      out.dict.set_flat(out.dict.flat() - cfg.learning_rate * lg.grad.flat());
    }
    out.loss_history.push_back(full_loss());
  }
  return out;
}

std::vector<TrainingPair> make_noisy_pairs(const std::vector<Vector>& clean, double epsilon,
                                           std::uint64_t seed) {
  if (!(epsilon >= 0.0)) throw ConfigError("noise level must be non-negative");
  Rng rng(seed, Stream::kNoise);
  std::vector<TrainingPair> pairs;
  pairs.reserve(clean.size());
  for (const Vector& c : clean) pairs.push_back({c, c + epsilon * rng.normal_vector(c.size())});
  return pairs;
}

std::vector<Vector> sample_patches(const std::vector<Matrix>& images, Index patch, int count,
                                   std::uint64_t seed) {
  if (images.empty()) throw ConfigError("no images to sample patches from");
  if (patch < 1 || count < 0) throw ConfigError("patch size and count must be positive");
  for (const Matrix& im : images) {
    if (im.rows() < patch || im.cols() < patch)
      throw DimensionError("image smaller than the patch size");
  }
  Rng rng(seed, Stream::kPatches);
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int n = 0; n < count; ++n) {
    const Matrix& im = images[rng.below(images.size())];
    const Index r0 = static_cast<Index>(rng.below(static_cast<std::uint64_t>(im.rows() - patch + 1)));
    const Index c0 = static_cast<Index>(rng.below(static_cast<std::uint64_t>(im.cols() - patch + 1)));
    Vector v(patch * patch);
    for (Index i = 0; i < patch; ++i)
      for (Index j = 0; j < patch; ++j) v[i * patch + j] = im(r0 + i, c0 + j);
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace proxpnp
