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
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "proxpnp/linops.hpp"
#include "proxpnp/solvers.hpp"

namespace proxpnp {

/// y = A x_bar + epsilon w, with w from the noise stream of `seed`.
struct ProblemInstance {
  LinearOperator a;
  Vector y;
  Vector x_bar;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  Index rows = 0;  // image shape, 0 for plain vectors
  Index cols = 0;
};

struct CsInstance {
  ProblemInstance problem;
  LinearOperator gamma_op;  // S x N
  LinearOperator dict_op;   // N x S
};

/// Toy compressive sensing: x_bar ~ U[0, 1)^N, A (M x N), Gamma (S x N) and
/// D (N x S) with i.i.d. N(0, 1) entries, noiseless y = A x_bar. Each
/// artifact draws from its own stream of `seed`.
CsInstance gen_cs_instance(Index n, Index m, Index s, std::uint64_t seed);

/// Circular deblurring of an image with values in [0, 1]; the kernel must
/// have odd sides.
ProblemInstance gen_deblur_instance(const Matrix& image, const Matrix& kernel, double epsilon,
                                    std::uint64_t seed);
ProblemInstance gen_deblur_instance(const std::filesystem::path& image,
                                    const std::filesystem::path& kernel, double epsilon,
                                    std::uint64_t seed);

/// Horizontal and vertical forward differences as two 3x3 filters.
std::vector<Matrix> finite_difference_filters();

struct EquivalenceStudyConfig {
  Index n = 50;
  Index m = 20;
  Index s = 100;
  std::uint64_t seed = 0;
  std::vector<int> layers = {1, 20, 50, 100};
  long max_outer = 10000;
  int reference_layers = 10000;
  long reference_outer = 10000;
  double step_factor = 1.8;  // tau, sigma and zeta are step_factor / ||op||^2
  double lambda_analysis = 0.005;
  double lambda_synthesis = 80.0;
  bool run_analysis = true;
  bool run_synthesis = true;
  long record_every = 1;
  bool record_wall_time = false;
};

struct StudyRun {
  std::string formulation;  // "analysis" or "synthesis"
  int layers = 0;
  std::filesystem::path csv;
  Vector x_final;
  double final_rel_error = 0.0;  // ||x_K - x*|| / ||x*||
  /// max_k ||x_k - x_k^(first L)|| / ||x_k^(first L)|| against the run with
  /// the first entry of the layer list.
  double max_trajectory_gap = 0.0;
  /// First k with ||x_k - x*|| <= 1e-6 ||x*||, if reached.
  std::optional<long> hit_1e6;
};

struct EquivalenceStudyResult {
  std::vector<StudyRun> runs;
  std::map<std::string, double> spectral_norms;
  std::optional<Vector> x_ref_analysis;
  std::optional<Vector> x_ref_synthesis;
  /// ||x+ - x*|| / ||x*|| after one more outer iteration from each reference.
  std::map<std::string, double> reference_residuals;
  std::string config_hash;
};

/// Reference runs (reference_layers inner, reference_outer outer), then one
/// FB-PnP run per formulation and layer count, each written as a trace CSV
/// `<formulation>_L<layers>.csv` plus `manifest.json` in `out_dir`.
/// Runs execute on up to PROXPNP_THREADS threads; outputs do not depend on it.
EquivalenceStudyResult run_equivalence_study(const EquivalenceStudyConfig& cfg,
                                             const std::filesystem::path& out_dir);

struct DeblurStudyConfig {
  std::filesystem::path image;
  std::filesystem::path kernel;
  /// Kernel-list CSV for Gamma; finite differences when empty.
  std::filesystem::path dictionary;
  double epsilon = 0.05;
  std::uint64_t seed = 0;
  std::vector<double> lambdas = {1e-3, 3e-3, 1e-2, 3e-2, 1e-1};
  std::vector<int> layers = {1, 20};
  long max_outer = 300;
  double step_factor = 1.8;  // tau = step_factor / ||A||^2
  /// sigma = dual_step_factor / ||Gamma||^2. Below 1 the L = 1 runs, which
  /// coincide with the Loris-Verhoeven iteration, are covered by its bound.
  double dual_step_factor = 0.9;
  bool record_wall_time = false;
};

struct DeblurRun {
  double lambda = 0.0;
  int layers = 0;
  std::filesystem::path csv;
  std::vector<double> step_norms;  // ||x_{k+1} - x_k|| for k = 0..K-1
  double final_psnr = 0.0;
};

struct DeblurStudyResult {
  double observed_psnr = 0.0;
  std::vector<DeblurRun> runs;
  std::map<std::string, double> spectral_norms;
  std::string config_hash;
};

/// AD-PnP per (lambda, layers) on the deblurring fixture. CSV column dx_ref
/// holds the step norm ||x_k - x_{k-1}|| (empty at k = 0) and psnr is
/// measured against the clean image. Files: `deblur_lam<i>_L<layers>.csv`
/// (i indexes the lambda list), `observed.pgm`, `restored_lam<i>_L<layers>.pgm`
/// and `manifest.json`.
DeblurStudyResult run_deblur_study(const DeblurStudyConfig& cfg,
                                   const std::filesystem::path& out_dir);

/// Thread count for independent runs: PROXPNP_THREADS if set and positive,
/// else the hardware concurrency.
int study_threads();

}  // namespace proxpnp
