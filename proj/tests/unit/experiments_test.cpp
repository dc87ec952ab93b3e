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

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "proxpnp/experiments.hpp"
#include "proxpnp/io.hpp"
#include "proxpnp/rng.hpp"
#include "proxpnp/trace.hpp"

namespace fs = std::filesystem;

namespace proxpnp {
namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("proxpnp_exp_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Matrix dense_of(const LinearOperator& op) {
  Matrix m(op.out_dim(), op.in_dim());
  for (Index j = 0; j < op.in_dim(); ++j) m.col(j) = op.apply(Vector::Unit(op.in_dim(), j));
  return m;
}

EquivalenceStudyConfig small_study() {
  EquivalenceStudyConfig cfg;
  cfg.n = 10;
  cfg.m = 6;
  cfg.s = 15;
  cfg.seed = 3;
  cfg.layers = {1, 5};
  cfg.max_outer = 60;
  cfg.reference_layers = 200;
  cfg.reference_outer = 40000;
  cfg.lambda_analysis = 0.01;
  cfg.lambda_synthesis = 0.5;
  cfg.step_factor = 1.2;  // keeps tau * zeta below 2 / ||AD||^2 for L = 1
  return cfg;
}

TEST(GenCsInstance, ShapesAndNoiselessData) {
  const CsInstance cs = gen_cs_instance(50, 20, 100, 0);
  EXPECT_EQ(cs.problem.a.out_dim(), 20);
  EXPECT_EQ(cs.problem.a.in_dim(), 50);
  EXPECT_EQ(cs.gamma_op.out_dim(), 100);
  EXPECT_EQ(cs.gamma_op.in_dim(), 50);
  EXPECT_EQ(cs.dict_op.out_dim(), 50);
  EXPECT_EQ(cs.dict_op.in_dim(), 100);
  EXPECT_EQ(cs.problem.y, cs.problem.a.apply(cs.problem.x_bar));
  EXPECT_GE(cs.problem.x_bar.minCoeff(), 0.0);
  EXPECT_LT(cs.problem.x_bar.maxCoeff(), 1.0);
}

TEST(GenCsInstance, SeedDeterminism) {
  const CsInstance a = gen_cs_instance(12, 5, 20, 7);
  const CsInstance b = gen_cs_instance(12, 5, 20, 7);
  const CsInstance c = gen_cs_instance(12, 5, 20, 8);
  EXPECT_EQ(a.problem.y, b.problem.y);
  EXPECT_EQ(dense_of(a.gamma_op), dense_of(b.gamma_op));
  EXPECT_EQ(dense_of(a.dict_op), dense_of(b.dict_op));
  EXPECT_NE(a.problem.y, c.problem.y);
}

TEST(GenDeblurInstance, DeltaKernelNoNoise) {
  const Matrix img = Rng(1).normal_matrix(7, 9).cwiseAbs();
  const ProblemInstance p = gen_deblur_instance(img, Matrix::Ones(1, 1), 0.0, 0);
  EXPECT_EQ(p.y, flatten(img));
  EXPECT_EQ(p.rows, 7);
  EXPECT_EQ(p.cols, 9);
}

TEST(GenDeblurInstance, BoxKernelPreservesConstants) {
  const ProblemInstance p =
      gen_deblur_instance(Matrix::Constant(6, 6, 0.4), Matrix::Constant(3, 3, 1.0 / 9), 0.0, 0);
  EXPECT_LE((p.y.array() - 0.4).abs().maxCoeff(), 1e-15);
}

TEST(GenDeblurInstance, NoiseLevelMatches) {
  const Matrix img = Matrix::Constant(128, 128, 0.5);
  const ProblemInstance p = gen_deblur_instance(img, Matrix::Ones(1, 1), 0.05, 11);
  const Vector w = p.y - p.a.apply(p.x_bar);
  const double mean = w.mean();
  const double sd = std::sqrt((w.array() - mean).square().sum() / (w.size() - 1));
  EXPECT_GE(w.size(), 10000);
  EXPECT_NEAR(sd, 0.05, 0.05 * 0.05);
}

TEST(GenDeblurInstance, RejectsEvenKernelsAndMissingFiles) {
  EXPECT_THROW(gen_deblur_instance(Matrix::Zero(4, 4), Matrix::Ones(2, 2), 0.0, 0), ConfigError);
  EXPECT_THROW(gen_deblur_instance(fs::path("/nonexistent.pgm"), fs::path("/nonexistent.csv"), 0.0, 0),
               IoError);
}

TEST(GenDeblurInstance, BundledKernelSumsToOne) {
  const Matrix k = read_matrix_csv(fs::path(PROXPNP_DATA_DIR) / "motion9.csv");
  EXPECT_EQ(k.rows(), 9);
  EXPECT_EQ(k.cols(), 9);
  EXPECT_NEAR(k.sum(), 1.0, 1e-12);
  EXPECT_GE(k.minCoeff(), 0.0);
}

TEST(FiniteDifferenceFilters, MatchBundledDictionary) {
  const auto bundled = read_kernel_list_csv(fs::path(PROXPNP_DATA_DIR) / "tv_filters.csv");
  const auto fd = finite_difference_filters();
  ASSERT_EQ(bundled.size(), fd.size());
  for (std::size_t i = 0; i < fd.size(); ++i) EXPECT_EQ(bundled[i], fd[i]);
}

TEST(EquivalenceStudy, WritesTracesAndManifest) {
  const fs::path dir = temp_dir("eq");
  const EquivalenceStudyResult r = run_equivalence_study(small_study(), dir);
  ASSERT_EQ(r.runs.size(), 4u);
  for (const StudyRun& run : r.runs) {
    ASSERT_TRUE(fs::exists(run.csv));
    const SolverTrace t = read_trace_csv(run.csv);
    EXPECT_EQ(t.records.size(), 61u);
    EXPECT_TRUE(t.records.back().dx_ref.has_value());
    EXPECT_FALSE(t.records.back().wall_s.has_value());
  }
  EXPECT_TRUE(fs::exists(dir / "analysis_L1.csv"));
  EXPECT_TRUE(fs::exists(dir / "synthesis_L5.csv"));
  std::ifstream in(dir / "manifest.json");
  const nlohmann::json m = nlohmann::json::parse(in);
  EXPECT_EQ(m["config_hash"], r.config_hash);
  EXPECT_EQ(m["runs"].size(), 4u);
  EXPECT_TRUE(m["spectral_norms"].contains("AD"));
  EXPECT_LE(r.reference_residuals.at("analysis"), 1e-8);
  EXPECT_LE(r.reference_residuals.at("synthesis"), 1e-8);
}

TEST(EquivalenceStudy, ZeroIterationsWritesHeaderOnly) {
  const fs::path dir = temp_dir("eq0");
  EquivalenceStudyConfig cfg = small_study();
  cfg.max_outer = 0;
  const EquivalenceStudyResult r = run_equivalence_study(cfg, dir);
  for (const StudyRun& run : r.runs)
    EXPECT_EQ(slurp(run.csv), "k,dx_ref,dcoef_ref,objective,psnr,wall_s\n");
}

TEST(EquivalenceStudy, ByteIdenticalAcrossRunsAndThreadCounts) {
  const fs::path a = temp_dir("eqa");
  const fs::path b = temp_dir("eqb");
  run_equivalence_study(small_study(), a);
  ::setenv("PROXPNP_THREADS", "1", 1);
  run_equivalence_study(small_study(), b);
  ::unsetenv("PROXPNP_THREADS");
  for (const auto& entry : fs::directory_iterator(a))
    EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename())) << entry.path();
}

TEST(EquivalenceStudy, SynthesisSingleLayerReachesBallLater) {
  const fs::path dir = temp_dir("eqhit");
  EquivalenceStudyConfig cfg = small_study();
  cfg.run_analysis = false;
  cfg.layers = {1, 20};
  cfg.max_outer = 40000;
  cfg.record_every = 1000;
  const EquivalenceStudyResult r = run_equivalence_study(cfg, dir);
  ASSERT_TRUE(r.runs[0].hit_1e6 && r.runs[1].hit_1e6);
  EXPECT_GT(*r.runs[0].hit_1e6, *r.runs[1].hit_1e6);
}

TEST(EquivalenceStudy, RejectsBadConfig) {
  EquivalenceStudyConfig cfg = small_study();
  cfg.step_factor = 2.0;
  EXPECT_THROW(run_equivalence_study(cfg, temp_dir("bad")), ConfigError);
  cfg = small_study();
  cfg.layers = {0};
  EXPECT_THROW(run_equivalence_study(cfg, temp_dir("bad")), ConfigError);
}

TEST(DeblurStudy, WritesTracesImagesAndManifest) {
  const fs::path dir = temp_dir("deblur");
  DeblurStudyConfig cfg;
  cfg.image = fs::path(PROXPNP_DATA_DIR) / "cameraman64.pgm";
  cfg.kernel = fs::path(PROXPNP_DATA_DIR) / "motion9.csv";
  cfg.lambdas = {1e-2};
  cfg.layers = {1, 3};
  cfg.max_outer = 30;
  const DeblurStudyResult r = run_deblur_study(cfg, dir);
  ASSERT_EQ(r.runs.size(), 2u);
  EXPECT_TRUE(fs::exists(dir / "observed.pgm"));
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  for (const DeblurRun& run : r.runs) {
    EXPECT_EQ(run.step_norms.size(), 30u);
    const SolverTrace t = read_trace_csv(run.csv);
    EXPECT_EQ(t.records.size(), 31u);
    EXPECT_FALSE(t.records.front().dx_ref.has_value());
    EXPECT_EQ(*t.records[5].dx_ref, run.step_norms[4]);
    EXPECT_EQ(*t.records.back().psnr, run.final_psnr);
    EXPECT_GT(run.final_psnr, r.observed_psnr);
  }
  EXPECT_TRUE(fs::exists(dir / "restored_lam0_L3.pgm"));
}

}  // namespace
}  // namespace proxpnp
