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

#include "proxpnp/experiments.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "proxpnp/denoisers.hpp"
#include "proxpnp/io.hpp"
#include "proxpnp/rng.hpp"

namespace proxpnp {

namespace {

using nlohmann::json;

// Runs body(0..count-1) on up to study_threads() workers and rethrows the
// first failure.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  const std::size_t workers =
      std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, study_threads())));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

double step_for(double factor, const LinearOperator& op) {
  const double n = op.spectral_norm();
  if (!(n > 0.0)) throw NumericalError("operator with zero spectral norm");
  return factor / (n * n);
}

json to_json(const EquivalenceStudyConfig& c) {
  return json{{"n", c.n},
              {"m", c.m},
              {"s", c.s},
              {"seed", c.seed},
              {"layers", c.layers},
              {"max_outer", c.max_outer},
              {"reference_layers", c.reference_layers},
              {"reference_outer", c.reference_outer},
              {"step_factor", c.step_factor},
              {"lambda_analysis", c.lambda_analysis},
              {"lambda_synthesis", c.lambda_synthesis},
              {"run_analysis", c.run_analysis},
              {"run_synthesis", c.run_synthesis},
              {"record_every", c.record_every},
              {"record_wall_time", c.record_wall_time}};
}

json to_json(const DeblurStudyConfig& c) {
  return json{{"image", c.image.generic_string()},
              {"kernel", c.kernel.generic_string()},
              {"dictionary", c.dictionary.generic_string()},
              {"epsilon", c.epsilon},
              {"seed", c.seed},
              {"lambdas", c.lambdas},
              {"layers", c.layers},
              {"max_outer", c.max_outer},
              {"step_factor", c.step_factor},
              {"dual_step_factor", c.dual_step_factor},
              {"record_wall_time", c.record_wall_time}};
}

std::string config_hash(const json& config) { return hex64(fnv1a64(config.dump())); }

void validate(const EquivalenceStudyConfig& c) {
  if (c.n < 1 || c.m < 1 || c.s < 1) throw ConfigError("study dimensions must be positive");
  if (c.layers.empty()) throw ConfigError("study needs at least one layer count");
  for (int l : c.layers)
    if (l < 1) throw ConfigError("layer counts must be positive");
  if (c.max_outer < 0 || c.reference_outer < 0) throw ConfigError("iteration counts must be >= 0");
  if (c.reference_layers < 1) throw ConfigError("reference_layers must be positive");
  if (!(c.step_factor > 0.0 && c.step_factor < 2.0))
    throw ConfigError("step_factor must lie in (0, 2)");
  if (!(c.lambda_analysis > 0.0) || !(c.lambda_synthesis > 0.0))
    throw ConfigError("study lambdas must be positive");
  if (c.record_every < 1) throw ConfigError("record_every must be positive");
}

struct FamilyJob {
  bool analysis = true;
  int layers = 0;
};

}  // namespace

int study_threads() {
  if (const char* env = std::getenv("PROXPNP_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(std::min(v, 1024L));
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

CsInstance gen_cs_instance(Index n, Index m, Index s, std::uint64_t seed) {
  if (n < 1 || m < 1 || s < 1) throw ConfigError("instance dimensions must be positive");
  Rng signal(seed, Stream::kSignal);
  Rng op(seed, Stream::kOperator);
  Rng analysis(seed, Stream::kAnalysisDictionary);
  Rng synthesis(seed, Stream::kSynthesisDictionary);
  ProblemInstance p{LinearOperator::dense(op.normal_matrix(m, n)), Vector(), Vector(), 0.0, seed};
  p.x_bar = signal.uniform_vector(n);
  p.y = p.a.apply(p.x_bar);
  return CsInstance{std::move(p), LinearOperator::dense(analysis.normal_matrix(s, n)),
                    LinearOperator::dense(synthesis.normal_matrix(n, s))};
}

ProblemInstance gen_deblur_instance(const Matrix& image, const Matrix& kernel, double epsilon,
                                    std::uint64_t seed) {
  if (kernel.rows() % 2 == 0 || kernel.cols() % 2 == 0)
    throw ConfigError("blur kernel must have odd sides");
  if (!(epsilon >= 0.0)) throw ConfigError("noise level must be non-negative");
  if (image.rows() < kernel.rows() || image.cols() < kernel.cols())
    throw DimensionError("image smaller than the blur kernel");
  ProblemInstance p{LinearOperator::conv2d_circular(kernel, image.rows(), image.cols()),
                    Vector(), flatten(image), epsilon, seed, image.rows(), image.cols()};
  p.y = p.a.apply(p.x_bar);
  if (epsilon > 0.0) {
    Rng noise(seed, Stream::kNoise);
    p.y += epsilon * noise.normal_vector(p.y.size());
  }
  return p;
}

ProblemInstance gen_deblur_instance(const std::filesystem::path& image,
                                    const std::filesystem::path& kernel, double epsilon,
                                    std::uint64_t seed) {
  return gen_deblur_instance(read_pgm(image), read_matrix_csv(kernel), epsilon, seed);
}

std::vector<Matrix> finite_difference_filters() {
  Matrix h = Matrix::Zero(3, 3);
  Matrix v = Matrix::Zero(3, 3);
  h(1, 1) = 1.0;
  h(1, 0) = -1.0;  // (h * x)[i, j] = x[i, j] - x[i, j + 1]
  v(1, 1) = 1.0;
  v(0, 1) = -1.0;  // (v * x)[i, j] = x[i, j] - x[i + 1, j]
  return {h, v};
}

EquivalenceStudyResult run_equivalence_study(const EquivalenceStudyConfig& cfg,
                                             const std::filesystem::path& out_dir) {
  validate(cfg);
  ensure_dir(out_dir);
  const json config = to_json(cfg);
  EquivalenceStudyResult result;
  result.config_hash = config_hash(config);

  const CsInstance inst = gen_cs_instance(cfg.n, cfg.m, cfg.s, cfg.seed);
  const ProblemInstance& p = inst.problem;
  result.spectral_norms["A"] = p.a.spectral_norm();
  result.spectral_norms["Gamma"] = inst.gamma_op.spectral_norm();
  result.spectral_norms["D"] = inst.dict_op.spectral_norm();
  result.spectral_norms["AD"] = LinearOperator::compose(p.a, inst.dict_op).spectral_norm();
  const double tau = step_for(cfg.step_factor, p.a);
  const double sigma = step_for(cfg.step_factor, inst.gamma_op);
  const double zeta = step_for(cfg.step_factor, inst.dict_op);
  const AnalysisDenoiser ad{inst.gamma_op, Regularizer::l1(), cfg.lambda_analysis, sigma, 1};
  const SynthesisDenoiser sd{inst.dict_op, Regularizer::l1(), cfg.lambda_synthesis, zeta, 1};

  std::vector<FamilyJob> jobs;
  for (bool analysis : {true, false}) {
    if (analysis ? !cfg.run_analysis : !cfg.run_synthesis) continue;
    for (int l : cfg.layers) jobs.push_back({analysis, l});
  }

  const Vector x0 = Vector::Zero(cfg.n);
  const auto solve_from = [&](bool analysis, int layers, long outer, const TraceOptions& opts,
                              const Vector& x_start, const WarmState& state) {
    SolverConfig sc{tau, outer, true, 0.0, cfg.record_every};
    if (analysis)
      return fb_pnp_analysis(p.a, p.y, ad.with_layers(layers), sc, x_start, state, opts);
    return fb_pnp_synthesis(p.a, p.y, sd.with_layers(layers), sc, x_start, state, opts);
  };
  const auto solve = [&](bool analysis, int layers, long outer, const TraceOptions& opts) {
    return solve_from(analysis, layers, outer, opts, x0, WarmState::zeros(cfg.s));
  };

  // References, one per formulation in use.
  std::vector<bool> families;
  if (cfg.run_analysis) families.push_back(true);
  if (cfg.run_synthesis) families.push_back(false);
  std::vector<std::optional<SolverResult>> refs(families.size());
  if (cfg.max_outer > 0) {
    parallel_for(families.size(), [&](std::size_t i) {
      TraceOptions opts;
      opts.record_wall_time = false;
      refs[i] = solve(families[i], cfg.reference_layers, cfg.reference_outer, opts);
    });
  }
  const SolverResult* ref_a = nullptr;
  const SolverResult* ref_s = nullptr;
  for (std::size_t i = 0; i < families.size(); ++i) {
    if (!refs[i]) continue;
    (families[i] ? ref_a : ref_s) = &*refs[i];
  }
  if (ref_a) result.x_ref_analysis = ref_a->x;
  if (ref_s) result.x_ref_synthesis = ref_s->x;
  // A valid reference is (numerically) fixed under one more outer iteration.
  for (std::size_t i = 0; i < families.size(); ++i) {
    if (!refs[i]) continue;
    TraceOptions opts;
    opts.record_wall_time = false;
    const Vector next =
        solve_from(families[i], cfg.reference_layers, 1, opts, refs[i]->x, refs[i]->state).x;
    result.reference_residuals[families[i] ? "analysis" : "synthesis"] =
        (next - refs[i]->x).norm() / std::max(refs[i]->x.norm(), 1e-300);
  }

  result.runs.resize(jobs.size());
  std::vector<std::vector<Vector>> trajectories(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t j) {
    const FamilyJob& job = jobs[j];
    StudyRun& run = result.runs[j];
    run.formulation = job.analysis ? "analysis" : "synthesis";
    run.layers = job.layers;
    run.csv = out_dir / (run.formulation + "_L" + std::to_string(job.layers) + ".csv");
    if (cfg.max_outer == 0) {
      write_trace_csv(SolverTrace{}, run.csv);
      run.x_final = x0;
      return;
    }
    const SolverResult* ref = job.analysis ? ref_a : ref_s;
    const double ref_norm = ref->x.norm();
    TraceOptions opts;
    opts.x_ref = ref->x;
    opts.coef_ref = ref->state.vec;
    opts.record_wall_time = cfg.record_wall_time;
    std::vector<Vector>& traj = trajectories[j];
    traj.reserve(static_cast<std::size_t>(cfg.max_outer) + 1);
    opts.observer = [&](long k, const Vector& x, const Vector&) {
      traj.push_back(x);
      if (!run.hit_1e6 && (x - ref->x).norm() <= 1e-6 * ref_norm) run.hit_1e6 = k;
    };
    SolverResult out = solve(job.analysis, job.layers, cfg.max_outer, opts);
    write_trace_csv(out.trace, run.csv);
    run.final_rel_error = (out.x - ref->x).norm() / ref_norm;
    run.x_final = std::move(out.x);
  });

  // Trajectory gaps against the first layer count of the same formulation.
  for (std::size_t j = 0; j < jobs.size() && cfg.max_outer > 0; ++j) {
    std::size_t base = j;
    for (std::size_t i = 0; i < j; ++i) {
      if (jobs[i].analysis == jobs[j].analysis) {
        base = i;
        break;
      }
    }
    double gap = 0.0;
    const auto& a = trajectories[base];
    const auto& b = trajectories[j];
    for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k) {
      const double denom = a[k].norm();
      if (denom > 0.0) gap = std::max(gap, (b[k] - a[k]).norm() / denom);
    }
    result.runs[j].max_trajectory_gap = gap;
  }

  json runs = json::array();
  for (const StudyRun& r : result.runs) {
    json jr{{"file", r.csv.filename().string()},
            {"formulation", r.formulation},
            {"layers", r.layers},
            {"final_rel_error", r.final_rel_error},
            {"max_trajectory_gap", r.max_trajectory_gap}};
    jr["first_k_within_1e-6"] = r.hit_1e6 ? json(*r.hit_1e6) : json(nullptr);
    runs.push_back(jr);
  }
  json manifest{{"study", "equivalence"},
                {"config", config},
                {"config_hash", result.config_hash},
                {"spectral_norms", result.spectral_norms},
                {"steps", {{"tau", tau}, {"sigma", sigma}, {"zeta", zeta}}},
                {"reference_fixed_point_residual", result.reference_residuals},
                {"runs", runs}};
  write_json(manifest, out_dir / "manifest.json");
  return result;
}

DeblurStudyResult run_deblur_study(const DeblurStudyConfig& cfg,
                                   const std::filesystem::path& out_dir) {
  if (cfg.lambdas.empty() || cfg.layers.empty())
    throw ConfigError("deblur study needs lambdas and layer counts");
  for (double lam : cfg.lambdas)
    if (!(lam > 0.0)) throw ConfigError("deblur lambdas must be positive");
  for (int l : cfg.layers)
    if (l < 1) throw ConfigError("layer counts must be positive");
  if (cfg.max_outer < 0) throw ConfigError("max_outer must be non-negative");
  if (!(cfg.step_factor > 0.0 && cfg.step_factor < 2.0))
    throw ConfigError("step_factor must lie in (0, 2)");
  if (!(cfg.dual_step_factor > 0.0 && cfg.dual_step_factor < 2.0))
    throw ConfigError("dual_step_factor must lie in (0, 2)");
  ensure_dir(out_dir);
  const json config = to_json(cfg);
  DeblurStudyResult result;
  result.config_hash = config_hash(config);

  const ProblemInstance inst = gen_deblur_instance(cfg.image, cfg.kernel, cfg.epsilon, cfg.seed);
  std::vector<Matrix> filters =
      cfg.dictionary.empty() ? finite_difference_filters() : read_kernel_list_csv(cfg.dictionary);
  const LinearOperator gamma = LinearOperator::filter_bank(std::move(filters), inst.rows, inst.cols,
                                                           FilterBankDirection::kAnalysis);
  result.spectral_norms["A"] = inst.a.spectral_norm();
  result.spectral_norms["Gamma"] = gamma.spectral_norm();
  const double tau = step_for(cfg.step_factor, inst.a);
  const double sigma = step_for(cfg.dual_step_factor, gamma);
  result.observed_psnr = psnr(inst.y, inst.x_bar);
  write_pgm(unflatten(inst.y, inst.rows, inst.cols), out_dir / "observed.pgm");

  struct Job {
    std::size_t lambda_index;
    int layers;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < cfg.lambdas.size(); ++i)
    for (int l : cfg.layers) jobs.push_back({i, l});
  result.runs.resize(jobs.size());

  parallel_for(jobs.size(), [&](std::size_t j) {
    const Job& job = jobs[j];
    DeblurRun& run = result.runs[j];
    run.lambda = cfg.lambdas[job.lambda_index];
    run.layers = job.layers;
    const std::string stem =
        "lam" + std::to_string(job.lambda_index) + "_L" + std::to_string(job.layers);
    run.csv = out_dir / ("deblur_" + stem + ".csv");
    const AnalysisDenoiser d{gamma, Regularizer::l1(), run.lambda, sigma, job.layers};
    TraceOptions opts;
    opts.x_true = inst.x_bar;
    opts.record_wall_time = cfg.record_wall_time;
    Vector prev;
    opts.observer = [&](long k, const Vector& x, const Vector&) {
      if (k > 0) run.step_norms.push_back((x - prev).norm());
      prev = x;
    };
    SolverResult out = fb_pnp_analysis(inst.a, inst.y, d, SolverConfig{tau, cfg.max_outer},
                                       inst.y, WarmState::zeros(gamma.out_dim()), opts);
    for (TraceRecord& rec : out.trace.records) {
      rec.dx_ref.reset();
      if (rec.k > 0) rec.dx_ref = run.step_norms[static_cast<std::size_t>(rec.k - 1)];
    }
    write_trace_csv(out.trace, run.csv);
    run.final_psnr = psnr(out.x, inst.x_bar);
    write_pgm(unflatten(out.x, inst.rows, inst.cols), out_dir / ("restored_" + stem + ".pgm"));
  });

  json runs = json::array();
  for (const DeblurRun& r : result.runs) {
    runs.push_back({{"file", r.csv.filename().string()},
                    {"lambda", r.lambda},
                    {"layers", r.layers},
                    {"final_psnr", r.final_psnr}});
  }
  json manifest{{"study", "deblur"},
                {"config", config},
                {"config_hash", result.config_hash},
                {"spectral_norms", result.spectral_norms},
                {"steps", {{"tau", tau}, {"sigma", sigma}}},
                {"observed_psnr", result.observed_psnr},
                {"kernel_note",
                 "synthetic 9x9 linear motion kernel at 30 degrees, normalised to sum 1"},
                {"runs", runs}};
  write_json(manifest, out_dir / "manifest.json");
  return result;
}

}  // namespace proxpnp
