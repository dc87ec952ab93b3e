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

#include "cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "proxpnp/bilevel.hpp"
#include "proxpnp/denoisers.hpp"
#include "proxpnp/dictlearn.hpp"
#include "proxpnp/experiments.hpp"
#include "proxpnp/io.hpp"
#include "proxpnp/linops.hpp"
#include "proxpnp/prox.hpp"
#include "proxpnp/rng.hpp"
#include "proxpnp/solvers.hpp"
#include "proxpnp/trace.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace proxpnp::cli {
namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

class Log {
 public:
  Log(std::ostream& err, bool quiet) : err_(err), quiet_(quiet) {}
  template <class... Args>
  void operator()(const Args&... args) const {
    if (quiet_) return;
    ((err_ << args), ...);
    err_ << '\n';
  }

 private:
  std::ostream& err_;
  bool quiet_;
};

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_hash(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return hex64(fnv1a64(ss.str()));
}

void write_json_file(const json& j, const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + p.string());
}

// Typed access to a JSON object that rejects unknown or mistyped keys.
class Fields {
 public:
  Fields(const json& j, std::string where, fs::path base)
      : j_(j), where_(std::move(where)), base_(std::move(base)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be a JSON object");
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  template <class T>
  T get(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw ConfigError(where_ + ": missing key '" + key + "'");
    return convert<T>(key, j_.at(key));
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    used_.insert(key);
    if (!has(key)) return fallback;
    return convert<T>(key, j_.at(key));
  }

  template <class T>
  std::optional<T> maybe(const std::string& key) {
    used_.insert(key);
    if (!has(key)) return std::nullopt;
    return convert<T>(key, j_.at(key));
  }

  fs::path path(const std::string& key) { return resolve(get<std::string>(key)); }

  std::optional<fs::path> maybe_path(const std::string& key) {
    const auto s = maybe<std::string>(key);
    if (!s) return std::nullopt;
    return resolve(*s);
  }

  Fields object(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw ConfigError(where_ + ": missing key '" + key + "'");
    return Fields(j_.at(key), where_ + "." + key, base_);
  }

  /// Throws on any key that was never read.
  void finish() const {
    for (const auto& item : j_.items()) {
      if (!used_.count(item.key()))
        throw ConfigError(where_ + ": unknown key '" + item.key() + "'");
    }
  }

 private:
  template <class T>
  T convert(const std::string& key, const json& v) const {
    const std::string where = where_ + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where + " must be a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(where + " must be an integer");
      if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() &&
          v.get<long long>() < 0)
        throw ConfigError(where + " must be non-negative");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(where + " must be a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where + " must be a string");
    } else {
      if (!v.is_array()) throw ConfigError(where + " must be an array");
      for (const auto& e : v) {
        using E = typename T::value_type;
        if constexpr (std::is_integral_v<E>) {
          if (!e.is_number_integer()) throw ConfigError(where + " must hold integers");
        } else if constexpr (std::is_floating_point_v<E>) {
          if (!e.is_number()) throw ConfigError(where + " must hold numbers");
        } else {
          if (!e.is_string()) throw ConfigError(where + " must hold strings");
        }
      }
    }
    return v.get<T>();
  }

  fs::path resolve(const std::string& s) const {
    const fs::path p(s);
    return p.is_absolute() ? p : base_ / p;
  }

  const json& j_;
  std::string where_;
  fs::path base_;
  std::set<std::string> used_;
};

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
}

fs::path config_dir(const std::string& path) {
  const fs::path p = fs::absolute(path).parent_path();
  return p.empty() ? fs::current_path() : p;
}

fs::path prepare_out(const std::string& out) {
  const fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + out + ": " + ec.message());
  return dir;
}

DenoiserMode parse_mode(const std::string& s) {
  if (s == "analysis") return DenoiserMode::kAnalysis;
  if (s == "synthesis") return DenoiserMode::kSynthesis;
  throw ConfigError("formulation must be 'analysis' or 'synthesis', got '" + s + "'");
}

bool is_pgm(const fs::path& p) { return p.extension() == ".pgm"; }

// Dense matrix or filter bank, oriented as Gamma (analysis) or D (synthesis).
LinearOperator load_dictionary(const fs::path& path, const std::string& format,
                               DenoiserMode mode, Index rows, Index cols) {
  if (format == "dense") return LinearOperator::dense(read_matrix_csv(path));
  if (format == "filters") {
    if (rows <= 0 || cols <= 0)
      throw ConfigError("a filter-bank dictionary needs an image shape");
    return LinearOperator::filter_bank(read_kernel_list_csv(path), rows, cols,
                                       mode == DenoiserMode::kAnalysis
                                           ? FilterBankDirection::kAnalysis
                                           : FilterBankDirection::kSynthesis);
  }
  throw ConfigError("dictionary_format must be 'dense' or 'filters', got '" + format + "'");
}

// ---------------------------------------------------------------- denoise

int cmd_denoise(const Options& opt, std::ostream& out, const Log& log) {
  const json cfg = load_config(opt.config);
  Fields f(cfg, "denoise", config_dir(opt.config));
  const DenoiserMode mode = parse_mode(f.get<std::string>("formulation"));
  const fs::path dict_path = f.path("dictionary");
  const std::string format = f.get<std::string>("dictionary_format", "dense");
  const double lambda = f.get<double>("lambda");
  const int layers = f.get<int>("layers");
  const std::optional<double> step = f.maybe<double>("step");
  const fs::path input = f.path("input");
  const std::optional<std::vector<Index>> shape = f.maybe<std::vector<Index>>("shape");
  std::string output = f.get<std::string>("output", is_pgm(input) ? "denoised.pgm" : "denoised.csv");
  f.finish();
  if (layers < 1) throw ConfigError("layers must be positive");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");

  Vector v;
  Index rows = 0, cols = 0;
  if (is_pgm(input)) {
    const Matrix img = read_pgm(input);
    rows = img.rows();
    cols = img.cols();
    v = flatten(img);
  } else {
    v = read_vector_csv(input);
    if (shape) {
      if (shape->size() != 2) throw ConfigError("shape must be [rows, cols]");
      rows = (*shape)[0];
      cols = (*shape)[1];
    }
  }
  const LinearOperator op = load_dictionary(dict_path, format, mode, rows, cols);

  const fs::path dir = prepare_out(opt.out);
  DenoiseResult res;
  if (mode == DenoiserMode::kAnalysis) {
    AnalysisDenoiser d = AnalysisDenoiser::with_default_step(op, Regularizer::l1(), lambda, layers);
    if (step) d.sigma = *step;
    if (const auto w = d.step_warning()) log("warning: ", *w);
    res = ad_apply(d, WarmState::zeros(d.coef_dim()), v);
  } else {
    SynthesisDenoiser d = SynthesisDenoiser::with_default_step(op, Regularizer::l1(), lambda, layers);
    if (step) d.zeta = *step;
    if (const auto w = d.step_warning()) log("warning: ", *w);
    res = sd_apply(d, WarmState::zeros(d.coef_dim()), v);
  }
  if (!res.x.allFinite()) throw NumericalError("denoiser output is not finite");
  const fs::path out_path = dir / output;
  if (is_pgm(out_path)) {
    if (rows == 0) throw ConfigError("PGM output needs an image input or a shape");
    write_pgm(unflatten(res.x, rows, cols), out_path);
  } else {
    write_vector_csv(res.x, out_path);
  }
  log("denoised ", v.size(), " values with ", layers, " layers -> ", out_path.string());
  out << json{{"command", "denoise"},
              {"layers", layers},
              {"state_norm", res.state.vec.norm()},
              {"output", out_path.string()},
              {"output_fnv1a64", file_hash(out_path)}}
             .dump()
      << '\n';
  return kOk;
}

// ------------------------------------------------------------------ solve

struct SolveProblem {
  std::optional<ProblemInstance> inst;
  std::optional<LinearOperator> gamma;  // generated with the instance
  std::optional<LinearOperator> dict;
  std::optional<Vector> x_true;
};

SolveProblem load_problem(Fields f, const std::optional<std::uint64_t>& seed_override) {
  const std::string type = f.get<std::string>("type");
  SolveProblem p;
  if (type == "cs") {
    const Index n = f.get<Index>("n", 50), m = f.get<Index>("m", 20), s = f.get<Index>("s", 100);
    const std::uint64_t seed = seed_override.value_or(f.get<std::uint64_t>("seed", 0));
    f.finish();
    if (n < 1 || m < 1 || s < 1) throw ConfigError("cs dimensions must be positive");
    CsInstance cs = gen_cs_instance(n, m, s, seed);
    p.inst = std::move(cs.problem);
    p.gamma = std::move(cs.gamma_op);
    p.dict = std::move(cs.dict_op);
    p.x_true = p.inst->x_bar;
  } else if (type == "deblur") {
    const fs::path image = f.path("image");
    const fs::path kernel = f.path("kernel");
    const double eps = f.get<double>("epsilon", 0.05);
    const std::uint64_t seed = seed_override.value_or(f.get<std::uint64_t>("seed", 0));
    f.finish();
    p.inst = gen_deblur_instance(image, kernel, eps, seed);
    p.x_true = p.inst->x_bar;
  } else if (type == "files") {
    const Matrix a = read_matrix_csv(f.path("A"));
    const Vector y = read_vector_csv(f.path("y"));
    const auto truth = f.maybe_path("x_true");
    f.finish();
    check_length("problem y", a.rows(), y.size());
    p.inst = ProblemInstance{LinearOperator::dense(a), y, Vector(), 0.0, 0, 0, 0};
    if (truth) p.x_true = read_vector_csv(*truth);
  } else {
    throw ConfigError("problem.type must be 'cs', 'deblur' or 'files', got '" + type + "'");
  }
  return p;
}

double squared(double v) { return v * v; }

int cmd_solve(const Options& opt, std::ostream& out, const Log& log) {
  const json cfg = load_config(opt.config);
  Fields f(cfg, "solve", config_dir(opt.config));
  SolveProblem prob = load_problem(f.object("problem"), opt.seed);
  const std::string algorithm = f.get<std::string>("algorithm");
  const auto dict_path = f.maybe_path("dictionary");
  const std::string format = f.get<std::string>("dictionary_format", "dense");
  const double lambda = f.get<double>("lambda");
  const int layers = f.get<int>("layers", 1);
  const std::optional<double> tau_cfg = f.maybe<double>("tau");
  const double step_factor = f.get<double>("step_factor", 1.8);
  const std::optional<double> inner_cfg = f.maybe<double>("inner_step");
  const bool lv = algorithm == "loris_verhoeven";
  const double inner_factor = f.get<double>("inner_step_factor", lv ? 0.9 : 1.8);
  SolverConfig sc;
  sc.max_outer = f.get<long>("max_outer", 100);
  sc.stop_tol = f.get<double>("stop_tol", 0.0);
  sc.record_every = f.get<long>("record_every", 1);
  sc.warm_start = f.get<bool>("warm_start", true);
  const std::string x0_kind = f.get<std::string>("x0", "zeros");
  const bool wall = f.get<bool>("record_wall_time", false);
  f.finish();

  const bool analysis_side = algorithm == "fb_pnp_analysis" || lv;
  const bool synthesis_side = algorithm == "fb_pnp_synthesis" || algorithm == "fb_synthesis_direct";
  if (!analysis_side && !synthesis_side)
    throw ConfigError("unknown algorithm '" + algorithm + "'");
  const DenoiserMode mode = analysis_side ? DenoiserMode::kAnalysis : DenoiserMode::kSynthesis;
  const ProblemInstance& inst = *prob.inst;
  const Index n = inst.a.in_dim();

  LinearOperator op = LinearOperator::identity(1);
  if (dict_path) {
    op = load_dictionary(*dict_path, format, mode, inst.rows, inst.cols);
  } else if (analysis_side && prob.gamma) {
    op = *prob.gamma;
  } else if (synthesis_side && prob.dict) {
    op = *prob.dict;
  } else if (inst.rows > 0) {
    op = LinearOperator::filter_bank(finite_difference_filters(), inst.rows, inst.cols,
                                     analysis_side ? FilterBankDirection::kAnalysis
                                                   : FilterBankDirection::kSynthesis);
  } else {
    throw ConfigError("this problem needs a 'dictionary'");
  }

  const double tau = tau_cfg.value_or(step_factor / squared(inst.a.spectral_norm()));
  const double inner = inner_cfg.value_or(inner_factor / squared(op.spectral_norm()));
  sc.tau = tau;

  Vector x0 = Vector::Zero(n);
  if (x0_kind == "observation") {
    check_length("x0 = y", n, inst.y.size());
    x0 = inst.y;
  } else if (x0_kind != "zeros") {
    throw ConfigError("x0 must be 'zeros' or 'observation'");
  }

  TraceOptions topts;
  topts.x_true = prob.x_true;
  topts.record_wall_time = wall;
  if (prob.x_true) check_length("x_true", n, prob.x_true->size());
  const Index coef = analysis_side ? op.out_dim() : op.in_dim();
  SolverResult res;
  std::string step_name;
  if (algorithm == "fb_pnp_analysis") {
    const AnalysisDenoiser d{op, Regularizer::l1(), lambda, inner, layers};
    res = fb_pnp_analysis(inst.a, inst.y, d, sc, x0, WarmState::zeros(coef), topts);
    step_name = "sigma";
  } else if (lv) {
    res = loris_verhoeven(inst.a, inst.y, op, Regularizer::l1(), lambda, inner, sc, x0,
                          WarmState::zeros(coef), topts);
    step_name = "sigma";
  } else if (algorithm == "fb_pnp_synthesis") {
    const SynthesisDenoiser d{op, Regularizer::l1(), lambda, inner, layers};
    res = fb_pnp_synthesis(inst.a, inst.y, d, sc, x0, WarmState::zeros(coef), topts);
    step_name = "zeta";
  } else {
    // the outer step is the code step gamma; default tau * zeta
    SolverConfig direct = sc;
    direct.tau = tau_cfg ? *tau_cfg
                         : step_factor / squared(LinearOperator::compose(inst.a, op).spectral_norm());
    res = fb_synthesis_direct(inst.a, op, inst.y, Regularizer::l1(), lambda, direct,
                              WarmState::zeros(coef), topts);
    sc.tau = direct.tau;
    step_name = "unused";
  }
  if (!res.x.allFinite()) throw NumericalError("solver iterates became non-finite");

  const fs::path dir = prepare_out(opt.out);
  write_trace_csv(res.trace, dir / "trace.csv");
  write_vector_csv(res.x, dir / "x.csv");
  if (inst.rows > 0) write_pgm(unflatten(res.x, inst.rows, inst.cols), dir / "x.pgm");
  const json manifest{{"command", "solve"},
                      {"config", cfg},
                      {"config_hash", hex64(fnv1a64(cfg.dump()))},
                      {"spectral_norms", {{"A", inst.a.spectral_norm()}, {"dictionary", op.spectral_norm()}}},
                      {"steps", {{"tau", sc.tau}, {step_name, inner}}},
                      {"iterations", res.iterations}};
  write_json_file(manifest, dir / "manifest.json");
  const double objective = res.trace.records.empty() ? 0.0 : res.trace.records.back().objective;
  json summary{{"command", "solve"},
               {"algorithm", algorithm},
               {"iterations", res.iterations},
               {"objective", objective},
               {"trace", (dir / "trace.csv").string()},
               {"trace_fnv1a64", file_hash(dir / "trace.csv")}};
  if (prob.x_true) summary["psnr"] = psnr(res.x, *prob.x_true);
  log(algorithm, ": ", res.iterations, " iterations, objective ", objective);
  out << summary.dump() << '\n';
  return kOk;
}

// ------------------------------------------------------------------ train

int cmd_train(const Options& opt, std::ostream& out, const Log& log) {
  const json cfg = load_config(opt.config);
  Fields f(cfg, "train", config_dir(opt.config));
  const DenoiserMode mode = parse_mode(f.get<std::string>("mode"));
  const std::vector<std::string> image_names = f.get<std::vector<std::string>>("images");
  const Index patch = f.get<Index>("patch", 8);
  const int patches = f.get<int>("patches", 64);
  const double eps = f.get<double>("epsilon", 0.05);
  const std::uint64_t seed = opt.seed.value_or(f.get<std::uint64_t>("seed", 0));
  const int filters = f.get<int>("filters", 4);
  const Index kernel = f.get<Index>("kernel_size", 5);
  const double init_scale = f.get<double>("init_scale", 0.1);
  const auto initial = f.maybe_path("initial_dictionary");
  TrainConfig tc;
  tc.loss.lambda = f.get<double>("lambda");
  tc.loss.layers = f.get<int>("layers", 1);
  tc.loss.fixed_step = f.maybe<double>("fixed_step");
  tc.epochs = f.get<int>("epochs", 10);
  tc.learning_rate = f.get<double>("learning_rate");
  tc.batch = f.get<int>("batch", 16);
  tc.seed = seed;
  f.finish();
  if (image_names.empty()) throw ConfigError("train.images must list at least one image");

  std::vector<Matrix> images;
  const fs::path base = config_dir(opt.config);
  for (const std::string& name : image_names) {
    const fs::path p(name);
    images.push_back(read_pgm(p.is_absolute() ? p : base / p));
  }
  const std::vector<TrainingPair> data =
      make_noisy_pairs(sample_patches(images, patch, patches, seed), eps, seed);
  DictParams init = initial ? DictParams::from_filters(mode, read_kernel_list_csv(*initial), patch, patch)
                            : DictParams::random_filters(mode, filters, kernel, patch, patch, seed,
                                                         init_scale);
  const TrainResult res = train_dictionary(std::move(init), data, tc);

  const fs::path dir = prepare_out(opt.out);
  write_kernel_list_csv(res.dict.filters, dir / "dictionary.csv");
  {
    std::ofstream loss(dir / "loss.csv");
    if (!loss) throw IoError("cannot write loss.csv");
    loss << "epoch,loss\n";
    char buf[64];
    for (std::size_t e = 0; e < res.loss_history.size(); ++e) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e, res.loss_history[e]);
      loss << buf;
    }
  }
  write_json_file(json{{"command", "train"},
                       {"config", cfg},
                       {"config_hash", hex64(fnv1a64(cfg.dump()))},
                       {"seed", seed},
                       {"loss_history", res.loss_history}},
                  dir / "manifest.json");
  log("trained ", res.dict.filters.size(), " filters for ", tc.epochs, " epochs: loss ",
      res.loss_history.front(), " -> ", res.loss_history.back());
  out << json{{"command", "train"},
              {"epochs", tc.epochs},
              {"initial_loss", res.loss_history.front()},
              {"final_loss", res.loss_history.back()},
              {"dictionary", (dir / "dictionary.csv").string()},
              {"dictionary_fnv1a64", file_hash(dir / "dictionary.csv")}}
             .dump()
      << '\n';
  return kOk;
}

// ------------------------------------------------------------------ study

EquivalenceStudyConfig parse_equivalence(Fields& f, const std::optional<std::uint64_t>& seed) {
  EquivalenceStudyConfig c;
  c.n = f.get<Index>("n", c.n);
  c.m = f.get<Index>("m", c.m);
  c.s = f.get<Index>("s", c.s);
  c.seed = seed.value_or(f.get<std::uint64_t>("seed", c.seed));
  c.layers = f.get<std::vector<int>>("layers", c.layers);
  c.max_outer = f.get<long>("max_outer", c.max_outer);
  c.reference_layers = f.get<int>("reference_layers", c.reference_layers);
  c.reference_outer = f.get<long>("reference_outer", c.reference_outer);
  c.step_factor = f.get<double>("step_factor", c.step_factor);
  c.lambda_analysis = f.get<double>("lambda_analysis", c.lambda_analysis);
  c.lambda_synthesis = f.get<double>("lambda_synthesis", c.lambda_synthesis);
  c.run_analysis = f.get<bool>("run_analysis", c.run_analysis);
  c.run_synthesis = f.get<bool>("run_synthesis", c.run_synthesis);
  c.record_every = f.get<long>("record_every", c.record_every);
  c.record_wall_time = f.get<bool>("record_wall_time", c.record_wall_time);
  return c;
}

DeblurStudyConfig parse_deblur(Fields& f, const std::optional<std::uint64_t>& seed) {
  DeblurStudyConfig c;
  c.image = f.path("image");
  c.kernel = f.path("kernel");
  if (auto d = f.maybe_path("dictionary")) c.dictionary = *d;
  c.epsilon = f.get<double>("epsilon", c.epsilon);
  c.seed = seed.value_or(f.get<std::uint64_t>("seed", c.seed));
  c.lambdas = f.get<std::vector<double>>("lambdas", c.lambdas);
  c.layers = f.get<std::vector<int>>("layers", c.layers);
  c.max_outer = f.get<long>("max_outer", c.max_outer);
  c.step_factor = f.get<double>("step_factor", c.step_factor);
  c.dual_step_factor = f.get<double>("dual_step_factor", c.dual_step_factor);
  c.record_wall_time = f.get<bool>("record_wall_time", c.record_wall_time);
  return c;
}

int cmd_study(const Options& opt, std::ostream& out, const Log& log) {
  const json cfg = load_config(opt.config);
  Fields f(cfg, "study", config_dir(opt.config));
  const std::string kind = f.get<std::string>("study");
  const fs::path dir = prepare_out(opt.out);
  json summary{{"command", "study"}, {"study", kind}};
  if (kind == "equivalence") {
    const EquivalenceStudyConfig c = parse_equivalence(f, opt.seed);
    f.finish();
    log("equivalence study: N=", c.n, " M=", c.m, " S=", c.s, ", ", c.max_outer,
        " outer iterations");
    const EquivalenceStudyResult r = run_equivalence_study(c, dir);
    json runs = json::array();
    for (const StudyRun& run : r.runs) {
      runs.push_back({{"formulation", run.formulation},
                      {"layers", run.layers},
                      {"final_rel_error", run.final_rel_error},
                      {"max_trajectory_gap", run.max_trajectory_gap},
                      {"csv_fnv1a64", file_hash(run.csv)}});
    }
    summary["config_hash"] = r.config_hash;
    summary["runs"] = runs;
  } else if (kind == "deblur") {
    const DeblurStudyConfig c = parse_deblur(f, opt.seed);
    f.finish();
    log("deblur study: ", c.lambdas.size(), " lambdas x ", c.layers.size(), " layer counts");
    const DeblurStudyResult r = run_deblur_study(c, dir);
    json runs = json::array();
    for (const DeblurRun& run : r.runs) {
      runs.push_back({{"lambda", run.lambda},
                      {"layers", run.layers},
                      {"final_psnr", run.final_psnr},
                      {"csv_fnv1a64", file_hash(run.csv)}});
    }
    summary["config_hash"] = r.config_hash;
    summary["observed_psnr"] = r.observed_psnr;
    summary["runs"] = runs;
  } else {
    throw ConfigError("study must be 'equivalence' or 'deblur', got '" + kind + "'");
  }
  out << summary.dump() << '\n';
  return kOk;
}

// ------------------------------------------------------------------ check

struct CheckRow {
  std::string name;
  double error;
  double tolerance;
};

double dot_error(const LinearOperator& op, std::uint64_t seed) {
  Rng rng(seed, Stream::kSampling);
  const Vector x = rng.normal_vector(op.in_dim());
  const Vector y = rng.normal_vector(op.out_dim());
  const Vector ax = op.apply(x);
  return std::abs(ax.dot(y) - x.dot(op.apply_adjoint(y))) / (ax.norm() * y.norm());
}

std::vector<CheckRow> run_checks(const std::vector<Matrix>& filters, std::uint64_t seed,
                                 std::optional<double> tol) {
  std::vector<CheckRow> rows;
  auto add = [&](std::string name, double error, double default_tol) {
    rows.push_back({std::move(name), error, tol.value_or(default_tol)});
  };
  Rng rng(seed, Stream::kOperator);

  add("adjoint_dense", dot_error(LinearOperator::dense(rng.normal_matrix(20, 30)), seed), 1e-12);
  add("adjoint_conv2d",
      dot_error(LinearOperator::conv2d_circular(rng.normal_matrix(5, 5), 16, 12), seed), 1e-12);
  add("adjoint_filter_bank_analysis",
      dot_error(LinearOperator::filter_bank(filters, 16, 16, FilterBankDirection::kAnalysis), seed),
      1e-12);
  add("adjoint_filter_bank_synthesis",
      dot_error(LinearOperator::filter_bank(filters, 16, 16, FilterBankDirection::kSynthesis), seed),
      1e-12);

  // Moreau decomposition against the closed-form conjugate proxes; a scaled
  // indicator is still the indicator, so its conjugate prox is soft(v, r).
  double l1_err = 0.0, linf_err = 0.0;
  for (int t = 0; t < 200; ++t) {
    const Vector v = 3.0 * rng.normal_vector(16);
    const double gamma = 0.1 + rng.uniform01();
    l1_err = std::max(l1_err, (prox(Regularizer::l1(), gamma, v) + clip(v, gamma) - v)
                                  .lpNorm<Eigen::Infinity>());
    const double r = 0.1 + rng.uniform01();
    linf_err = std::max(linf_err, (prox(Regularizer::linf_ball(r), gamma, v) +
                                   soft_threshold(v, r) - v)
                                      .lpNorm<Eigen::Infinity>());
  }
  add("moreau_identity_l1", l1_err, 1e-14);
  add("moreau_identity_linf", linf_err, 1e-14);

  // Single-layer analysis PnP against Loris-Verhoeven, single-layer synthesis
  // PnP against ISTA on codes.
  const CsInstance cs = gen_cs_instance(50, 20, 100, seed);
  const LinearOperator& a = cs.problem.a;
  const Vector& y = cs.problem.y;
  const double tau = 1.8 / squared(a.spectral_norm());
  const double sigma = 0.9 / squared(cs.gamma_op.spectral_norm());
  {
    std::vector<Vector> xa, ua, xl, ul;
    TraceOptions o1, o2;
    o1.record_wall_time = o2.record_wall_time = false;
    o1.observer = [&](long, const Vector& x, const Vector& u) { xa.push_back(x); ua.push_back(u); };
    o2.observer = [&](long, const Vector& x, const Vector& u) { xl.push_back(x); ul.push_back(u); };
    const SolverConfig sc{tau, 200};
    fb_pnp_analysis(a, y, AnalysisDenoiser{cs.gamma_op, Regularizer::l1(), 0.005, sigma, 1}, sc,
                    Vector::Zero(50), WarmState::zeros(100), o1);
    loris_verhoeven(a, y, cs.gamma_op, Regularizer::l1(), 0.005, sigma, sc, Vector::Zero(50),
                    WarmState::zeros(100), o2);
    double err = 0.0;
    for (std::size_t k = 0; k < xa.size(); ++k) {
      const double scale = 1.0 + xa[k].lpNorm<Eigen::Infinity>();
      err = std::max({err, (xa[k] - xl[k]).lpNorm<Eigen::Infinity>() / scale,
                      (ua[k] - tau * ul[k]).lpNorm<Eigen::Infinity>() / scale});
    }
    add("analysis_pnp_equals_loris_verhoeven", err, 1e-10);
  }
  {
    const double zeta = 1.8 / squared(cs.dict_op.spectral_norm());
    std::vector<Vector> za, zb;
    TraceOptions o1, o2;
    o1.record_wall_time = o2.record_wall_time = false;
    o1.observer = [&](long, const Vector&, const Vector& z) { za.push_back(z); };
    o2.observer = [&](long, const Vector&, const Vector& z) { zb.push_back(z); };
    fb_pnp_synthesis(a, y, SynthesisDenoiser{cs.dict_op, Regularizer::l1(), 80.0, zeta, 1},
                     SolverConfig{tau, 200}, Vector::Zero(50), WarmState::zeros(100), o1);
    fb_synthesis_direct(a, cs.dict_op, y, Regularizer::l1(), 80.0, SolverConfig{tau * zeta, 200},
                        WarmState::zeros(100), o2);
    double err = 0.0;
    for (std::size_t k = 0; k < za.size(); ++k)
      err = std::max(err, (za[k] - zb[k]).lpNorm<Eigen::Infinity>() /
                              (1.0 + za[k].lpNorm<Eigen::Infinity>()));
    add("synthesis_pnp_equals_ista", err, 1e-10);
  }

  // Envelope gradient against central differences.
  {
    double worst = 0.0;
    const double lambda = 0.7, mu = 1.3, h = 1e-6;
    for (int t = 0; t < 20; ++t) {
      const Vector x = 2.0 * rng.normal_vector(6);
      const Vector g = moreau_envelope_grad(Regularizer::l1(), lambda, mu, x);
      for (Index i = 0; i < x.size(); ++i) {
        // stay away from the two kinks of the Huber function
        if (std::abs(std::abs(x[i]) - lambda / mu) < 1e-3) continue;
        Vector xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const double fd = (moreau_envelope_value(Regularizer::l1(), lambda, mu, xp) -
                           moreau_envelope_value(Regularizer::l1(), lambda, mu, xm)) /
                          (2 * h);
        worst = std::max(worst, std::abs(fd - g[i]) / std::max(std::abs(g[i]), 1e-8));
      }
    }
    add("envelope_gradient_finite_differences", worst, 1e-6);
  }
  return rows;
}

int cmd_check(const Options& opt, std::ostream& out, const Log& log) {
  std::optional<double> tol;
  std::vector<Matrix> filters = finite_difference_filters();
  std::uint64_t seed = opt.seed.value_or(0);
  if (!opt.config.empty()) {
    const json cfg = load_config(opt.config);
    Fields f(cfg, "check", config_dir(opt.config));
    tol = f.maybe<double>("tolerance");
    if (auto d = f.maybe_path("dictionary")) filters = read_kernel_list_csv(*d);
    if (!opt.seed) seed = f.get<std::uint64_t>("seed", 0);
    f.finish();
    if (tol && !(*tol >= 0.0)) throw ConfigError("tolerance must be non-negative");
  }
  const std::vector<CheckRow> rows = run_checks(filters, seed, tol);
  json checks = json::array();
  int failed = 0;
  for (const CheckRow& r : rows) {
    const bool pass = r.error <= r.tolerance;
    failed += pass ? 0 : 1;
    char line[160];
    std::snprintf(line, sizeof line, "%-40s %-4s error %.3e  tol %.1e", r.name.c_str(),
                  pass ? "PASS" : "FAIL", r.error, r.tolerance);
    log(line);
    checks.push_back({{"name", r.name}, {"error", r.error}, {"tolerance", r.tolerance}, {"pass", pass}});
  }
  out << json{{"command", "check"},
              {"passed", static_cast<int>(rows.size()) - failed},
              {"failed", failed},
              {"checks", checks}}
             .dump()
      << '\n';
  if (!opt.out.empty()) {
    const fs::path dir = prepare_out(opt.out);
    write_json_file(json{{"checks", checks}}, dir / "check.json");
  }
  return failed ? kCheckFailed : kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unrolled analysis/synthesis denoisers and plug-and-play solvers", "proxpnp"};
  app.require_subcommand(1);
  Options opt;
  std::uint64_t seed = 0;
  app.add_flag("--quiet", opt.quiet, "Suppress log messages on stderr");

  struct Sub {
    const char* name;
    const char* help;
    bool needs_config;
    std::function<int(const Options&, std::ostream&, const Log&)> fn;
  };
  const std::vector<Sub> subs = {
      {"denoise", "Apply an unrolled denoiser to a vector or image", true, cmd_denoise},
      {"solve", "Run an FB-PnP or reference solver", true, cmd_solve},
      {"train", "Train a filter-bank dictionary through the unrolled denoiser", true, cmd_train},
      {"study", "Run the equivalence or deblurring study", true, cmd_study},
      {"check", "Run the built-in self-test table", false, cmd_check},
  };
  std::vector<CLI::App*> apps;
  for (const Sub& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    auto* c = sub->add_option("--config", opt.config, "JSON config file");
    if (s.needs_config) c->required();
    auto* o = sub->add_option("--out", opt.out, "Output directory");
    if (s.needs_config) o->required();
    sub->add_option("--seed", seed, "Override the config seed");
    sub->add_flag("--quiet", opt.quiet, "Suppress log messages on stderr");
    apps.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
  for (CLI::App* sub : apps) {
    if (sub->parsed() && sub->count("--seed")) opt.seed = seed;
  }

  const Log log(err, opt.quiet);
  try {
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (apps[i]->parsed()) return subs[i].fn(opt, out, log);
    }
    return kConfigError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DimensionError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIoError;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kNumericalError;
  }
}

}  // namespace proxpnp::cli
