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

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "proxpnp/types.hpp"

namespace proxpnp {

struct TraceRecord {
  long k = 0;
  std::optional<double> dx_ref;
  std::optional<double> dcoef_ref;
  double objective = 0.0;
  std::optional<double> psnr;
  std::optional<double> wall_s;
};

/// Per-outer-iteration records of one solver run, k strictly increasing.
struct SolverTrace {
  std::vector<TraceRecord> records;
};

/// Header `k,dx_ref,dcoef_ref,objective,psnr,wall_s`; absent values are
/// written as empty fields and reals with 17 significant digits.
void write_trace_csv(const SolverTrace& trace, std::ostream& out);
void write_trace_csv(const SolverTrace& trace, const std::filesystem::path& path);
SolverTrace read_trace_csv(const std::filesystem::path& path);

/// 10 log10(peak^2 / mse), capped at 99 dB for (near) exact matches.
double psnr(const Vector& x, const Vector& reference, double peak = 1.0);

}  // namespace proxpnp
