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

#include "proxpnp/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace proxpnp {

namespace {

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_optional(const std::optional<double>& v) {
  return v ? format_real(*v) : std::string();
}

std::optional<double> parse_optional(const std::string& field, const std::string& line) {
  if (field.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw IoError("trace csv: bad number '" + field + "' in line: " + line);
  }
}

}  // namespace

void write_trace_csv(const SolverTrace& trace, std::ostream& out) {
  out << "k,dx_ref,dcoef_ref,objective,psnr,wall_s\n";
  for (const TraceRecord& r : trace.records) {
    out << r.k << ',' << format_optional(r.dx_ref) << ',' << format_optional(r.dcoef_ref) << ','
        << format_real(r.objective) << ',' << format_optional(r.psnr) << ','
        << format_optional(r.wall_s) << '\n';
  }
}

void write_trace_csv(const SolverTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_trace_csv(trace, out);
  if (!out) throw IoError("failed writing " + path.string());
}

SolverTrace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "k,dx_ref,dcoef_ref,objective,psnr,wall_s")
    throw IoError(path.string() + ": missing trace header");
  SolverTrace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() != 6) throw IoError(path.string() + ": expected 6 fields in: " + line);
    TraceRecord r;
    const auto k = parse_optional(fields[0], line);
    const auto obj = parse_optional(fields[3], line);
    if (!k || !obj) throw IoError(path.string() + ": k and objective are required: " + line);
    r.k = static_cast<long>(*k);
    r.dx_ref = parse_optional(fields[1], line);
    r.dcoef_ref = parse_optional(fields[2], line);
    r.objective = *obj;
    r.psnr = parse_optional(fields[4], line);
    r.wall_s = parse_optional(fields[5], line);
    trace.records.push_back(r);
  }
  return trace;
}

double psnr(const Vector& x, const Vector& reference, double peak) {
  check_length("psnr", reference.size(), x.size());
  if (x.size() == 0) throw DimensionError("psnr of empty vectors");
  const double mse = (x - reference).squaredNorm() / static_cast<double>(x.size());
  if (!(mse > 0.0)) return 99.0;
  return std::min(99.0, 10.0 * std::log10(peak * peak / mse));
}

}  // namespace proxpnp
