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

#include "proxpnp/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace proxpnp {

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

std::string real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Splits one CSV line into reals; `where` prefixes error messages.
std::vector<double> parse_line(const std::string& line, const std::string& where) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    const auto first = field.find_first_not_of(" \t\r");
    const auto last = field.find_last_not_of(" \t\r");
    if (first == std::string::npos) throw IoError(where + ": empty field");
    field = field.substr(first, last - first + 1);
    try {
      std::size_t used = 0;
      const double v = std::stod(field, &used);
      if (used != field.size()) throw std::invalid_argument(field);
      out.push_back(v);
    } catch (const std::exception&) {
      throw IoError(where + ": not a number: '" + field + "'");
    }
  }
  return out;
}

bool next_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) return true;
  }
  return false;
}

Index as_dim(double v, const std::string& where) {
  if (!(v >= 1.0) || v != std::floor(v) || v > 1e9) throw IoError(where + ": bad dimension");
  return static_cast<Index>(v);
}

void read_rows(std::istream& in, Matrix& m, Index row0, Index nrows, const std::string& where) {
  std::string line;
  for (Index i = 0; i < nrows; ++i) {
    if (!next_line(in, line)) throw IoError(where + ": too few rows");
    const std::vector<double> vals = parse_line(line, where);
    if (static_cast<Index>(vals.size()) != m.cols())
      throw IoError(where + ": expected " + std::to_string(m.cols()) + " values per row");
    for (Index j = 0; j < m.cols(); ++j) m(row0 + i, j) = vals[static_cast<std::size_t>(j)];
  }
}

void write_rows(std::ostream& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << real(m(i, j));
    out << '\n';
  }
}

void expect_end(std::istream& in, const std::string& where) {
  std::string line;
  if (next_line(in, line)) throw IoError(where + ": trailing data");
}

// Next whitespace-separated PGM header token, skipping comments.
std::string pgm_token(std::istream& in, const std::string& where) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      if (!tok.empty()) return tok;
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) throw IoError(where + ": truncated header");
  return tok;
}

long pgm_number(std::istream& in, const std::string& where) {
  const std::string tok = pgm_token(in, where);
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), ::isdigit))
    throw IoError(where + ": bad header field '" + tok + "'");
  return std::stol(tok);
}

}  // namespace

Matrix read_matrix_csv(const std::filesystem::path& path) {
  const std::string where = path.string();
  std::ifstream in = open_in(path);
  std::string line;
  if (!next_line(in, line)) throw IoError(where + ": empty file");
  const std::vector<double> dims = parse_line(line, where);
  if (dims.size() != 2) throw IoError(where + ": first line must be 'rows,cols'");
  Matrix m(as_dim(dims[0], where), as_dim(dims[1], where));
  read_rows(in, m, 0, m.rows(), where);
  expect_end(in, where);
  return m;
}

void write_matrix_csv(const Matrix& m, const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  out << m.rows() << ',' << m.cols() << '\n';
  write_rows(out, m);
  finish(out, path);
}

std::vector<Matrix> read_kernel_list_csv(const std::filesystem::path& path) {
  const std::string where = path.string();
  std::ifstream in = open_in(path);
  std::string line;
  if (!next_line(in, line)) throw IoError(where + ": empty file");
  const std::vector<double> dims = parse_line(line, where);
  if (dims.size() != 3) throw IoError(where + ": first line must be 'F,kh,kw'");
  const Index count = as_dim(dims[0], where);
  const Index kh = as_dim(dims[1], where);
  const Index kw = as_dim(dims[2], where);
  std::vector<Matrix> kernels;
  for (Index f = 0; f < count; ++f) {
    Matrix k(kh, kw);
    read_rows(in, k, 0, kh, where);
    kernels.push_back(std::move(k));
  }
  expect_end(in, where);
  return kernels;
}

void write_kernel_list_csv(const std::vector<Matrix>& kernels, const std::filesystem::path& path) {
  if (kernels.empty()) throw ConfigError("cannot write an empty kernel list");
  std::ofstream out = open_out(path);
  out << kernels.size() << ',' << kernels.front().rows() << ',' << kernels.front().cols() << '\n';
  for (const Matrix& k : kernels) {
    if (k.rows() != kernels.front().rows() || k.cols() != kernels.front().cols())
      throw DimensionError("kernel list entries must share one size");
    write_rows(out, k);
  }
  finish(out, path);
}

Vector read_vector_csv(const std::filesystem::path& path) {
  const std::string where = path.string();
  std::ifstream in = open_in(path);
  std::vector<double> vals;
  std::string line;
  while (next_line(in, line)) {
    const std::vector<double> row = parse_line(line, where);
    if (row.size() != 1) throw IoError(where + ": expected one value per line");
    vals.push_back(row.front());
  }
  return Eigen::Map<const Vector>(vals.data(), static_cast<Index>(vals.size()));
}

void write_vector_csv(const Vector& v, const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  for (Index i = 0; i < v.size(); ++i) out << real(v[i]) << '\n';
  finish(out, path);
}

Matrix read_pgm(const std::filesystem::path& path) {
  const std::string where = path.string();
  std::ifstream in = open_in(path);
  const std::string magic = pgm_token(in, where);
  if (magic != "P5" && magic != "P2") throw IoError(where + ": not a PGM file");
  const long width = pgm_number(in, where);
  const long height = pgm_number(in, where);
  const long maxval = pgm_number(in, where);
  if (width < 1 || height < 1 || maxval < 1 || maxval > 65535)
    throw IoError(where + ": bad PGM header");
  Matrix img(height, width);
  const double scale = 1.0 / static_cast<double>(maxval);
  for (long i = 0; i < height; ++i) {
    for (long j = 0; j < width; ++j) {
      long level = 0;
      if (magic == "P2") {
        level = pgm_number(in, where);
      } else if (maxval < 256) {
        const int c = in.get();
        if (c == EOF) throw IoError(where + ": truncated pixel data");
        level = c;
      } else {
        const int hi = in.get();
        const int lo = in.get();
        if (hi == EOF || lo == EOF) throw IoError(where + ": truncated pixel data");
        level = hi * 256 + lo;
      }
      if (level > maxval) throw IoError(where + ": pixel above maxval");
      img(i, j) = static_cast<double>(level) * scale;
    }
  }
  return img;
}

void write_pgm(const Matrix& image, const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  out << "P5\n" << image.cols() << ' ' << image.rows() << "\n255\n";
  for (Index i = 0; i < image.rows(); ++i) {
    for (Index j = 0; j < image.cols(); ++j) {
      const double v = std::clamp(image(i, j), 0.0, 1.0);
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
  }
  finish(out, path);
}

Vector flatten(const Matrix& image) {
  Vector v(image.size());
  for (Index i = 0; i < image.rows(); ++i)
    for (Index j = 0; j < image.cols(); ++j) v[i * image.cols() + j] = image(i, j);
  return v;
}

Matrix unflatten(const Vector& v, Index rows, Index cols) {
  check_length("unflatten", rows * cols, v.size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = v[i * cols + j];
  return m;
}

}  // namespace proxpnp
