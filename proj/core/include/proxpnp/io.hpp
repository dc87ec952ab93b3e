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
#include <vector>

#include "proxpnp/types.hpp"

namespace proxpnp {

// CSV formats. Every real is written with 17 significant digits, so a
// write/read round trip is exact.
//
//   matrix:       first line "rows,cols", then `rows` lines of `cols` values
//   kernel list:  first line "F,kh,kw", then F blocks of kh lines of kw values
//   vector:       one value per line

Matrix read_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(const Matrix& m, const std::filesystem::path& path);

std::vector<Matrix> read_kernel_list_csv(const std::filesystem::path& path);
void write_kernel_list_csv(const std::vector<Matrix>& kernels, const std::filesystem::path& path);

Vector read_vector_csv(const std::filesystem::path& path);
void write_vector_csv(const Vector& v, const std::filesystem::path& path);

/// Binary (P5) or ASCII (P2) graymap, 8 or 16 bit, scaled to [0, 1].
Matrix read_pgm(const std::filesystem::path& path);
/// 8-bit P5; values are clipped to [0, 1] and rounded to the nearest level.
void write_pgm(const Matrix& image, const std::filesystem::path& path);

/// Row-major flattening used for images throughout the library.
Vector flatten(const Matrix& image);
Matrix unflatten(const Vector& v, Index rows, Index cols);

}  // namespace proxpnp
