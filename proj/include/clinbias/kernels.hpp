// Copyright 2026 The clinbias Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Data-parallel inner loops used by the metric and linking code.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2+FMA variant compiled in its own translation unit. The variant is
// picked once at startup from CPUID; setting CLINBIAS_KERNELS=scalar forces
// the reference path. Variants agree with the reference up to floating-point
// reassociation (tests/kernels_test.cpp pins the tolerances).

#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace clinbias::kernels {

struct KernelSet {
  std::string_view name;
  // Sum of values.
  double (*sum)(const double* values, std::size_t n);
  // Sum of |values[i] - center|.
  double (*abs_dev_sum)(const double* values, std::size_t n, double center);
  // out[r] = <matrix row r, query>, matrix is row-major rows x dim.
  void (*dot_rows)(const float* matrix, std::size_t rows, std::size_t dim,
                   const float* query, float* out);
  // Sum of squares of a float vector, accumulated in double.
  double (*sum_squares)(const float* values, std::size_t n);
};

const KernelSet& scalar_kernels();
// Nullptr when the AVX2 variant is not compiled in or the CPU lacks it.
const KernelSet* avx2_kernels();
// The kernel set used by the library.
const KernelSet& active();

inline double sum(std::span<const double> v) {
  return active().sum(v.data(), v.size());
}
inline double abs_dev_sum(std::span<const double> v, double center) {
  return active().abs_dev_sum(v.data(), v.size(), center);
}
inline double sum_squares(std::span<const float> v) {
  return active().sum_squares(v.data(), v.size());
}
inline void dot_rows(std::span<const float> matrix, std::size_t dim,
                     std::span<const float> query, std::span<float> out) {
  active().dot_rows(matrix.data(), out.size(), dim, query.data(), out.data());
}

// Index of the first maximum (lowest index wins ties); n must be > 0.
std::size_t argmax_first(std::span<const float> values);

}  // namespace clinbias::kernels
