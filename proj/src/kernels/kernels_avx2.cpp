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

// Compiled with -mavx2 -mfma. Nothing in here may run before the dispatcher
// has checked CPUID.

#include <immintrin.h>

#include <cmath>

#include "kernels_internal.hpp"

namespace clinbias::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

double sum_avx2(const double* values, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(values + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(values + i + 4));
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(values + i));
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += values[i];
  return acc;
}

double abs_dev_sum_avx2(const double* values, std::size_t n, double center) {
  const __m256d c = _mm256_set1_pd(center);
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(values + i), c);
    acc = _mm256_add_pd(acc, _mm256_andnot_pd(sign_mask, d));
  }
  double total = hsum(acc);
  for (; i < n; ++i) total += std::fabs(values[i] - center);
  return total;
}

void dot_rows_avx2(const float* matrix, std::size_t rows, std::size_t dim,
                   const float* query, float* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const float* row = matrix + r * dim;
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t k = 0;
    for (; k + 8 <= dim; k += 8) {
      __m256 a = _mm256_loadu_ps(row + k);
      __m256 b = _mm256_loadu_ps(query + k);
      acc0 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(a)),
                             _mm256_cvtps_pd(_mm256_castps256_ps128(b)), acc0);
      acc1 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(a, 1)),
                             _mm256_cvtps_pd(_mm256_extractf128_ps(b, 1)), acc1);
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; k < dim; ++k) {
      acc += static_cast<double>(row[k]) * static_cast<double>(query[k]);
    }
    out[r] = static_cast<float>(acc);
  }
}

double sum_squares_avx2(const float* values, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_cvtps_pd(_mm_loadu_ps(values + i));
    acc = _mm256_fmadd_pd(v, v, acc);
  }
  double total = hsum(acc);
  for (; i < n; ++i) {
    total += static_cast<double>(values[i]) * static_cast<double>(values[i]);
  }
  return total;
}

}  // namespace

const KernelSet& avx2_kernel_table() {
  static const KernelSet kSet{"avx2", &sum_avx2, &abs_dev_sum_avx2,
                              &dot_rows_avx2, &sum_squares_avx2};
  return kSet;
}

}  // namespace clinbias::kernels
