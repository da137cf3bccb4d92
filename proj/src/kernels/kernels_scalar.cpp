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

#include <cmath>

#include "clinbias/kernels.hpp"

namespace clinbias::kernels {
namespace {

double sum_scalar(const double* values, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += values[i];
  return acc;
}

double abs_dev_sum_scalar(const double* values, std::size_t n, double center) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::fabs(values[i] - center);
  return acc;
}

void dot_rows_scalar(const float* matrix, std::size_t rows, std::size_t dim,
                     const float* query, float* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const float* row = matrix + r * dim;
    double acc = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      acc += static_cast<double>(row[k]) * static_cast<double>(query[k]);
    }
    out[r] = static_cast<float>(acc);
  }
}

double sum_squares_scalar(const float* values, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += static_cast<double>(values[i]) * static_cast<double>(values[i]);
  }
  return acc;
}

}  // namespace

const KernelSet& scalar_kernels() {
  static const KernelSet kSet{"scalar", &sum_scalar, &abs_dev_sum_scalar,
                              &dot_rows_scalar, &sum_squares_scalar};
  return kSet;
}

std::size_t argmax_first(std::span<const float> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace clinbias::kernels
