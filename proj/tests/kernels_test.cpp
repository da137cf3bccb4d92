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


#include "clinbias/kernels.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

namespace clinbias::kernels {
namespace {

// Reference values computed in long double, independent of either kernel.
long double ref_sum(const std::vector<double>& v) {
  long double s = 0;
  for (double x : v) s += x;
  return s;
}

long double ref_abs_dev(const std::vector<double>& v, double c) {
  long double s = 0;
  for (double x : v) s += std::fabs(static_cast<long double>(x) - c);
  return s;
}

class KernelEquivalence : public ::testing::Test {
 protected:
  void SetUp() override {
    if (avx2_kernels() == nullptr) GTEST_SKIP() << "AVX2 not available on this CPU";
  }
  const KernelSet& scalar = scalar_kernels();
  const KernelSet& simd() { return *avx2_kernels(); }
  std::mt19937_64 rng{7};
};

TEST_F(KernelEquivalence, SumMatchesScalarForAllTailLengths) {
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (std::size_t n = 0; n <= 67; ++n) {
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    const double a = scalar.sum(v.data(), n);
    const double b = simd().sum(v.data(), n);
    EXPECT_NEAR(a, b, 1e-12) << "n=" << n;
    EXPECT_NEAR(a, static_cast<double>(ref_sum(v)), 1e-12);
  }
}

TEST_F(KernelEquivalence, AbsDevSumMatchesScalar) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t n = 0; n <= 67; ++n) {
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    const double c = n == 0 ? 0.0 : static_cast<double>(ref_sum(v)) / static_cast<double>(n);
    const double a = scalar.abs_dev_sum(v.data(), n, c);
    const double b = simd().abs_dev_sum(v.data(), n, c);
    EXPECT_NEAR(a, b, 1e-12) << "n=" << n;
    EXPECT_NEAR(a, static_cast<double>(ref_abs_dev(v, c)), 1e-12);
  }
}

TEST_F(KernelEquivalence, DotRowsMatchesScalar) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  for (std::size_t dim : {1u, 7u, 8u, 9u, 31u, 256u, 300u}) {
    const std::size_t rows = 13;
    std::vector<float> m(rows * dim), q(dim), a(rows), b(rows);
    for (auto& x : m) x = g(rng);
    for (auto& x : q) x = g(rng);
    scalar.dot_rows(m.data(), rows, dim, q.data(), a.data());
    simd().dot_rows(m.data(), rows, dim, q.data(), b.data());
    for (std::size_t r = 0; r < rows; ++r) {
      double ref = 0;
      for (std::size_t k = 0; k < dim; ++k) ref += static_cast<double>(m[r * dim + k]) * q[k];
      EXPECT_NEAR(a[r], ref, 1e-4 * (1.0 + std::fabs(ref))) << "dim=" << dim;
      EXPECT_NEAR(a[r], b[r], 1e-4 * (1.0 + std::fabs(ref))) << "dim=" << dim;
    }
  }
}

TEST_F(KernelEquivalence, SumSquaresMatchesScalar) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  for (std::size_t n = 0; n <= 40; ++n) {
    std::vector<float> v(n);
    for (auto& x : v) x = g(rng);
    EXPECT_NEAR(scalar.sum_squares(v.data(), n), simd().sum_squares(v.data(), n), 1e-5);
  }
}

TEST(Kernels, ScalarSetIsNamed) { EXPECT_EQ(scalar_kernels().name, "scalar"); }

TEST(Kernels, ArgmaxFirstPrefersLowestIndexOnTies) {
  std::vector<float> v{0.1f, 0.9f, 0.3f, 0.9f};
  EXPECT_EQ(argmax_first(v), 1u);
}

TEST(Kernels, SpanWrappersUseActiveSet) {
  std::vector<double> v{1.0, 2.0, 3.0, 6.0};
  EXPECT_DOUBLE_EQ(sum(v), 12.0);
  EXPECT_DOUBLE_EQ(abs_dev_sum(v, 3.0), 2.0 + 1.0 + 0.0 + 3.0);
  std::vector<float> m{1, 0, 0, 1, 1, 1};
  std::vector<float> q{2, 3};
  std::vector<float> out(3);
  dot_rows(m, 2, q, out);
  EXPECT_FLOAT_EQ(out[0], 2.0f);
  EXPECT_FLOAT_EQ(out[1], 3.0f);
  EXPECT_FLOAT_EQ(out[2], 5.0f);
}

}  // namespace
}  // namespace clinbias::kernels
