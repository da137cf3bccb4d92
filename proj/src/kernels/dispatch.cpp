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

#include <cstdlib>
#include <string_view>

#include "kernels_internal.hpp"

namespace clinbias::kernels {
namespace {

bool cpu_has_avx2_fma() {
#if defined(CLINBIAS_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelSet& select() {
  const char* forced = std::getenv("CLINBIAS_KERNELS");
  if (forced != nullptr && std::string_view(forced) == "scalar") {
    return scalar_kernels();
  }
  if (const KernelSet* simd = avx2_kernels()) return *simd;
  return scalar_kernels();
}

}  // namespace

const KernelSet* avx2_kernels() {
#if defined(CLINBIAS_HAVE_AVX2)
  static const bool kSupported = cpu_has_avx2_fma();
  if (kSupported) return &avx2_kernel_table();
#endif
  return nullptr;
}

const KernelSet& active() {
  static const KernelSet& kActive = select();
  return kActive;
}

}  // namespace clinbias::kernels
