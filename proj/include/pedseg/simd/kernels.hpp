/*
 * Copyright 2026 The pedseg Authors
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

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

// Data-parallel inner loops shared by the volume, morphology and NN code.
// Each kernel has a scalar reference and, where the target allows, an AVX2
// (x86-64, selected at runtime from cpuid) or NEON (aarch64) variant. All
// variants must agree with the scalar reference; see tests/test_simd.cpp.

namespace pedseg::simd {

enum class Level { Scalar, Avx2, Neon };

struct KernelTable {
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  // sum of (x - mean)^2
  double (*sum_sq_dev)(const double* x, std::size_t n, double mean);
  // y = a * x + b
  void (*scale_shift)(const double* x, double* y, std::size_t n, double a, double b);
  // out = num / den where |den| >= guard, else out = 0 and excluded = 1
  void (*guarded_div)(const double* num, const double* den, double* out, std::uint8_t* excluded,
                      std::size_t n, double guard);
  // y |= x
  void (*or_bytes)(const std::uint8_t* x, std::uint8_t* y, std::size_t n);
};

bool supported(Level level);
Level best_level();
Level active_level();
/// Forces a kernel level (used by equivalence tests and PEDSEG_SIMD). Falls
/// back to Scalar when the requested level is not supported here.
Level set_level(Level level);
std::string_view level_name(Level level);

const KernelTable& table(Level level);
const KernelTable& active();

namespace detail {
extern const KernelTable kScalarTable;
#if defined(PEDSEG_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif
#if defined(PEDSEG_HAVE_NEON)
extern const KernelTable kNeonTable;
#endif
}  // namespace detail

inline double dot(std::span<const double> x, std::span<const double> y) {
  return active().dot(x.data(), y.data(), x.size());
}
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  active().axpy(a, x.data(), y.data(), x.size());
}
inline double sum(std::span<const double> x) { return active().sum(x.data(), x.size()); }
inline double sum_sq_dev(std::span<const double> x, double mean) {
  return active().sum_sq_dev(x.data(), x.size(), mean);
}
inline void scale_shift(std::span<const double> x, std::span<double> y, double a, double b) {
  active().scale_shift(x.data(), y.data(), x.size(), a, b);
}
inline void or_bytes(std::span<const std::uint8_t> x, std::span<std::uint8_t> y) {
  active().or_bytes(x.data(), y.data(), x.size());
}

}  // namespace pedseg::simd
