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

#include <cmath>

#include "pedseg/simd/kernels.hpp"

namespace pedseg::simd::detail {
namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double sum_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double sum_sq_dev_scalar(const double* x, std::size_t n, double mean) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - mean;
    acc += d * d;
  }
  return acc;
}

void scale_shift_scalar(const double* x, double* y, std::size_t n, double a, double b) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a * x[i] + b;
}

void guarded_div_scalar(const double* num, const double* den, double* out, std::uint8_t* excluded,
                        std::size_t n, double guard) {
  for (std::size_t i = 0; i < n; ++i) {
    const bool bad = !(std::fabs(den[i]) >= guard);
    excluded[i] = bad ? 1 : 0;
    out[i] = bad ? 0.0 : num[i] / den[i];
  }
}

void or_bytes_scalar(const std::uint8_t* x, std::uint8_t* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] |= x[i];
}

}  // namespace

const KernelTable kScalarTable{dot_scalar,        axpy_scalar,        sum_scalar,
                               sum_sq_dev_scalar, scale_shift_scalar, guarded_div_scalar,
                               or_bytes_scalar};

}  // namespace pedseg::simd::detail
