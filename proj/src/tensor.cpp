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

#include "pedseg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pedseg/error.hpp"

namespace pedseg::nn {

std::string to_string(const Shape5& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.d) + "," +
         std::to_string(s.h) + "," + std::to_string(s.w) + ")";
}

Tensor5::Tensor5(Shape5 shape, double fill) : shape_(shape) {
  if (shape.n < 1 || shape.c < 1 || shape.d < 1 || shape.h < 1 || shape.w < 1) {
    fail(Errc::ShapeMismatch, "tensor shape must be positive, got " + to_string(shape));
  }
  value_.assign(shape.numel(), fill);
  grad_.assign(shape.numel(), 0.0);
}

Tensor5::Tensor5(Shape5 shape, std::vector<double> values) : Tensor5(shape) {
  if (values.size() != shape.numel()) fail(Errc::ShapeMismatch, "tensor data length does not match " + to_string(shape));
  value_ = std::move(values);
}

void Tensor5::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

bool Tensor5::all_finite() const {
  auto finite = [](double v) { return std::isfinite(v); };
  return std::all_of(value_.begin(), value_.end(), finite) && std::all_of(grad_.begin(), grad_.end(), finite);
}

Param::Param(std::string n, std::vector<std::size_t> s, double fill) : name(std::move(n)), shape(std::move(s)) {
  const std::size_t count =
      std::accumulate(shape.begin(), shape.end(), std::size_t{1}, [](std::size_t a, std::size_t b) { return a * b; });
  value.assign(count, fill);
  grad.assign(count, 0.0);
}

void Param::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

}  // namespace pedseg::nn
