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
#include <vector>

#include "pedseg/tensor.hpp"

namespace pedseg::nn {

/// (2 / dim_in)^alpha
double init_variance(std::size_t dim_in, double alpha);

std::vector<double> gaussian_init(std::size_t count, std::size_t dim_in, double alpha, Rng& rng);

/// Redraws every parameter with a nonzero fan_in; norms and biases keep their values.
void gaussian_init(const std::vector<Param*>& params, double alpha, Rng& rng);

}  // namespace pedseg::nn
