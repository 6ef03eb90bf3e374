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

#include "pedseg/init.hpp"

#include <cmath>

#include "pedseg/error.hpp"

namespace pedseg::nn {

double init_variance(std::size_t dim_in, double alpha) {
  if (dim_in == 0) fail(Errc::InvalidArgument, "dim_in must be positive");
  if (!std::isfinite(alpha)) fail(Errc::InvalidArgument, "alpha must be finite");
  return std::pow(2.0 / static_cast<double>(dim_in), alpha);
}

std::vector<double> gaussian_init(std::size_t count, std::size_t dim_in, double alpha, Rng& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(init_variance(dim_in, alpha)));
  std::vector<double> w(count);
  for (auto& v : w) v = dist(rng);
  return w;
}

void gaussian_init(const std::vector<Param*>& params, double alpha, Rng& rng) {
  for (Param* p : params) {
    if (p->fan_in == 0) continue;
    p->value = gaussian_init(p->size(), p->fan_in, alpha, rng);
  }
}

}  // namespace pedseg::nn
