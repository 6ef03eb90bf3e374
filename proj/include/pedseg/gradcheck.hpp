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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pedseg/tensor.hpp"

namespace pedseg::nn {

/// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor = 1e-6);

struct GradcheckOptions {
  int seeds = 20;
  std::uint64_t base_seed = 1;
  double h = 1e-4;
  int samples_per_array = 12;  // coordinates probed per array
};

/// An array the scalar objective depends on, with its analytic gradient.
struct Probe {
  std::string name;
  std::span<double> values;
  std::vector<double> analytic;
};

struct ProbeStats {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::size_t kink_retries = 0;  // steps shrunk because an activation changed sign
  std::size_t kink_skipped = 0;  // coordinates sitting on a kink at every step size
  void merge(const ProbeStats& o);
};

/// Central differences of `objective` over sampled coordinates of each probe.
ProbeStats check_probes(std::vector<Probe>& probes, const std::function<double()>& objective, Rng& rng,
                        const GradcheckOptions& opt);

struct OpCheck {
  std::string op;
  double tolerance = 0.0;
  int seeds = 0;
  ProbeStats stats;
  bool pass() const { return stats.max_rel_error < tolerance; }
};

struct GradcheckReport {
  std::vector<OpCheck> ops;
  double seconds = 0.0;
  bool pass() const;
};

inline constexpr double kOpTolerance = 1e-4;
inline constexpr double kLossTolerance = 1e-5;

/// Every differentiable op and loss term, each over `seeds` random problems.
GradcheckReport run_gradcheck_suite(const GradcheckOptions& opt = {});
/// Names accepted by run_gradcheck_op.
std::vector<std::string> gradcheck_ops();
OpCheck run_gradcheck_op(const std::string& op, const GradcheckOptions& opt = {});

nlohmann::json to_json(const GradcheckReport& r);

}  // namespace pedseg::nn
