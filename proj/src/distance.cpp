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

#include "pedseg/distance.hpp"

#include <cmath>
#include <limits>

namespace pedseg {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1D squared transform along a line with sample pitch h:
// out[p] = min_q (h^2 (p - q)^2 + f[q]).
void transform_line(const double* f, double* out, int n, double h2, std::vector<int>& v, std::vector<double>& z) {
  v.resize(static_cast<std::size_t>(n));
  z.resize(static_cast<std::size_t>(n) + 1);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s;
    for (;;) {
      const int r = v[static_cast<std::size_t>(k)];
      s = ((f[q] + h2 * q * q) - (f[r] + h2 * r * r)) / (2.0 * h2 * (q - r));
      if (s <= z[static_cast<std::size_t>(k)]) {
        if (--k < 0) break;
      } else {
        break;
      }
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = k == 0 ? -kInf : s;
    z[static_cast<std::size_t>(k) + 1] = kInf;
  }
  if (k < 0) {
    for (int p = 0; p < n; ++p) out[p] = kInf;
    return;
  }
  int j = 0;
  for (int p = 0; p < n; ++p) {
    while (z[static_cast<std::size_t>(j) + 1] < p) ++j;
    const int r = v[static_cast<std::size_t>(j)];
    const double dp = p - r;
    out[p] = h2 * dp * dp + f[r];
  }
}

}  // namespace

std::vector<double> squared_distance_to(const Mask& targets) {
  const Dims d = targets.dims();
  const Spacing s = targets.spacing();
  std::vector<double> g(targets.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = targets[i] ? 0.0 : kInf;

  std::vector<int> v;
  std::vector<double> z;
  const int longest = std::max({d.nx, d.ny, d.nz});
  std::vector<double> line(static_cast<std::size_t>(longest)), res(static_cast<std::size_t>(longest));

  auto pass = [&](int n, double h, std::size_t stride, auto&& starts) {
    for (std::size_t base : starts) {
      for (int i = 0; i < n; ++i) line[static_cast<std::size_t>(i)] = g[base + static_cast<std::size_t>(i) * stride];
      transform_line(line.data(), res.data(), n, h * h, v, z);
      for (int i = 0; i < n; ++i) g[base + static_cast<std::size_t>(i) * stride] = res[static_cast<std::size_t>(i)];
    }
  };

  const std::size_t nx = static_cast<std::size_t>(d.nx), ny = static_cast<std::size_t>(d.ny),
                    nz = static_cast<std::size_t>(d.nz);
  std::vector<std::size_t> starts;
  starts.reserve(targets.size());
  for (std::size_t zz = 0; zz < nz; ++zz)
    for (std::size_t yy = 0; yy < ny; ++yy) starts.push_back(nx * (yy + ny * zz));
  pass(d.nx, s.dx, 1, starts);
  starts.clear();
  for (std::size_t zz = 0; zz < nz; ++zz)
    for (std::size_t xx = 0; xx < nx; ++xx) starts.push_back(xx + nx * ny * zz);
  pass(d.ny, s.dy, nx, starts);
  starts.clear();
  for (std::size_t yy = 0; yy < ny; ++yy)
    for (std::size_t xx = 0; xx < nx; ++xx) starts.push_back(xx + nx * yy);
  pass(d.nz, s.dz, nx * ny, starts);
  return g;
}

std::vector<double> distance_to(const Mask& targets) {
  auto g = squared_distance_to(targets);
  for (double& v : g) v = std::sqrt(v);
  return g;
}

}  // namespace pedseg
