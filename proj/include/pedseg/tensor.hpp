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
#include <random>
#include <span>
#include <string>
#include <vector>

namespace pedseg::nn {

/// (batch, channels, depth, height, width); width is the fastest axis.
struct Shape5 {
  int n = 0, c = 0, d = 0, h = 0, w = 0;

  std::size_t spatial() const {
    return static_cast<std::size_t>(d) * static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }
  std::size_t numel() const { return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * spatial(); }
  bool operator==(const Shape5&) const = default;
};

std::string to_string(const Shape5& s);

/// Values with a gradient buffer of identical shape.
class Tensor5 {
 public:
  Tensor5() = default;
  explicit Tensor5(Shape5 shape, double fill = 0.0);
  Tensor5(Shape5 shape, std::vector<double> values);

  const Shape5& shape() const { return shape_; }
  std::size_t numel() const { return value_.size(); }

  std::span<double> value() { return value_; }
  std::span<const double> value() const { return value_; }
  std::span<double> grad() { return grad_; }
  std::span<const double> grad() const { return grad_; }

  std::size_t offset(int n, int c, int z, int y, int x) const {
    return (((static_cast<std::size_t>(n) * static_cast<std::size_t>(shape_.c) + static_cast<std::size_t>(c)) *
                 static_cast<std::size_t>(shape_.d) +
             static_cast<std::size_t>(z)) *
                static_cast<std::size_t>(shape_.h) +
            static_cast<std::size_t>(y)) *
               static_cast<std::size_t>(shape_.w) +
           static_cast<std::size_t>(x);
  }
  double& at(int n, int c, int z, int y, int x) { return value_[offset(n, c, z, y, x)]; }
  double at(int n, int c, int z, int y, int x) const { return value_[offset(n, c, z, y, x)]; }

  /// Contiguous (d, h, w) block of one sample and channel.
  std::span<double> plane(int n, int c) { return std::span<double>(value_).subspan(offset(n, c, 0, 0, 0), shape_.spatial()); }
  std::span<const double> plane(int n, int c) const {
    return std::span<const double>(value_).subspan(offset(n, c, 0, 0, 0), shape_.spatial());
  }
  std::span<double> grad_plane(int n, int c) { return std::span<double>(grad_).subspan(offset(n, c, 0, 0, 0), shape_.spatial()); }

  void zero_grad();
  bool all_finite() const;

 private:
  Shape5 shape_{};
  std::vector<double> value_;
  std::vector<double> grad_;
};

/// A trainable array: flat values, gradient accumulator and nominal shape.
struct Param {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;
  std::size_t fan_in = 0;  // inputs per output unit; 0 means not randomly initialized

  Param() = default;
  Param(std::string n, std::vector<std::size_t> s, double fill = 0.0);
  std::size_t size() const { return value.size(); }
  void zero_grad();
};

using Rng = std::mt19937_64;

enum class Mode { Train, Infer };

}  // namespace pedseg::nn
