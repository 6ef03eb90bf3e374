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

#include <atomic>
#include <cstdlib>
#include <string>

#include "pedseg/simd/kernels.hpp"

namespace pedseg::simd {
namespace {

bool cpu_has_avx2() {
#if defined(PEDSEG_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Level initial_level() {
  Level level = best_level();
  if (const char* env = std::getenv("PEDSEG_SIMD")) {
    const std::string v(env);
    if (v == "scalar") level = Level::Scalar;
    else if (v == "avx2" && supported(Level::Avx2)) level = Level::Avx2;
    else if (v == "neon" && supported(Level::Neon)) level = Level::Neon;
  }
  return level;
}

std::atomic<Level>& current() {
  static std::atomic<Level> level{initial_level()};
  return level;
}

}  // namespace

bool supported(Level level) {
  switch (level) {
    case Level::Scalar: return true;
    case Level::Avx2: {
      static const bool has = cpu_has_avx2();
      return has;
    }
    case Level::Neon:
#if defined(PEDSEG_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Level best_level() {
  if (supported(Level::Avx2)) return Level::Avx2;
  if (supported(Level::Neon)) return Level::Neon;
  return Level::Scalar;
}

Level active_level() { return current().load(std::memory_order_relaxed); }

Level set_level(Level level) {
  if (!supported(level)) level = Level::Scalar;
  current().store(level, std::memory_order_relaxed);
  return level;
}

std::string_view level_name(Level level) {
  switch (level) {
    case Level::Scalar: return "scalar";
    case Level::Avx2: return "avx2";
    case Level::Neon: return "neon";
  }
  return "unknown";
}

const KernelTable& table(Level level) {
  switch (level) {
#if defined(PEDSEG_HAVE_AVX2)
    case Level::Avx2:
      if (supported(Level::Avx2)) return detail::kAvx2Table;
      break;
#endif
#if defined(PEDSEG_HAVE_NEON)
    case Level::Neon: return detail::kNeonTable;
#endif
    default: break;
  }
  return detail::kScalarTable;
}

const KernelTable& active() { return table(active_level()); }

}  // namespace pedseg::simd
