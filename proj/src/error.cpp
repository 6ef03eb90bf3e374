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

#include "pedseg/error.hpp"

namespace pedseg {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::DimsMismatch: return "DimsMismatch";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::ContextMismatch: return "ContextMismatch";
    case Errc::BadMagic: return "BadMagic";
    case Errc::BadHeader: return "BadHeader";
    case Errc::UnsupportedDatatype: return "UnsupportedDatatype";
    case Errc::TruncatedPayload: return "TruncatedPayload";
    case Errc::InvalidLabel: return "InvalidLabel";
    case Errc::NonFiniteData: return "NonFiniteData";
    case Errc::EmptyClass: return "EmptyClass";
    case Errc::SingleClass: return "SingleClass";
    case Errc::OutOfHorizon: return "OutOfHorizon";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
    case Errc::DegenerateRange: return "DegenerateRange";
  }
  return "Unknown";
}

}  // namespace pedseg
