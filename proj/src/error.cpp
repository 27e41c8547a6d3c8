/*
 * Copyright 2026 The tpsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "tpsim/error.hpp"

#include <algorithm>

namespace tpsim {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kIndivisibleHeads: return "IndivisibleHeads";
    case ErrorCode::kIndivisibleIntermediate: return "IndivisibleIntermediate";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kCacheFull: return "CacheFull";
    case ErrorCode::kPlanMismatch: return "PlanMismatch";
    case ErrorCode::kInconsistentPlan: return "InconsistentPlan";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

bool ValidationResult::has_violation(std::string_view needle) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const std::string& v) { return v.find(needle) != std::string::npos; });
}

void ValidationResult::merge(const ValidationResult& other) {
  violations.insert(violations.end(), other.violations.begin(), other.violations.end());
  warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
}

}  // namespace tpsim
