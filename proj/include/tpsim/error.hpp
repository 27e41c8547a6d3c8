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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tpsim {

enum class ErrorCode {
  kInvalidConfig,
  kIndivisibleHeads,
  kIndivisibleIntermediate,
  kShapeMismatch,
  kCacheFull,
  kPlanMismatch,
  kInconsistentPlan,
  kIo,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-checkable code. The message always starts
/// with the code name, e.g. "IndivisibleHeads: 8 heads over 3 chips".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Result-carrying validation outcome. Violations make the result not ok;
/// warnings are informational.
struct ValidationResult {
  std::vector<std::string> violations;
  std::vector<std::string> warnings;

  bool ok() const noexcept { return violations.empty(); }
  bool has_violation(std::string_view needle) const;
  void merge(const ValidationResult& other);
};

}  // namespace tpsim
