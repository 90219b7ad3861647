/*
 * Copyright 2026 The CCFV Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Exception types shared by every ccfv module.
//
// Two families matter to callers: FormatError covers anything wrong with
// bytes, files or tables (IO/format), EstimatorError covers inputs that are
// well-formed but on which an estimator is undefined. The CLI maps them to
// exit codes 2 and 3 respectively.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace ccfv {

class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Error raised while decoding a byte stream; carries the offending offset.
class DecodeError : public FormatError {
 public:
  DecodeError(std::size_t offset, const std::string& what)
      : FormatError("at byte offset " + std::to_string(offset) + ": " + what),
        offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Stable machine-readable codes for estimator-domain failures.
namespace error_code {
inline constexpr const char* kNoSharedClass = "NO_SHARED_CLASS";
inline constexpr const char* kSingularCovariance = "SINGULAR_COVARIANCE";
inline constexpr const char* kUnavailable = "UNAVAILABLE";
inline constexpr const char* kDegenerateInput = "DEGENERATE_INPUT";
}  // namespace error_code

class EstimatorError : public std::runtime_error {
 public:
  EstimatorError(std::string code, const std::string& what)
      : std::runtime_error(code + ": " + what), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

}  // namespace ccfv
