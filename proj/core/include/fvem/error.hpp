// Copyright 2026 The fvem Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fvem {

/// Tensor or layer shapes that do not chain.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Caller-supplied values outside an operation's contract.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parameter outside the mathematical domain of a formula (e.g. tau <= 0).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// NaN or Inf produced during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed on-disk data. The message carries the byte offset.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unparseable or invalid experiment configuration, one entry per problem.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<std::string> violations)
      : std::invalid_argument(join(violations)), violations_(std::move(violations)) {}

  [[nodiscard]] const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) out += (out.empty() ? "" : "; ") + s;
    return out;
  }

  std::vector<std::string> violations_;
};

}  // namespace fvem
