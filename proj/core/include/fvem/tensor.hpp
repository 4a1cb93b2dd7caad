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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fvem {

/// Row-major dense array of doubles.
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(std::vector<std::size_t> shape, double fill = 0.0);
  DenseTensor(std::vector<std::size_t> shape, std::vector<double> values);

  static DenseTensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return DenseTensor({rows, cols}, fill);
  }
  static DenseTensor vector(std::size_t n, double fill = 0.0) { return DenseTensor({n}, fill); }

  [[nodiscard]] const std::vector<std::size_t>& shape() const { return shape_; }
  [[nodiscard]] std::size_t rank() const { return shape_.size(); }
  [[nodiscard]] std::size_t dim(std::size_t axis) const;
  [[nodiscard]] std::size_t size() const { return values_.size(); }
  [[nodiscard]] bool empty() const { return values_.empty(); }

  /// Rows and columns of a rank-2 tensor.
  [[nodiscard]] std::size_t rows() const { return dim(0); }
  [[nodiscard]] std::size_t cols() const { return dim(1); }

  [[nodiscard]] std::span<double> values() { return values_; }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] double* data() { return values_.data(); }
  [[nodiscard]] const double* data() const { return values_.data(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * shape_[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * shape_[1] + c]; }

  [[nodiscard]] std::span<const double> row(std::size_t r) const;

  [[nodiscard]] bool all_finite() const;
  [[nodiscard]] std::string shape_string() const;

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

/// Copies the given rows of a rank-2 tensor.
DenseTensor gather_rows(const DenseTensor& m, std::span<const std::size_t> rows);

}  // namespace fvem
