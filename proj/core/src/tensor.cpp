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

#include "fvem/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "fvem/error.hpp"

namespace fvem {
namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

DenseTensor::DenseTensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), values_(product(shape_), fill) {}

DenseTensor::DenseTensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (product(shape_) != values_.size()) {
    throw DimensionError("DenseTensor: shape " + shape_string() + " does not hold " +
                         std::to_string(values_.size()) + " values");
  }
}

std::size_t DenseTensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("DenseTensor: axis " + std::to_string(axis) + " out of range for shape " +
                         shape_string());
  }
  return shape_[axis];
}

std::span<const double> DenseTensor::row(std::size_t r) const {
  const std::size_t c = cols();
  return std::span<const double>(values_).subspan(r * c, c);
}

bool DenseTensor::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string DenseTensor::shape_string() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? ", " : "") << shape_[i];
  os << ')';
  return os.str();
}

DenseTensor gather_rows(const DenseTensor& m, std::span<const std::size_t> rows) {
  const std::size_t cols = m.cols();
  DenseTensor out = DenseTensor::matrix(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= m.rows()) throw InputError("gather_rows: row index out of range");
    const auto src = m.row(rows[i]);
    std::copy(src.begin(), src.end(), out.data() + i * cols);
  }
  return out;
}

}  // namespace fvem
