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

// Reference computations written without the library so the tests have
// something independent to compare against.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace fvem::testing {

/// (f(x + h e_i) - f(x - h e_i)) / 2h, restoring x afterwards.
inline double central_difference(const std::function<double()>& f, double& x, double h = 1e-5) {
  const double x0 = x;
  x = x0 + h;
  const double up = f();
  x = x0 - h;
  const double down = f();
  x = x0;
  return (up - down) / (2.0 * h);
}

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
}

/// out[r][c] = sum_k a[r][k] * b[c][k] + bias[c]
inline std::vector<std::vector<double>> naive_affine(const std::vector<std::vector<double>>& a,
                                                     const std::vector<std::vector<double>>& w,
                                                     const std::vector<double>& bias) {
  std::vector<std::vector<double>> out(a.size(), std::vector<double>(w.size(), 0.0));
  for (std::size_t r = 0; r < a.size(); ++r) {
    for (std::size_t c = 0; c < w.size(); ++c) {
      double s = bias[c];
      for (std::size_t k = 0; k < a[r].size(); ++k) s += a[r][k] * w[c][k];
      out[r][c] = s;
    }
  }
  return out;
}

inline double log_sum_exp(std::span<const double> z) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

inline std::vector<double> random_vector(std::mt19937_64& gen, std::size_t n, double lo = -1.0,
                                         double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(gen);
  return v;
}

/// Golden-section search for the maximum of a unimodal f on [a, b].
inline double golden_max(const std::function<double(double)>& f, double a, double b,
                         double tol = 1e-10) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a);
  double d = a + g * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (std::abs(b - a) > tol * std::max(1.0, std::abs(c) + std::abs(d))) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace fvem::testing
