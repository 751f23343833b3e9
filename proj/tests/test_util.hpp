// Copyright 2026 The CCL Authors
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

#ifndef CCL_TESTS_TEST_UTIL_HPP_
#define CCL_TESTS_TEST_UTIL_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <numbers>
#include <random>

namespace ccl::test {

inline double deg(double degrees) { return degrees * std::numbers::pi / 180.0; }

/// Standard normal entries from a fixed seed.
inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

/// Uniform entries in [lo, hi).
inline Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi,
                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = u(rng);
  }
  return m;
}

/// Random orthogonal matrix (Q factor of a Gaussian matrix).
inline Eigen::MatrixXd random_orthogonal(Eigen::Index dim, std::uint64_t seed) {
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(dim, dim, seed));
  return qr.householderQ();
}

}  // namespace ccl::test

#endif  // CCL_TESTS_TEST_UTIL_HPP_
