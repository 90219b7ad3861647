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

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace ccfv {

// Row-major matrix of 32-bit feature values, one row per sampled voxel.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0f) {}
  FeatureMatrix(std::size_t r, std::size_t c, std::vector<float> v)
      : rows(r), cols(c), values(std::move(v)) {
    if (values.size() != rows * cols) {
      throw std::invalid_argument("FeatureMatrix: value count does not match rows*cols");
    }
  }

  std::span<const float> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
  std::span<float> row(std::size_t i) { return {values.data() + i * cols, cols}; }

  float& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  float operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }

  bool all_finite() const {
    for (float v : values) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  void append_row(std::span<const float> r) {
    if (r.size() != cols) throw std::invalid_argument("FeatureMatrix: row width mismatch");
    values.insert(values.end(), r.begin(), r.end());
    ++rows;
  }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

// Widens a FeatureMatrix to a double-precision Eigen matrix (rows x cols).
inline Eigen::MatrixXd to_eigen(const FeatureMatrix& m) {
  Eigen::MatrixXd out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) out(i, j) = m(i, j);
  }
  return out;
}

inline FeatureMatrix from_eigen(const Eigen::MatrixXd& m) {
  FeatureMatrix out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(i, j) = static_cast<float>(m(i, j));
  }
  return out;
}

}  // namespace ccfv
