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

// Bundle fixtures shared by the unit and acceptance suites.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ccfv/interchange.hpp"
#include "oracles.hpp"

namespace ccfv::testing {

inline CaseBundle small_bundle() {
  CaseBundle b;
  b.case_id = "case_a";
  b.num_classes = 2;
  ScaleSamples sc;
  sc.channels = 3;
  sc.class_samples.emplace(1, FeatureMatrix(2, 3, {1, 2, 3, 4, 5, 6}));
  sc.global_samples = FeatureMatrix(2, 3, {0.5f, -1, 2, 3, 0, -0.25f});
  b.scales.push_back(sc);
  return b;
}

// Random valid bundle: varying depth, channels, classes, posteriors.
inline CaseBundle random_bundle(std::mt19937_64& rng) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  std::normal_distribution<float> n01;
  CaseBundle b;
  b.case_id = "case_" + std::to_string(pick(0, 1000000));
  b.num_classes = static_cast<std::uint32_t>(pick(2, 5));
  const int depth = pick(1, 3);
  for (int s = 0; s < depth; ++s) {
    ScaleSamples sc;
    sc.channels = static_cast<std::uint32_t>(pick(1, 6));
    for (std::uint32_t k = 1; k < b.num_classes; ++k) {
      if (pick(0, 3) == 0) continue;
      FeatureMatrix m(static_cast<std::size_t>(pick(1, 5)), sc.channels);
      for (float& v : m.values) v = n01(rng);
      sc.class_samples.emplace(k, std::move(m));
    }
    sc.global_samples = FeatureMatrix(static_cast<std::size_t>(pick(0, 6)), sc.channels);
    for (float& v : sc.global_samples.values) v = n01(rng);
    if (pick(0, 1) == 1) {
      const std::size_t z = static_cast<std::size_t>(pick(1, 4));
      FeatureMatrix p(sc.class_rows(), z);
      for (std::size_t i = 0; i < p.rows; ++i) {
        double sum = 0.0;
        std::vector<double> row(z);
        for (auto& v : row) sum += (v = std::uniform_real_distribution<double>(0.01, 1.0)(rng));
        for (std::size_t j = 0; j < z; ++j) p(i, j) = static_cast<float>(row[j] / sum);
      }
      sc.source_posteriors = std::move(p);
    }
    b.scales.push_back(std::move(sc));
  }
  return b;
}

inline bool bit_equal(const FeatureMatrix& a, const FeatureMatrix& b) {
  return a.rows == b.rows && a.cols == b.cols &&
         std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(float)) == 0;
}

inline bool bit_equal(const CaseBundle& a, const CaseBundle& b) {
  if (a.case_id != b.case_id || a.num_classes != b.num_classes || a.scales.size() != b.scales.size()) return false;
  for (std::size_t s = 0; s < a.scales.size(); ++s) {
    const auto& x = a.scales[s];
    const auto& y = b.scales[s];
    if (x.channels != y.channels || x.class_samples.size() != y.class_samples.size()) return false;
    for (const auto& [k, m] : x.class_samples) {
      if (!y.class_samples.contains(k) || !bit_equal(m, y.class_samples.at(k))) return false;
    }
    if (!bit_equal(x.global_samples, y.global_samples)) return false;
    if (x.source_posteriors.has_value() != y.source_posteriors.has_value()) return false;
    if (x.source_posteriors && !bit_equal(*x.source_posteriors, *y.source_posteriors)) return false;
  }
  return true;
}

using Mutation = std::pair<std::string, std::function<void(CaseBundle&)>>;

// One mutation of small_bundle() per bundle invariant, keyed by the expected code.
inline std::vector<Mutation> invariant_violations() {
  return {
    {diag::kEmptyScales, [](CaseBundle& b) { b.scales.clear(); }},
    {diag::kTooFewClasses, [](CaseBundle& b) { b.num_classes = 1; b.scales[0].class_samples.clear(); }},
    {diag::kZeroChannels,
     [](CaseBundle& b) {
       b.scales[0].channels = 0;
       b.scales[0].class_samples.clear();
       b.scales[0].global_samples = FeatureMatrix(0, 0);
     }},
    {diag::kMatrixSizeMismatch, [](CaseBundle& b) { b.scales[0].global_samples.values.pop_back(); }},
    {diag::kChannelMismatch, [](CaseBundle& b) { b.scales[0].global_samples = FeatureMatrix(3, 2, {0, 0, 0, 0, 0, 0}); }},
    {diag::kNonFiniteValue, [](CaseBundle& b) { b.scales[0].global_samples(1, 1) = INFINITY; }},
    {diag::kBackgroundClassEntry, [](CaseBundle& b) { b.scales[0].class_samples.emplace(0, FeatureMatrix(1, 3)); }},
    {diag::kClassIdOutOfRange, [](CaseBundle& b) { b.scales[0].class_samples.emplace(2, FeatureMatrix(1, 3)); }},
    {diag::kEmptyClassEntry, [](CaseBundle& b) { b.scales[0].class_samples[1] = FeatureMatrix(0, 3); }},
    {diag::kPosteriorRowMismatch, [](CaseBundle& b) { b.scales[0].source_posteriors = FeatureMatrix(1, 1, {1.0f}); }},
    {diag::kNegativePosterior,
     [](CaseBundle& b) { b.scales[0].source_posteriors = FeatureMatrix(2, 2, {1.5f, -0.5f, 0.5f, 0.5f}); }},
    {diag::kPosteriorNotNormalized,
     [](CaseBundle& b) { b.scales[0].source_posteriors = FeatureMatrix(2, 2, {0.5f, 0.6f, 0.5f, 0.5f}); }},
  };
}

// Single-scale bundle from per-class rows and global rows.
inline CaseBundle make_case(const std::string& id, std::map<std::uint32_t, std::vector<std::vector<double>>> classes,
                            const std::vector<std::vector<double>>& global) {
  CaseBundle b;
  b.case_id = id;
  std::uint32_t max_class = 1;
  ScaleSamples sc;
  sc.channels = static_cast<std::uint32_t>(global.empty() ? classes.begin()->second.front().size()
                                                          : global.front().size());
  for (auto& [k, rows] : classes) {
    sc.class_samples.emplace(k, matrix_from(rows));
    max_class = std::max(max_class, k);
  }
  sc.global_samples = global.empty() ? FeatureMatrix(0, sc.channels) : matrix_from(global);
  b.num_classes = max_class + 1;
  b.scales.push_back(std::move(sc));
  return b;
}

}  // namespace ccfv::testing
