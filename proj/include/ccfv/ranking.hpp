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

// Ranking of models by estimated transferability and correlation of the
// estimates with fine-tuned performance.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccfv/ccfv.hpp"
#include "ccfv/error.hpp"

namespace ccfv {

using ModelValues = std::map<std::string, double>;

// Weight of the model at 0-based performance rank r (0 = best).
using RankWeight = std::function<double(std::size_t)>;

inline double hyperbolic_weight(std::size_t rank) { return 1.0 / (1.0 + static_cast<double>(rank)); }

namespace detail {

inline void require_matching_keys(const ModelValues& a, const ModelValues& b) {
  if (a.size() != b.size() ||
      !std::equal(a.begin(), a.end(), b.begin(), [](const auto& x, const auto& y) { return x.first == y.first; })) {
    throw std::invalid_argument("estimates and performances cover different models");
  }
  if (a.size() < 2) throw std::invalid_argument("correlation needs >= 2 models");
}

inline int sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace detail

// Weighted Kendall tau. Models are ranked by performance (best first); pair
// (i, j) carries weight w(r_i) + w(r_j) and contributes its concordance sign.
// Estimate ties contribute 0 to the numerator and full weight to the
// denominator. Tied performances are rejected.
inline double weighted_kendall_tau(const ModelValues& estimates, const ModelValues& performances,
                                   const RankWeight& weight = hyperbolic_weight) {
  detail::require_matching_keys(estimates, performances);
  std::vector<std::string> ids;
  for (const auto& [id, p] : performances) ids.push_back(id);
  std::sort(ids.begin(), ids.end(), [&](const std::string& a, const std::string& b) {
    return performances.at(a) > performances.at(b);
  });
  for (std::size_t i = 1; i < ids.size(); ++i) {
    if (performances.at(ids[i]) == performances.at(ids[i - 1])) {
      throw std::invalid_argument("tied performance between '" + ids[i - 1] + "' and '" + ids[i] + "'");
    }
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      const double w = weight(i) + weight(j);
      const int s = detail::sign((estimates.at(ids[i]) - estimates.at(ids[j])) *
                                 (performances.at(ids[i]) - performances.at(ids[j])));
      num += w * s;
      den += w;
    }
  }
  return std::clamp(num / den, -1.0, 1.0);
}

inline double pearson(const ModelValues& estimates, const ModelValues& performances) {
  detail::require_matching_keys(estimates, performances);
  const auto n = static_cast<double>(estimates.size());
  double mt = 0.0, mp = 0.0;
  for (const auto& [id, t] : estimates) {
    mt += t;
    mp += performances.at(id);
  }
  mt /= n;
  mp /= n;
  double cov = 0.0, vt = 0.0, vp = 0.0;
  for (const auto& [id, t] : estimates) {
    const double dt = t - mt;
    const double dp = performances.at(id) - mp;
    cov += dt * dp;
    vt += dt * dt;
    vp += dp * dp;
  }
  if (vt == 0.0 || vp == 0.0) throw std::invalid_argument("Pearson undefined for a constant series");
  return std::clamp(cov / std::sqrt(vt * vp), -1.0, 1.0);
}

struct RankedModel {
  std::string model_id;
  double estimate = 0.0;
  double performance = 0.0;
};

// Descending by estimate, ties by model_id ascending.
inline void sort_ranking(std::vector<RankedModel>& rows) {
  std::sort(rows.begin(), rows.end(), [](const RankedModel& a, const RankedModel& b) {
    if (a.estimate != b.estimate) return a.estimate > b.estimate;
    return a.model_id < b.model_id;
  });
}

inline std::vector<RankedModel> rank_models(std::span<const ModelScore> scores) {
  if (scores.empty()) throw std::invalid_argument("rank_models: no scores");
  std::set<std::string> seen;
  std::vector<RankedModel> out;
  for (const auto& s : scores) {
    if (!seen.insert(s.model_id).second) {
      throw std::invalid_argument("rank_models: duplicate model_id '" + s.model_id + "'");
    }
    out.push_back({s.model_id, s.transferability, 0.0});
  }
  sort_ranking(out);
  return out;
}

struct CorrelationReport {
  double weighted_tau = 0.0;
  double pearson = 0.0;
  std::size_t n_models = 0;
  std::vector<RankedModel> ranking;
};

inline CorrelationReport correlate(const ModelValues& estimates, const ModelValues& performances,
                                   const RankWeight& weight = hyperbolic_weight) {
  CorrelationReport r;
  r.weighted_tau = weighted_kendall_tau(estimates, performances, weight);
  r.pearson = pearson(estimates, performances);
  r.n_models = estimates.size();
  for (const auto& [id, t] : estimates) r.ranking.push_back({id, t, performances.at(id)});
  sort_ranking(r.ranking);
  return r;
}

}  // namespace ccfv
