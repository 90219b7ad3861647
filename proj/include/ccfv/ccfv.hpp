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

// The CC-FV transferability score.
//
// For each decoder scale i:
//   class consistency  C_cons = sum over foreground classes of the mean
//                      distance between per-case class Gaussians, taken over
//                      case pairs that both contain the class;
//   feature variety    F_v = mean over cases of 1 / E_s(global samples), with
//                      E_s the hyperspherical energy of the unit-normalized
//                      global features.
// The model's transferability is the mean over scales of log(F_v / C_cons).
// Lower class distances and more dispersed features both raise the score.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccfv/error.hpp"
#include "ccfv/gaussian.hpp"
#include "ccfv/interchange.hpp"
#include "ccfv/rng.hpp"

namespace ccfv {

enum class DistanceMetric { kW2, kKl, kBhattacharyya };

inline std::string to_string(DistanceMetric m) {
  switch (m) {
    case DistanceMetric::kW2: return "w2";
    case DistanceMetric::kKl: return "kl";
    case DistanceMetric::kBhattacharyya: return "bha";
  }
  return "?";
}

inline DistanceMetric parse_distance_metric(const std::string& name) {
  if (name == "w2") return DistanceMetric::kW2;
  if (name == "kl") return DistanceMetric::kKl;
  if (name == "bha" || name == "bhattacharyya") return DistanceMetric::kBhattacharyya;
  throw std::invalid_argument("unknown distance metric '" + name + "' (w2|kl|bha)");
}

inline constexpr double kHseDistanceFloor = 1e-8;

struct CcfvConfig {
  DistanceMetric distance_metric = DistanceMetric::kW2;
  std::size_t pair_budget = 2016;  // C(64, 2)
  double hse_exponent = 1.0;
  std::optional<std::vector<std::size_t>> scales_used;  // nullopt: every scale
  double epsilon_floor = 1e-12;
  double shrinkage = kDefaultShrinkage;
  std::uint64_t seed = 42;

  void validate() const {
    if (pair_budget < 1) throw std::invalid_argument("pair_budget must be >= 1");
    if (!(epsilon_floor > 0.0)) throw std::invalid_argument("epsilon_floor must be > 0");
    if (!(hse_exponent >= 0.0)) throw std::invalid_argument("hse exponent must be >= 0");
    if (shrinkage < 0.0) throw std::invalid_argument("shrinkage must be >= 0");
  }
};

struct ScaleScore {
  std::size_t scale_index = 0;
  double c_cons = 0.0;
  double f_v = 0.0;
};

struct ModelScore {
  std::string model_id;
  std::vector<ScaleScore> per_scale;
  double transferability = 0.0;
};

namespace detail {

inline double pair_distance(const GaussianSummary& a, const GaussianSummary& b, DistanceMetric m) {
  switch (m) {
    case DistanceMetric::kW2: return w2_distance(a, b);
    case DistanceMetric::kBhattacharyya: return bhattacharyya_gauss(a, b);
    case DistanceMetric::kKl: return 0.5 * (kl_divergence_gauss(a, b) + kl_divergence_gauss(b, a));
  }
  return 0.0;
}

inline void require_scale(std::span<const CaseBundle> bundles, std::size_t scale_index) {
  for (const auto& b : bundles) {
    if (scale_index < 1 || scale_index > b.scales.size()) {
      throw std::invalid_argument("scale " + std::to_string(scale_index) + " not present in case '" +
                                  b.case_id + "'");
    }
  }
}

}  // namespace detail

// Sum over foreground classes of the mean pairwise distance between the
// per-case class Gaussians. Pairs are unordered; when more than pair_budget
// pairs share a class, a seeded uniform subset of pair_budget pairs is used.
// Class entries with fewer than 2 rows cannot be fitted and count as absent.
inline double class_consistency(std::span<const CaseBundle> bundles, std::size_t scale_index,
                                const CcfvConfig& config) {
  config.validate();
  if (bundles.size() < 2) {
    throw EstimatorError(error_code::kDegenerateInput, "class consistency needs >= 2 cases");
  }
  detail::require_scale(bundles, scale_index);

  // class id -> indices of cases holding it
  std::map<std::uint32_t, std::vector<std::size_t>> holders;
  for (std::size_t c = 0; c < bundles.size(); ++c) {
    for (const auto& [k, m] : bundles[c].scale(scale_index).class_samples) {
      if (m.rows >= 2) holders[k].push_back(c);
    }
  }

  double total = 0.0;
  bool any_pair = false;
  for (const auto& [k, cases] : holders) {
    const std::size_t h = cases.size();
    if (h < 2) continue;
    any_pair = true;

    std::vector<GaussianSummary> fits;
    fits.reserve(h);
    for (std::size_t c : cases) {
      fits.push_back(fit_gaussian(bundles[c].scale(scale_index).class_samples.at(k), config.shrinkage));
    }

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = i + 1; j < h; ++j) pairs.emplace_back(i, j);
    }
    if (pairs.size() > config.pair_budget) {
      auto pick = choose_without_replacement(
          pairs.size(), config.pair_budget,
          SeedMixer(config.seed).add(std::uint64_t{scale_index}).add(std::uint64_t{k}).value());
      std::sort(pick.begin(), pick.end());
      std::vector<std::pair<std::size_t, std::size_t>> kept;
      kept.reserve(pick.size());
      for (std::size_t p : pick) kept.push_back(pairs[p]);
      pairs = std::move(kept);
    }

    double sum = 0.0;
    for (const auto& [i, j] : pairs) sum += detail::pair_distance(fits[i], fits[j], config.distance_metric);
    total += sum / static_cast<double>(pairs.size());
  }
  if (!any_pair) {
    throw EstimatorError(error_code::kNoSharedClass,
                         "no foreground class is shared by any case pair at scale " +
                             std::to_string(scale_index));
  }
  return total;
}

// Riesz s-energy over ordered pairs of the L2-normalized rows:
//   s > 0: sum ||v_i - v_j||^-s      s = 0: sum log(1 / ||v_i - v_j||)
// Zero rows are dropped; distances are floored at 1e-8.
inline double hyperspherical_energy(const FeatureMatrix& points, double s) {
  if (!(s >= 0.0)) throw std::invalid_argument("HSE exponent must be >= 0");
  std::vector<Eigen::VectorXd> unit;
  unit.reserve(points.rows);
  for (std::size_t i = 0; i < points.rows; ++i) {
    Eigen::VectorXd v(points.cols);
    for (std::size_t j = 0; j < points.cols; ++j) v[static_cast<Eigen::Index>(j)] = points(i, j);
    const double norm = v.norm();
    if (norm > 0.0) unit.push_back(v / norm);
  }
  if (unit.size() < 2) {
    throw EstimatorError(error_code::kDegenerateInput,
                         "hyperspherical energy needs >= 2 nonzero rows, got " +
                             std::to_string(unit.size()));
  }
  double half = 0.0;
  for (std::size_t i = 0; i < unit.size(); ++i) {
    for (std::size_t j = i + 1; j < unit.size(); ++j) {
      const double d = std::max((unit[i] - unit[j]).norm(), kHseDistanceFloor);
      half += s > 0.0 ? std::pow(d, -s) : -std::log(d);
    }
  }
  return 2.0 * half;
}

// Mean over cases of the inverse hyperspherical energy of the global samples.
inline double feature_variety(std::span<const CaseBundle> bundles, std::size_t scale_index,
                              const CcfvConfig& config) {
  config.validate();
  if (bundles.empty()) throw EstimatorError(error_code::kDegenerateInput, "no cases");
  detail::require_scale(bundles, scale_index);
  double sum = 0.0;
  for (const auto& b : bundles) {
    const double energy = hyperspherical_energy(b.scale(scale_index).global_samples, config.hse_exponent);
    if (!(energy > 0.0)) {
      throw EstimatorError(error_code::kDegenerateInput,
                           "non-positive hyperspherical energy in case '" + b.case_id + "'");
    }
    sum += 1.0 / energy;
  }
  return sum / static_cast<double>(bundles.size());
}

inline double log_ratio(double f_v, double c_cons, double epsilon_floor) {
  return std::log(f_v / std::max(c_cons, epsilon_floor));
}

// Mean over scales of log(f_v / max(c_cons, epsilon_floor)).
inline double aggregate_transferability(std::span<const ScaleScore> per_scale, double epsilon_floor) {
  if (per_scale.empty()) throw std::invalid_argument("no scales to aggregate");
  double sum = 0.0;
  for (const auto& s : per_scale) sum += log_ratio(s.f_v, s.c_cons, epsilon_floor);
  return sum / static_cast<double>(per_scale.size());
}

inline ModelScore ccfv_score(const std::string& model_id, std::span<const CaseBundle> bundles,
                             const CcfvConfig& config) {
  config.validate();
  if (bundles.empty()) throw EstimatorError(error_code::kDegenerateInput, "no cases");
  if (auto d = validate_dataset(bundles); !d.empty()) {
    throw std::invalid_argument("inconsistent dataset: " + d.front().to_string());
  }
  const std::size_t depth = bundles.front().scales.size();
  std::vector<std::size_t> scales;
  if (config.scales_used) {
    scales = *config.scales_used;
    if (scales.empty()) throw std::invalid_argument("scales_used is empty");
    for (std::size_t s : scales) {
      if (s < 1 || s > depth) {
        throw std::invalid_argument("scale " + std::to_string(s) + " outside 1.." + std::to_string(depth));
      }
    }
  } else {
    for (std::size_t s = 1; s <= depth; ++s) scales.push_back(s);
  }

  ModelScore out;
  out.model_id = model_id;
  for (std::size_t s : scales) {
    ScaleScore sc;
    sc.scale_index = s;
    sc.c_cons = class_consistency(bundles, s, config);
    sc.f_v = feature_variety(bundles, s, config);
    out.per_scale.push_back(sc);
  }
  out.transferability = aggregate_transferability(out.per_scale, config.epsilon_floor);
  return out;
}

}  // namespace ccfv
