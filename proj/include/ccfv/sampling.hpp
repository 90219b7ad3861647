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

// Stratified foreground sampling and global sampling of voxel features.
//
// Foreground classes are sampled proportionally to their voxel count,
// clamped to [per_class_min, per_class_max]; the global sample draws from
// every voxel, background included. Deeper decoder scales get a halved
// global budget per step toward the bottleneck.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccfv/error.hpp"
#include "ccfv/feature_matrix.hpp"
#include "ccfv/interchange.hpp"
#include "ccfv/rng.hpp"

namespace ccfv {

struct SamplingConfig {
  double rate = 0.05;
  std::size_t per_class_max = 500;
  std::size_t per_class_min = 10;
  std::size_t global_base = 300;
  std::size_t global_min = 32;
  std::uint64_t seed = 42;

  void validate() const {
    if (!(rate > 0.0 && rate <= 1.0)) throw std::invalid_argument("sampling rate must be in (0, 1]");
    if (per_class_min > per_class_max) {
      throw std::invalid_argument("per_class_min must not exceed per_class_max");
    }
    if (global_min > global_base) throw std::invalid_argument("global_min must not exceed global_base");
  }
};

// Features and labels of one case (or one patch of it) at one scale.
struct DenseFeatureVolume {
  std::uint32_t num_classes = 2;
  FeatureMatrix features;  // voxels x channels
  std::vector<std::uint32_t> labels;

  std::size_t voxels() const { return features.rows; }
  std::size_t channels() const { return features.cols; }

  void validate() const {
    if (labels.size() != features.rows) {
      throw std::invalid_argument("volume: label count differs from feature rows");
    }
    for (std::uint32_t l : labels) {
      if (l >= num_classes) throw std::invalid_argument("volume: label outside [0, num_classes)");
    }
    if (!features.all_finite()) throw std::invalid_argument("volume: non-finite feature");
  }

  std::vector<std::size_t> class_voxel_counts() const {
    std::vector<std::size_t> counts(num_classes, 0);
    for (std::uint32_t l : labels) ++counts[l];
    return counts;
  }
};

// Identifies the stream a draw belongs to; combined with SamplingConfig::seed.
struct SampleContext {
  std::string case_id;
  std::size_t scale_index = 1;
};

namespace detail {

inline constexpr std::uint64_t kGlobalStreamTag = 0xffffffffULL;

inline std::uint64_t stream_seed(const SamplingConfig& config, const SampleContext& ctx,
                                 std::uint64_t class_tag, std::uint64_t patch = 0) {
  return SeedMixer(config.seed).add(ctx.case_id).add(ctx.scale_index).add(class_tag).add(patch).value();
}

inline FeatureMatrix gather_rows(const FeatureMatrix& src, std::span<const std::size_t> rows) {
  FeatureMatrix out(0, src.cols);
  out.values.reserve(rows.size() * src.cols);
  for (std::size_t r : rows) out.append_row(src.row(r));
  return out;
}

// Splits `total` across parts proportionally to `weights` by cumulative
// rounding: parts sum to `total` exactly and each is within 1 of its share.
inline std::vector<std::size_t> proportional_split(std::size_t total,
                                                   std::span<const std::size_t> weights) {
  std::size_t weight_sum = 0;
  for (std::size_t w : weights) weight_sum += w;
  std::vector<std::size_t> out(weights.size(), 0);
  if (weight_sum == 0) return out;
  std::size_t cum = 0;
  std::size_t prev = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    cum += weights[i];
    const auto upto = static_cast<std::size_t>(
        std::llround(static_cast<double>(total) * static_cast<double>(cum) /
                     static_cast<double>(weight_sum)));
    out[i] = upto - prev;
    prev = upto;
  }
  return out;
}

}  // namespace detail

// Sample size for a class with `class_voxels` voxels; nullopt when the class
// falls below per_class_min and is omitted.
inline std::optional<std::size_t> class_sample_count(std::size_t class_voxels,
                                                     const SamplingConfig& config) {
  if (class_voxels == 0 || class_voxels < config.per_class_min) return std::nullopt;
  const auto proportional =
      static_cast<std::size_t>(std::llround(config.rate * static_cast<double>(class_voxels)));
  const std::size_t hi = std::min(config.per_class_max, class_voxels);
  return std::clamp(proportional, std::min(config.per_class_min, hi), hi);
}

// Global sample size L at a scale: halves per step toward the bottleneck,
// floored at global_min.
inline std::size_t scale_sample_budget(std::size_t scale_index, const SamplingConfig& config) {
  if (scale_index < 1) throw std::invalid_argument("scale index is 1-based");
  const std::size_t shift = scale_index - 1;
  const std::size_t halved = shift >= 64 ? 0 : (config.global_base >> shift);
  return std::max(config.global_min, halved);
}

// Row indices (into the volume) selected for `class_id`, in draw order.
inline std::optional<std::vector<std::size_t>> stratified_class_indices(
    const DenseFeatureVolume& volume, const SamplingConfig& config, std::uint32_t class_id,
    const SampleContext& ctx) {
  if (class_id == 0) throw std::invalid_argument("background class 0 is never class-sampled");
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < volume.labels.size(); ++i) {
    if (volume.labels[i] == class_id) members.push_back(i);
  }
  const auto n = class_sample_count(members.size(), config);
  if (!n) return std::nullopt;
  const auto picks =
      choose_without_replacement(members.size(), *n, detail::stream_seed(config, ctx, class_id));
  std::vector<std::size_t> rows;
  rows.reserve(picks.size());
  for (std::size_t p : picks) rows.push_back(members[p]);
  return rows;
}

inline std::optional<FeatureMatrix> stratified_class_sample(const DenseFeatureVolume& volume,
                                                            const SamplingConfig& config,
                                                            std::uint32_t class_id,
                                                            const SampleContext& ctx) {
  auto rows = stratified_class_indices(volume, config, class_id, ctx);
  if (!rows) return std::nullopt;
  return detail::gather_rows(volume.features, *rows);
}

inline std::vector<std::size_t> global_sample_indices(const DenseFeatureVolume& volume,
                                                      std::size_t count,
                                                      const SamplingConfig& config,
                                                      const SampleContext& ctx) {
  if (count < 2) throw std::invalid_argument("global sample count must be >= 2");
  return choose_without_replacement(volume.voxels(), count,
                                    detail::stream_seed(config, ctx, detail::kGlobalStreamTag));
}

inline FeatureMatrix global_sample(const DenseFeatureVolume& volume, std::size_t count,
                                   const SamplingConfig& config, const SampleContext& ctx) {
  const auto rows = global_sample_indices(volume, count, config, ctx);
  return detail::gather_rows(volume.features, rows);
}

// Dense path: every foreground class plus the scale's global budget.
inline ScaleSamples sample_dense(const DenseFeatureVolume& volume, const SamplingConfig& config,
                                 const SampleContext& ctx) {
  config.validate();
  volume.validate();
  ScaleSamples out;
  out.channels = static_cast<std::uint32_t>(volume.channels());
  for (std::uint32_t k = 1; k < volume.num_classes; ++k) {
    if (auto m = stratified_class_sample(volume, config, k, ctx)) out.class_samples.emplace(k, std::move(*m));
  }
  out.global_samples =
      global_sample(volume, scale_sample_budget(ctx.scale_index, config), config, ctx);
  return out;
}

// Patch path: samples each fragment of a case independently and concatenates
// the results, never stitching the fragments into one volume. Per-patch
// budgets are the dense-path totals split in proportion to each patch's share
// of class (resp. total) voxels.
inline ScaleSamples sample_from_patches(std::span<const DenseFeatureVolume> patches,
                                        const SamplingConfig& config, const SampleContext& ctx) {
  if (patches.empty()) throw std::invalid_argument("sample_from_patches: empty patch stream");
  config.validate();
  const std::size_t channels = patches.front().channels();
  const std::uint32_t num_classes = patches.front().num_classes;
  for (const auto& p : patches) {
    if (p.channels() != channels) {
      throw std::invalid_argument("sample_from_patches: channel mismatch across fragments");
    }
    if (p.num_classes != num_classes) {
      throw std::invalid_argument("sample_from_patches: class count mismatch across fragments");
    }
    p.validate();
  }

  // Label-only pass: class and voxel totals.
  std::vector<std::vector<std::size_t>> per_patch_counts;
  std::vector<std::size_t> patch_voxels;
  std::vector<std::size_t> totals(num_classes, 0);
  for (const auto& p : patches) {
    per_patch_counts.push_back(p.class_voxel_counts());
    patch_voxels.push_back(p.voxels());
    for (std::uint32_t k = 0; k < num_classes; ++k) totals[k] += per_patch_counts.back()[k];
  }

  ScaleSamples out;
  out.channels = static_cast<std::uint32_t>(channels);
  for (std::uint32_t k = 1; k < num_classes; ++k) {
    const auto n = class_sample_count(totals[k], config);
    if (!n) continue;
    std::vector<std::size_t> weights;
    for (const auto& c : per_patch_counts) weights.push_back(c[k]);
    const auto split = detail::proportional_split(*n, weights);
    FeatureMatrix acc(0, channels);
    for (std::size_t p = 0; p < patches.size(); ++p) {
      if (split[p] == 0) continue;
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < patches[p].labels.size(); ++i) {
        if (patches[p].labels[i] == k) members.push_back(i);
      }
      const auto picks = choose_without_replacement(members.size(), split[p],
                                                    detail::stream_seed(config, ctx, k, p));
      for (std::size_t pick : picks) acc.append_row(patches[p].features.row(members[pick]));
    }
    out.class_samples.emplace(k, std::move(acc));
  }

  std::size_t total_voxels = 0;
  for (std::size_t v : patch_voxels) total_voxels += v;
  const std::size_t budget = std::min(scale_sample_budget(ctx.scale_index, config), total_voxels);
  const auto split = detail::proportional_split(budget, patch_voxels);
  FeatureMatrix global(0, channels);
  for (std::size_t p = 0; p < patches.size(); ++p) {
    const auto picks = choose_without_replacement(
        patch_voxels[p], split[p], detail::stream_seed(config, ctx, detail::kGlobalStreamTag, p));
    for (std::size_t pick : picks) global.append_row(patches[p].features.row(pick));
  }
  out.global_samples = std::move(global);
  return out;
}

}  // namespace ccfv
