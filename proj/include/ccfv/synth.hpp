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

// Synthetic model banks with a controllable quality knob q in [0, 1].
//
// All models see the same cases and the same standard-normal draws; only q
// differs. For foreground class k at scale s, case c samples
//     x = q * a_k + (1 - q) * o_ck + noise_sigma * z
// where a_k is a dataset-level anchor on the unit sphere and o_ck a per-case
// offset, so cases agree more as q grows. Global samples mix the class
// clusters with background points c0 + spread(q) * g whose spread grows
// geometrically with q, so features disperse more as q grows. The ground-truth
// performance of a model is q itself.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ccfv/interchange.hpp"
#include "ccfv/rng.hpp"
#include "ccfv/sampling.hpp"

namespace ccfv {

struct SynthSpec {
  std::size_t n_models = 6;
  std::size_t n_cases = 8;
  std::size_t n_classes = 2;  // foreground classes; bundles carry n_classes + 1
  std::vector<std::size_t> channels_per_scale{16, 32};
  // model id -> quality; empty means n_models evenly spaced values over [0, 1]
  std::vector<std::pair<std::string, double>> quality;
  double noise_sigma = 0.05;
  std::uint64_t seed = 42;
  bool posteriors = true;
  SamplingConfig sampling;

  // Magnitude of the per-case class offset o_ck.
  double offset_scale = 0.3;
  // Background spread at q = 0 and q = 1.
  double spread_low = 0.05;
  double spread_high = 2.0;
  std::size_t case_voxels = 20000;
  std::size_t class_voxels_low = 600;
  std::size_t class_voxels_high = 2400;

  std::vector<std::pair<std::string, double>> resolved_quality() const {
    if (!quality.empty()) return quality;
    std::vector<std::pair<std::string, double>> out;
    for (std::size_t m = 0; m < n_models; ++m) {
      const double q = n_models == 1 ? 1.0 : static_cast<double>(m) / static_cast<double>(n_models - 1);
      out.emplace_back(model_name(m), q);
    }
    return out;
  }

  static std::string model_name(std::size_t m) {
    std::string digits = std::to_string(m);
    return "model_" + std::string(digits.size() < 2 ? 2 - digits.size() : 0, '0') + digits;
  }

  static std::string case_name(std::size_t c) {
    std::string digits = std::to_string(c);
    return "case_" + std::string(digits.size() < 3 ? 3 - digits.size() : 0, '0') + digits;
  }

  void validate() const {
    sampling.validate();
    if (channels_per_scale.empty()) throw std::invalid_argument("synth: channels_per_scale is empty");
    for (std::size_t c : channels_per_scale) {
      if (c == 0) throw std::invalid_argument("synth: zero channels");
    }
    if (n_classes < 1) throw std::invalid_argument("synth: need >= 1 foreground class");
    if (n_cases < 1) throw std::invalid_argument("synth: need >= 1 case");
    if (!(noise_sigma > 0.0)) throw std::invalid_argument("synth: noise_sigma must be > 0");
    if (class_voxels_low > class_voxels_high) throw std::invalid_argument("synth: class voxel range");
    if (class_voxels_high * n_classes >= case_voxels) {
      throw std::invalid_argument("synth: foreground exceeds case size");
    }
    const auto q = resolved_quality();
    if (q.empty()) throw std::invalid_argument("synth: no models");
    std::map<double, std::string> seen_q;
    std::map<std::string, int> seen_id;
    for (const auto& [id, v] : q) {
      if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("synth: quality outside [0, 1]");
      if (!seen_q.emplace(v, id).second) throw std::invalid_argument("synth: duplicate quality values");
      if (!seen_id.emplace(id, 0).second) throw std::invalid_argument("synth: duplicate model id");
    }
  }
};

struct SynthBank {
  std::vector<std::pair<std::string, std::vector<CaseBundle>>> models;
  std::vector<PerformanceRecord> performance;
};

namespace detail {

class Gaussian01 {
 public:
  explicit Gaussian01(std::uint64_t seed) : rng_(seed) {}
  double operator()() { return dist_(rng_); }
  Eigen::VectorXd vector(std::size_t n) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = (*this)();
    return v;
  }
  Eigen::VectorXd unit(std::size_t n) {
    Eigen::VectorXd v = vector(n);
    return v / v.norm();
  }

 private:
  Rng rng_;
  std::normal_distribution<double> dist_;
};

enum class Stream : std::uint64_t { kAnchor = 1, kBackground, kOffset, kClassNoise, kGlobalNoise, kVoxels };

inline std::uint64_t synth_seed(const SynthSpec& spec, Stream stream, std::size_t scale,
                                std::size_t cls = 0, std::size_t case_index = 0) {
  return SeedMixer(spec.seed)
      .add(static_cast<std::uint64_t>(stream))
      .add(std::uint64_t{scale})
      .add(std::uint64_t{cls})
      .add(std::uint64_t{case_index})
      .value();
}

inline void put_row(FeatureMatrix& m, std::size_t row, const Eigen::VectorXd& v) {
  for (std::size_t j = 0; j < m.cols; ++j) m(row, j) = static_cast<float>(v[static_cast<Eigen::Index>(j)]);
}

// Case-level draws shared by every model.
struct CaseLayout {
  std::vector<std::size_t> class_voxels;  // index k-1
  // [scale][class-1] -> offset o_ck, class noise rows, global-cluster noise rows
  std::vector<std::vector<Eigen::VectorXd>> offsets;
  std::vector<std::vector<Eigen::MatrixXd>> class_noise;
  std::vector<std::vector<Eigen::MatrixXd>> global_noise;
  std::vector<Eigen::MatrixXd> background_noise;  // [scale]
};

}  // namespace detail

inline SynthBank generate_bank(const SynthSpec& spec) {
  spec.validate();
  const std::size_t depth = spec.channels_per_scale.size();
  const std::size_t k_count = spec.n_classes;

  std::vector<std::vector<Eigen::VectorXd>> anchors(depth);
  std::vector<Eigen::VectorXd> background(depth);
  for (std::size_t s = 0; s < depth; ++s) {
    const std::size_t ch = spec.channels_per_scale[s];
    for (std::size_t k = 1; k <= k_count; ++k) {
      anchors[s].push_back(detail::Gaussian01(detail::synth_seed(spec, detail::Stream::kAnchor, s + 1, k)).unit(ch));
    }
    background[s] = detail::Gaussian01(detail::synth_seed(spec, detail::Stream::kBackground, s + 1)).unit(ch);
  }

  std::vector<detail::CaseLayout> layouts(spec.n_cases);
  for (std::size_t c = 0; c < spec.n_cases; ++c) {
    detail::CaseLayout& lay = layouts[c];
    Rng voxel_rng(detail::synth_seed(spec, detail::Stream::kVoxels, 0, 0, c));
    const std::size_t span = spec.class_voxels_high - spec.class_voxels_low + 1;
    for (std::size_t k = 1; k <= k_count; ++k) {
      lay.class_voxels.push_back(spec.class_voxels_low + uniform_below(voxel_rng, span));
    }
    lay.offsets.resize(depth);
    lay.class_noise.resize(depth);
    lay.global_noise.resize(depth);
    for (std::size_t s = 0; s < depth; ++s) {
      const std::size_t ch = spec.channels_per_scale[s];
      const std::size_t budget = scale_sample_budget(s + 1, spec.sampling);
      std::size_t fg_global = 0;
      for (std::size_t k = 1; k <= k_count; ++k) {
        lay.offsets[s].push_back(
            spec.offset_scale *
            detail::Gaussian01(detail::synth_seed(spec, detail::Stream::kOffset, s + 1, k, c)).unit(ch));
        const std::size_t rows = class_sample_count(lay.class_voxels[k - 1], spec.sampling).value_or(0);
        detail::Gaussian01 noise(detail::synth_seed(spec, detail::Stream::kClassNoise, s + 1, k, c));
        Eigen::MatrixXd z(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(ch));
        for (Eigen::Index i = 0; i < z.rows(); ++i) z.row(i) = noise.vector(ch).transpose();
        lay.class_noise[s].push_back(std::move(z));

        const auto share = static_cast<std::size_t>(
            std::llround(static_cast<double>(budget) * static_cast<double>(lay.class_voxels[k - 1]) /
                         static_cast<double>(spec.case_voxels)));
        fg_global += share;
        detail::Gaussian01 gnoise(detail::synth_seed(spec, detail::Stream::kGlobalNoise, s + 1, k, c));
        Eigen::MatrixXd g(static_cast<Eigen::Index>(share), static_cast<Eigen::Index>(ch));
        for (Eigen::Index i = 0; i < g.rows(); ++i) g.row(i) = gnoise.vector(ch).transpose();
        lay.global_noise[s].push_back(std::move(g));
      }
      detail::Gaussian01 bnoise(detail::synth_seed(spec, detail::Stream::kGlobalNoise, s + 1, 0, c));
      const std::size_t bg_rows = budget - std::min(budget, fg_global);
      Eigen::MatrixXd b(static_cast<Eigen::Index>(bg_rows), static_cast<Eigen::Index>(ch));
      for (Eigen::Index i = 0; i < b.rows(); ++i) {
        b.row(i) = bnoise.vector(ch).transpose() / std::sqrt(static_cast<double>(ch));
      }
      lay.background_noise.push_back(std::move(b));
    }
  }

  SynthBank bank;
  for (const auto& [model_id, q] : spec.resolved_quality()) {
    const double spread = spec.spread_low * std::pow(spec.spread_high / spec.spread_low, q);
    std::vector<CaseBundle> cases;
    for (std::size_t c = 0; c < spec.n_cases; ++c) {
      const detail::CaseLayout& lay = layouts[c];
      CaseBundle b;
      b.case_id = SynthSpec::case_name(c);
      b.num_classes = static_cast<std::uint32_t>(k_count + 1);
      for (std::size_t s = 0; s < depth; ++s) {
        const std::size_t ch = spec.channels_per_scale[s];
        ScaleSamples sc;
        sc.channels = static_cast<std::uint32_t>(ch);
        std::vector<Eigen::VectorXd> class_rows;  // for posteriors, in class order
        std::vector<Eigen::VectorXd> global_rows;
        for (std::size_t k = 1; k <= k_count; ++k) {
          const Eigen::VectorXd center = q * anchors[s][k - 1] + (1.0 - q) * lay.offsets[s][k - 1];
          const Eigen::MatrixXd& z = lay.class_noise[s][k - 1];
          if (z.rows() > 0) {
            FeatureMatrix m(static_cast<std::size_t>(z.rows()), ch);
            for (Eigen::Index i = 0; i < z.rows(); ++i) {
              const Eigen::VectorXd x = center + spec.noise_sigma * z.row(i).transpose();
              detail::put_row(m, static_cast<std::size_t>(i), x);
              class_rows.push_back(x);
            }
            sc.class_samples.emplace(static_cast<std::uint32_t>(k), std::move(m));
          }
          const Eigen::MatrixXd& g = lay.global_noise[s][k - 1];
          for (Eigen::Index i = 0; i < g.rows(); ++i) {
            global_rows.push_back(center + spec.noise_sigma * g.row(i).transpose());
          }
        }
        const Eigen::MatrixXd& bg = lay.background_noise[s];
        for (Eigen::Index i = 0; i < bg.rows(); ++i) {
          global_rows.push_back(background[s] + spread * bg.row(i).transpose());
        }
        sc.global_samples = FeatureMatrix(global_rows.size(), ch);
        for (std::size_t i = 0; i < global_rows.size(); ++i) detail::put_row(sc.global_samples, i, global_rows[i]);

        // Source head stand-in: softmax over distances to background + class anchors.
        if (spec.posteriors && s == 0 && !class_rows.empty()) {
          FeatureMatrix post(class_rows.size(), k_count + 1);
          for (std::size_t i = 0; i < class_rows.size(); ++i) {
            Eigen::VectorXd logits(static_cast<Eigen::Index>(k_count + 1));
            logits[0] = -(class_rows[i] - background[s]).squaredNorm() / 0.5;
            for (std::size_t k = 1; k <= k_count; ++k) {
              logits[static_cast<Eigen::Index>(k)] = -(class_rows[i] - anchors[s][k - 1]).squaredNorm() / 0.5;
            }
            const Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp().matrix();
            const Eigen::VectorXd p = e / e.sum();
            for (std::size_t z = 0; z <= k_count; ++z) post(i, z) = static_cast<float>(p[static_cast<Eigen::Index>(z)]);
          }
          sc.source_posteriors = std::move(post);
        }
        b.scales.push_back(std::move(sc));
      }
      cases.push_back(std::move(b));
    }
    bank.models.emplace_back(model_id, std::move(cases));
    bank.performance.push_back({model_id, q});
  }
  return bank;
}

}  // namespace ccfv
