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

// Baseline transferability estimators evaluated on the same sampled voxel
// features as CC-FV: LEEP, LogME, GBC and TransRate. All of them consume the
// scale nearest the output (scale 1).

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ccfv/error.hpp"
#include "ccfv/gaussian.hpp"
#include "ccfv/interchange.hpp"

namespace ccfv {

struct LabeledFeatureSet {
  FeatureMatrix features;
  std::vector<std::uint32_t> labels;
  std::optional<FeatureMatrix> posteriors;  // n x source classes

  std::size_t size() const { return features.rows; }
};

struct AssembledSet {
  LabeledFeatureSet set;
  std::vector<Diagnostic> warnings;
};

// Concatenates the class-stratified samples of every case at `scale_index`
// (class order within a case, case order across cases). Posteriors are kept
// only when every case carries them.
inline AssembledSet assemble_baseline_set(std::span<const CaseBundle> bundles, std::size_t scale_index = 1) {
  if (bundles.empty()) throw EstimatorError(error_code::kDegenerateInput, "no cases to assemble");
  AssembledSet out;
  std::optional<std::size_t> channels;
  std::optional<std::size_t> source_classes;
  bool all_posteriors = true;
  for (const auto& b : bundles) {
    const ScaleSamples& sc = b.scale(scale_index);
    if (channels && *channels != sc.channels) {
      throw std::invalid_argument("assemble_baseline_set: channel count differs across cases");
    }
    channels = sc.channels;
    if (!sc.source_posteriors) {
      all_posteriors = false;
    } else if (source_classes && *source_classes != sc.source_posteriors->cols) {
      throw std::invalid_argument("assemble_baseline_set: source class count differs across cases");
    } else {
      source_classes = sc.source_posteriors->cols;
    }
  }

  LabeledFeatureSet& set = out.set;
  set.features = FeatureMatrix(0, *channels);
  FeatureMatrix post(0, source_classes.value_or(0));
  for (const auto& b : bundles) {
    const ScaleSamples& sc = b.scale(scale_index);
    for (const auto& [k, m] : sc.class_samples) {
      set.features.values.insert(set.features.values.end(), m.values.begin(), m.values.end());
      set.features.rows += m.rows;
      set.labels.insert(set.labels.end(), m.rows, k);
    }
    if (all_posteriors) {
      post.values.insert(post.values.end(), sc.source_posteriors->values.begin(),
                         sc.source_posteriors->values.end());
      post.rows += sc.source_posteriors->rows;
    }
  }
  if (set.size() == 0) {
    throw EstimatorError(error_code::kDegenerateInput,
                         "no class samples at scale " + std::to_string(scale_index));
  }
  if (all_posteriors) {
    set.posteriors = std::move(post);
  } else if (source_classes) {
    out.warnings.push_back({diag::kMixedPosteriors,
                            "only some cases carry source posteriors; posteriors dropped",
                            scale_index});
  }
  return out;
}

// ---------------------------------------------------------------------------
// LEEP: log expected empirical prediction through the source head.

inline constexpr double kLogFloor = 1e-12;

inline double leep(const LabeledFeatureSet& set) {
  if (!set.posteriors) {
    throw EstimatorError(error_code::kUnavailable, "LEEP needs source posteriors; none captured");
  }
  const FeatureMatrix& theta = *set.posteriors;
  const std::size_t n = set.size();
  if (n == 0 || theta.rows != n) {
    throw std::invalid_argument("LEEP: posterior rows must match samples");
  }
  const std::size_t z_count = theta.cols;
  const std::size_t y_count = *std::max_element(set.labels.begin(), set.labels.end()) + 1;

  Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(y_count),
                                                static_cast<Eigen::Index>(z_count));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t z = 0; z < z_count; ++z) joint(set.labels[i], z) += theta(i, z);
  }
  joint /= static_cast<double>(n);
  const Eigen::RowVectorXd marginal = joint.colwise().sum();

  Eigen::MatrixXd conditional = Eigen::MatrixXd::Zero(joint.rows(), joint.cols());
  for (Eigen::Index z = 0; z < joint.cols(); ++z) {
    if (marginal[z] > 0.0) conditional.col(z) = joint.col(z) / marginal[z];
  }

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double p = 0.0;
    for (std::size_t z = 0; z < z_count; ++z) {
      if (marginal[static_cast<Eigen::Index>(z)] > 0.0) p += conditional(set.labels[i], z) * theta(i, z);
    }
    total += std::log(std::max(p, kLogFloor));
  }
  return std::min(0.0, total / static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// LogME: log marginal evidence of a Bayesian linear model on the features,
// maximized over prior precision alpha and noise precision beta.

struct LogmeTrace {
  std::vector<double> evidence;  // evidence / n after each update, starting at alpha = beta = 1
  double alpha = 1.0;
  double beta = 1.0;
};

inline constexpr std::size_t kLogmeMaxIterations = 100;
inline constexpr double kLogmeTolerance = 1e-6;

// Evidence trajectory for one real-valued target.
inline LogmeTrace logme_evidence(const Eigen::MatrixXd& f, const Eigen::VectorXd& y) {
  const auto n = static_cast<double>(f.rows());
  const auto d = static_cast<double>(f.cols());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f.transpose() * f);
  if (es.info() != Eigen::Success) {
    throw EstimatorError(error_code::kDegenerateInput, "LogME eigendecomposition failed");
  }
  const Eigen::VectorXd sigma = es.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXd& v = es.eigenvectors();
  const Eigen::VectorXd projected = v.transpose() * (f.transpose() * y);

  LogmeTrace trace;
  double alpha = 1.0;
  double beta = 1.0;
  auto posterior_mean = [&](double a, double b) {
    const Eigen::VectorXd coeff = (b * projected.array() / (a + b * sigma.array())).matrix();
    return Eigen::VectorXd(v * coeff);
  };
  auto evidence = [&](double a, double b) {
    const Eigen::VectorXd m = posterior_mean(a, b);
    const double residual = (y - f * m).squaredNorm();
    const double ev = 0.5 * d * std::log(a) + 0.5 * n * std::log(b) -
                      0.5 * (a + b * sigma.array()).log().sum() - 0.5 * b * residual -
                      0.5 * a * m.squaredNorm() - 0.5 * n * std::log(2.0 * std::numbers::pi);
    return ev / n;
  };

  trace.evidence.push_back(evidence(alpha, beta));
  for (std::size_t it = 0; it < kLogmeMaxIterations; ++it) {
    const Eigen::VectorXd m = posterior_mean(alpha, beta);
    const double m2 = m.squaredNorm();
    const double r2 = (y - f * m).squaredNorm();
    const double gamma = (beta * sigma.array() / (alpha + beta * sigma.array())).sum();
    if (m2 <= 0.0 || r2 <= 0.0 || n - gamma <= 0.0) break;
    alpha = gamma / m2;
    beta = (n - gamma) / r2;
    const double ev = evidence(alpha, beta);
    const double delta = std::abs(ev - trace.evidence.back());
    trace.evidence.push_back(ev);
    if (delta < kLogmeTolerance) break;
  }
  trace.alpha = alpha;
  trace.beta = beta;
  return trace;
}

// Mean over classes of the one-vs-rest final evidence / n. Classes whose
// one-vs-rest target is constant are skipped.
inline double logme(const LabeledFeatureSet& set) {
  const Eigen::MatrixXd f = to_eigen(set.features);
  const std::set<std::uint32_t> classes(set.labels.begin(), set.labels.end());
  double sum = 0.0;
  std::size_t used = 0;
  for (std::uint32_t k : classes) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(set.size()));
    std::size_t positives = 0;
    for (std::size_t i = 0; i < set.size(); ++i) {
      y[static_cast<Eigen::Index>(i)] = set.labels[i] == k ? 1.0 : 0.0;
      positives += set.labels[i] == k;
    }
    if (positives == 0 || positives == set.size()) continue;
    sum += logme_evidence(f, y).evidence.back();
    ++used;
  }
  if (used == 0) {
    throw EstimatorError(error_code::kDegenerateInput,
                         "LogME: every one-vs-rest target is constant");
  }
  return sum / static_cast<double>(used);
}

// ---------------------------------------------------------------------------
// GBC: negative sum of pairwise Bhattacharyya coefficients between
// diagonal-covariance class Gaussians.

inline double gbc(const LabeledFeatureSet& set, double shrinkage = kDefaultShrinkage) {
  std::map<std::uint32_t, FeatureMatrix> by_class;
  for (std::size_t i = 0; i < set.size(); ++i) {
    auto [it, inserted] = by_class.try_emplace(set.labels[i], 0, set.features.cols);
    it->second.append_row(set.features.row(i));
  }
  std::vector<GaussianSummary> fits;
  for (const auto& [k, m] : by_class) {
    if (m.rows >= 2) fits.push_back(fit_gaussian(m, shrinkage).diagonal());
  }
  if (fits.size() < 2) {
    throw EstimatorError(error_code::kDegenerateInput, "GBC needs >= 2 classes with >= 2 rows");
  }
  double score = 0.0;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    for (std::size_t j = i + 1; j < fits.size(); ++j) {
      score -= std::exp(-bhattacharyya_gauss(fits[i], fits[j]));
    }
  }
  return score;
}

// ---------------------------------------------------------------------------
// TransRate: coding rate of all features minus the label-weighted coding
// rates of each class subset (all centered by the global mean).

inline constexpr double kDefaultTransrateEps = 1e-4;

// R(Z) = 1/2 logdet(I + C / (n eps^2) Z^T Z)
inline double coding_rate(const Eigen::MatrixXd& z, double eps) {
  const auto n = static_cast<double>(z.rows());
  const auto c = static_cast<double>(z.cols());
  if (z.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(z.transpose() * z, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw EstimatorError(error_code::kDegenerateInput, "coding rate eigendecomposition failed");
  }
  const double scale = c / (n * eps * eps);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    logdet += std::log1p(scale * std::max(0.0, es.eigenvalues()[i]));
  }
  return 0.5 * logdet;
}

inline double transrate(const LabeledFeatureSet& set, double eps = kDefaultTransrateEps) {
  if (!(eps > 0.0)) throw std::invalid_argument("TransRate eps must be > 0");
  const std::size_t n = set.size();
  if (n < 2) throw EstimatorError(error_code::kDegenerateInput, "TransRate needs >= 2 samples");
  Eigen::MatrixXd z = to_eigen(set.features);
  const Eigen::RowVectorXd mean = z.colwise().mean();
  z.rowwise() -= mean;

  std::map<std::uint32_t, std::vector<Eigen::Index>> rows_of;
  for (std::size_t i = 0; i < n; ++i) rows_of[set.labels[i]].push_back(static_cast<Eigen::Index>(i));

  double conditional = 0.0;
  for (const auto& [k, rows] : rows_of) {
    const Eigen::MatrixXd zk = z(rows, Eigen::all);
    conditional += static_cast<double>(rows.size()) / static_cast<double>(n) * coding_rate(zk, eps);
  }
  return coding_rate(z, eps) - conditional;
}

}  // namespace ccfv
