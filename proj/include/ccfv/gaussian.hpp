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

// Gaussian summaries of feature samples and closed-form distances between
// them: 2-Wasserstein (the class-consistency metric) plus KL divergence and
// Bhattacharyya distance for ablations.
//
// Everything is accumulated in double even though features are stored as
// binary32.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include <Eigen/Dense>

#include "ccfv/error.hpp"
#include "ccfv/feature_matrix.hpp"

namespace ccfv {

inline constexpr double kDefaultShrinkage = 1e-6;
inline constexpr double kSingularEigenvalue = 1e-12;
inline constexpr double kSymmetryTolerance = 1e-9;

struct GaussianSummary {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  std::size_t sample_count = 0;

  Eigen::Index dim() const { return mean.size(); }

  // Same mean, off-diagonal covariance entries zeroed.
  GaussianSummary diagonal() const {
    GaussianSummary d = *this;
    d.covariance = covariance.diagonal().asDiagonal();
    return d;
  }
};

// Maximum-likelihood fit (1/n covariance) plus ridge lambda*I where
// lambda = shrinkage * trace / C, or lambda = shrinkage when the trace is 0.
inline GaussianSummary fit_gaussian(const FeatureMatrix& samples, double shrinkage = kDefaultShrinkage) {
  if (samples.rows < 2) {
    throw EstimatorError(error_code::kDegenerateInput,
                         "fit_gaussian needs >= 2 rows, got " + std::to_string(samples.rows));
  }
  if (shrinkage < 0.0) throw std::invalid_argument("shrinkage must be >= 0");
  if (!samples.all_finite()) throw std::invalid_argument("fit_gaussian: non-finite input");

  const Eigen::MatrixXd x = to_eigen(samples);
  const double n = static_cast<double>(samples.rows);
  GaussianSummary g;
  g.sample_count = samples.rows;
  g.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - g.mean.transpose();
  g.covariance = (centered.transpose() * centered) / n;
  // Exact symmetry; the product above can differ in the last ulp.
  g.covariance = (0.5 * (g.covariance + g.covariance.transpose())).eval();
  const double trace = g.covariance.trace();
  const double lambda =
      trace > 0.0 ? shrinkage * trace / static_cast<double>(samples.cols) : shrinkage;
  g.covariance.diagonal().array() += lambda;
  return g;
}

namespace detail {

inline void require_symmetric(const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() != m.cols()) throw std::invalid_argument(std::string(what) + ": matrix not square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance * scale) {
    throw std::invalid_argument(std::string(what) + ": matrix not symmetric");
  }
}

inline Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigen_of(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) {
    throw EstimatorError(error_code::kDegenerateInput, "eigendecomposition did not converge");
  }
  return es;
}

inline void require_same_dim(const GaussianSummary& a, const GaussianSummary& b) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("Gaussian dimension mismatch: " + std::to_string(a.dim()) +
                                " vs " + std::to_string(b.dim()));
  }
}

// Log-determinant and inverse of an SPD matrix; singular when the smallest
// eigenvalue drops below kSingularEigenvalue.
struct SpdFactors {
  double logdet = 0.0;
  Eigen::MatrixXd inverse;
};

inline SpdFactors spd_factors(const Eigen::MatrixXd& m, const char* what, bool want_inverse) {
  const auto es = eigen_of(m);
  const Eigen::VectorXd& ev = es.eigenvalues();
  if (ev.minCoeff() < kSingularEigenvalue) {
    throw EstimatorError(error_code::kSingularCovariance,
                         std::string(what) + " is singular (min eigenvalue " +
                             std::to_string(ev.minCoeff()) + ")");
  }
  SpdFactors f;
  f.logdet = ev.array().log().sum();
  if (want_inverse) {
    f.inverse = es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  }
  return f;
}

// Total order on summaries so symmetric distances see a canonical argument order.
inline bool canonical_less(const GaussianSummary& a, const GaussianSummary& b) {
  const auto lex = [](const double* x, const double* y, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (x[i] != y[i]) return x[i] < y[i] ? -1 : 1;
    }
    return 0;
  };
  if (int c = lex(a.mean.data(), b.mean.data(), a.mean.size()); c != 0) return c < 0;
  return lex(a.covariance.data(), b.covariance.data(), a.covariance.size()) < 0;
}

}  // namespace detail

// Principal square root of a symmetric PSD matrix; negative eigenvalues are
// clamped to 0.
inline Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& m) {
  detail::require_symmetric(m, "spd_sqrt");
  const auto es = detail::eigen_of(m);
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd out = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

// Tr((A B)^{1/2}) for PSD A, B, computed as Tr((A^{1/2} B A^{1/2})^{1/2}).
inline double sqrt_product_trace(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::MatrixXd ra = spd_sqrt(a);
  Eigen::MatrixXd inner = ra * b * ra;
  inner = (0.5 * (inner + inner.transpose())).eval();
  const auto es = detail::eigen_of(inner);
  return es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

// 2-Wasserstein distance W2 (not squared) between two Gaussians.
inline double w2_distance(const GaussianSummary& x, const GaussianSummary& y) {
  detail::require_same_dim(x, y);
  if (x.mean == y.mean && x.covariance == y.covariance) return 0.0;
  const bool swap = detail::canonical_less(y, x);
  const GaussianSummary& a = swap ? y : x;
  const GaussianSummary& b = swap ? x : y;
  const double mean_term = (a.mean - b.mean).squaredNorm();
  const double cross = sqrt_product_trace(a.covariance, b.covariance);
  const double squared = mean_term + a.covariance.trace() + b.covariance.trace() - 2.0 * cross;
  return std::sqrt(std::max(0.0, squared));
}

// KL(a || b).
inline double kl_divergence_gauss(const GaussianSummary& a, const GaussianSummary& b) {
  detail::require_same_dim(a, b);
  const auto fb = detail::spd_factors(b.covariance, "KL reference covariance", true);
  const auto fa = detail::spd_factors(a.covariance, "KL source covariance", false);
  const Eigen::VectorXd d = b.mean - a.mean;
  const double trace_term = (fb.inverse * a.covariance).trace();
  const double maha = d.dot(fb.inverse * d);
  const double kl =
      0.5 * (trace_term + maha - static_cast<double>(a.dim()) + fb.logdet - fa.logdet);
  return std::max(0.0, kl);
}

inline double bhattacharyya_gauss(const GaussianSummary& a, const GaussianSummary& b) {
  detail::require_same_dim(a, b);
  const Eigen::MatrixXd mix = 0.5 * (a.covariance + b.covariance);
  const auto fm = detail::spd_factors(mix, "Bhattacharyya mixture covariance", true);
  const auto fa = detail::spd_factors(a.covariance, "Bhattacharyya covariance", false);
  const auto fb = detail::spd_factors(b.covariance, "Bhattacharyya covariance", false);
  const Eigen::VectorXd d = a.mean - b.mean;
  const double dist = 0.125 * d.dot(fm.inverse * d) + 0.5 * (fm.logdet - 0.5 * (fa.logdet + fb.logdet));
  return std::max(0.0, dist);
}

}  // namespace ccfv
