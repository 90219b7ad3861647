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

// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bundle_fixtures.hpp"
#include "ccfv/baselines.hpp"
#include "ccfv/ccfv.hpp"
#include "ccfv/gaussian.hpp"
#include "ccfv/ranking.hpp"
#include "ccfv/synth.hpp"
#include "cli_support.hpp"
#include "json.hpp"
#include "oracles.hpp"

namespace {

using namespace ccfv;
using testing::make_gaussian;
using Rows = std::vector<std::vector<double>>;

// Collects the first few failures of one criterion.
class Tally {
 public:
  void check(bool ok, const std::string& what) {
    if (ok) return;
    if (failures_++ < 5) detail_ << (detail_.tellp() > 0 ? "; " : "") << what;
  }
  void near(double got, double want, double tol, const std::string& what) {
    std::ostringstream s;
    s.precision(17);
    s << what << ": got " << got << " want " << want << " tol " << tol;
    check(std::abs(got - want) <= tol, s.str());
  }
  bool ok() const { return failures_ == 0; }
  std::string detail() const { return detail_.str() + (failures_ > 5 ? " (+more)" : ""); }

 private:
  int failures_ = 0;
  std::ostringstream detail_;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

GaussianSummary g1(double mean, double var) {
  return make_gaussian(Eigen::VectorXd::Constant(1, mean), Eigen::MatrixXd::Constant(1, 1, var));
}

void w2_closed_forms(Tally& t, std::string& note) {
  const auto t0 = Clock::now();
  t.near(w2_distance(g1(0, 1), g1(1, 1)), 1.0, 1e-9, "1-D unit shift");
  t.near(w2_distance(g1(0, 4), g1(3, 1)), testing::w2_1d(0, 4, 3, 1), 1e-9, "1-D mean and variance");
  t.near(w2_distance(make_gaussian(Eigen::VectorXd::Zero(2), Eigen::Vector2d(1, 4).asDiagonal()),
                     make_gaussian(Eigen::VectorXd::Zero(2), Eigen::Vector2d(1, 1).asDiagonal())),
         1.0, 1e-9, "diag(1,4) vs I");

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.01, 5.0);
  std::normal_distribution<double> n01;
  for (int i = 0; i < 50; ++i) {
    const int d = 1 + i % 16;
    Eigen::VectorXd la(d), lb(d), ma(d), mb(d);
    double w2sq = 0.0;
    for (int j = 0; j < d; ++j) {
      la[j] = u(rng), lb[j] = u(rng), ma[j] = n01(rng), mb[j] = n01(rng);
      w2sq += std::pow(ma[j] - mb[j], 2) + std::pow(std::sqrt(la[j]) - std::sqrt(lb[j]), 2);
    }
    // a shared random rotation keeps the covariances commuting
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(
                                  Eigen::MatrixXd::NullaryExpr(d, d, [&] { return n01(rng); }))
                                  .householderQ();
    Eigen::MatrixXd ca = q * la.asDiagonal() * q.transpose();
    Eigen::MatrixXd cb = q * lb.asDiagonal() * q.transpose();
    ca = 0.5 * (ca + ca.transpose()).eval();
    cb = 0.5 * (cb + cb.transpose()).eval();
    t.near(w2_distance(make_gaussian(ma, ca), make_gaussian(mb, cb)), std::sqrt(w2sq), 1e-9,
           "commuting d=" + std::to_string(d));
  }

  std::mt19937_64 tri(17);
  for (int i = 0; i < 200; ++i) {
    const int d = 1 + i % 16;
    const auto a = testing::random_gaussian(tri, d);
    const auto b = testing::random_gaussian(tri, d);
    const auto c = testing::random_gaussian(tri, d);
    const double ab = w2_distance(a, b), bc = w2_distance(b, c), ac = w2_distance(a, c);
    t.check(ac <= ab + bc + 1e-6 && ab <= ac + bc + 1e-6 && bc <= ab + ac + 1e-6,
            "triangle violated at triple " + std::to_string(i));
  }
  const double secs = seconds_since(t0);
  t.check(secs < 5.0, "runtime " + std::to_string(secs) + " s");
  note = std::to_string(secs) + " s";
}

void spd_sqrt_oracle(Tally& t, std::string& note) {
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Eigen::MatrixXd a = testing::random_spd(rng, 1 + i % 16);
    const Eigen::MatrixXd r = spd_sqrt(a);
    const double err = testing::relative_frobenius(r * r, a);
    worst = std::max(worst, err);
    t.check(err <= 1e-6, "matrix " + std::to_string(i) + " error " + std::to_string(err));
  }
  std::ostringstream s;
  s << "worst relative error " << worst;
  note = s.str();
}

void hse_oracle(Tally& t, std::string& note) {
  std::mt19937_64 rng(31);
  std::normal_distribution<float> n01;
  int compared = 0;
  for (double s : {0.0, 1.0, 2.0}) {
    for (std::size_t n = 2; n <= 16; ++n) {
      const std::size_t d = 2 + n % 6;
      FeatureMatrix m(n, d);
      for (float& v : m.values) v = n01(rng);
      Rows rows(n, std::vector<double>(d));
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) rows[i][j] = m(i, j);
      t.near(hyperspherical_energy(m, s), testing::naive_hse(rows, s), 1e-9,
             "n=" + std::to_string(n) + " s=" + std::to_string(s));
      ++compared;
    }
  }
  const FeatureMatrix circle = testing::matrix_from({{1, 0}, {0, 1}, {-1, 0}, {0, -1}});
  t.near(hyperspherical_energy(circle, 1.0), 4.0 * std::numbers::sqrt2 + 2.0, 1e-9, "4-point circle");
  note = std::to_string(compared) + " point sets";
}

void arithmetic_fixtures(Tally& t, std::string& note) {
  CcfvConfig exact;
  exact.shrinkage = 0.0;
  auto one_d = [](double m) { return Rows{{m - 1.0}, {m + 1.0}}; };
  const Rows g1d{{1}, {-1}};
  const std::vector<CaseBundle> three{testing::make_case("a", {{1, one_d(0)}}, g1d),
                                      testing::make_case("b", {{1, one_d(1)}}, g1d),
                                      testing::make_case("c", {{1, one_d(3)}}, g1d)};
  const double pair_mean = class_consistency(three, 1, exact);
  t.near(pair_mean, 2.0, 1e-12, "class consistency pair mean");

  const Rows far{{1, 0, 0, 0, 0}, {-1, 0, 0, 0, 0}};
  const Rows close{{1, 0, 0, 0, 0}, {0.875, 0.375, 0.25, 0.125, 0.125}};
  const std::vector<CaseBundle> two{testing::make_case("a", {{1, far}}, far),
                                    testing::make_case("b", {{1, far}}, close)};
  const double fv = feature_variety(two, 1, CcfvConfig{});
  t.near(fv, 0.625, 1e-12, "feature variety");

  const std::vector<ScaleScore> scales{{1, std::exp(-1.0), 1.0}, {2, std::exp(-3.0), 1.0}};
  const double tr = aggregate_transferability(scales, 1e-12);
  t.near(tr, 2.0, 1e-12, "transferability");

  std::ostringstream s;
  s.precision(17);
  s << "pair-mean " << pair_mean << ", F_v " << fv << ", T " << tr;
  note = s.str();
}

struct EvalOutcome {
  double tau = NAN;
  double pearson = NAN;
};

EvalOutcome cli_rank(const testing::ScratchDir& dir, const std::string& bank, const std::string& metric,
                     std::size_t n_models, Tally& t) {
  std::string models;
  for (std::size_t m = 0; m < n_models; ++m) models += " " + testing::quote(dir / (bank + "/" + SynthSpec::model_name(m)));
  const std::string scores = dir / (bank + "_" + metric + ".jsonl");
  const auto s = testing::run_cli("score --metric " + metric + " --out " + testing::quote(scores) + " --models" + models,
                                  dir.path());
  t.check(s.exit_code == 0, "score " + metric + " exit " + std::to_string(s.exit_code) + ": " + s.err);
  const auto e = testing::run_cli("eval --scores " + testing::quote(scores) + " --perf " +
                                      testing::quote(dir / (bank + "/performance.csv")),
                                  dir.path());
  t.check(e.exit_code == 0, "eval exit " + std::to_string(e.exit_code) + ": " + e.err);
  EvalOutcome out;
  if (e.exit_code == 0) {
    const auto j = nlohmann::json::parse(e.out);
    out.tau = j.at("weighted_tau").get<double>();
    out.pearson = j.at("pearson").get<double>();
  }
  return out;
}

void end_to_end(Tally& t, std::string& note, const testing::ScratchDir& dir) {
  const auto t0 = Clock::now();
  const auto s = testing::run_cli("synth --out " + testing::quote(dir / "bank"), dir.path());
  t.check(s.exit_code == 0, "synth exit " + std::to_string(s.exit_code) + ": " + s.err);
  const EvalOutcome r = cli_rank(dir, "bank", "w2", 6, t);
  const double secs = seconds_since(t0);
  t.check(r.tau == 1.0, "weighted_tau " + std::to_string(r.tau));
  t.check(r.pearson >= 0.95, "pearson " + std::to_string(r.pearson));
  t.check(secs < 60.0, "runtime " + std::to_string(secs) + " s");
  std::ostringstream n;
  n << "weighted_tau " << r.tau << ", pearson " << r.pearson << ", " << secs << " s";
  note = n.str();
}

void ablation(Tally& t, std::string& note, const testing::ScratchDir& dir) {
  const auto s = testing::run_cli("synth --noise-sigma 0.5 --out " + testing::quote(dir / "noisy"), dir.path());
  t.check(s.exit_code == 0, "synth exit " + std::to_string(s.exit_code) + ": " + s.err);
  const EvalOutcome w2 = cli_rank(dir, "noisy", "w2", 6, t);
  const EvalOutcome kl = cli_rank(dir, "noisy", "kl", 6, t);
  t.check(w2.tau >= kl.tau, "w2 tau " + std::to_string(w2.tau) + " < kl tau " + std::to_string(kl.tau));
  std::ostringstream n;
  n << "w2 tau " << w2.tau << ", kl tau " << kl.tau;
  note = n.str();
}

void baseline_bounds(Tally& t, std::string& note) {
  std::size_t sets = 0;
  for (double noise : {0.05, 0.5}) {
    for (std::uint64_t seed : {42u, 7u, 1234u}) {
      SynthSpec spec;
      spec.noise_sigma = noise;
      spec.seed = seed;
      spec.sampling.seed = seed;
      for (const auto& [id, cases] : generate_bank(spec).models) {
        const std::string tag = id + " seed " + std::to_string(seed) + " noise " + std::to_string(noise);
        for (std::size_t scale = 1; scale <= 2; ++scale) {
          const LabeledFeatureSet set = assemble_baseline_set(cases, scale).set;
          if (scale == 1) t.check(leep(set) <= 0.0, "leep > 0 for " + tag);
          t.check(transrate(set) >= -1e-9, "transrate < -1e-9 for " + tag);
          const double g = gbc(set);
          std::set<std::uint32_t> classes(set.labels.begin(), set.labels.end());
          const double pairs = 0.5 * static_cast<double>(classes.size() * (classes.size() - 1));
          t.check(g <= 0.0 && g >= -pairs, "gbc out of range for " + tag);
          const Eigen::MatrixXd f = to_eigen(set.features);
          for (std::uint32_t k : classes) {
            Eigen::VectorXd y(f.rows());
            for (Eigen::Index i = 0; i < f.rows(); ++i) y[i] = set.labels[static_cast<std::size_t>(i)] == k;
            const auto ev = logme_evidence(f, y).evidence;
            for (std::size_t i = 1; i < ev.size(); ++i) {
              t.check(ev[i] >= ev[i - 1] - 1e-9, "logme evidence decreased for " + tag);
            }
          }
          ++sets;
        }
      }
    }
  }

  LabeledFeatureSet flat{testing::matrix_from({{0}, {1}}), {1, 2}, testing::matrix_from({{0.5, 0.5}, {0.5, 0.5}})};
  // -0.693147 is log(1/2) printed to six places
  t.near(leep(flat), std::log(0.5), 1e-9, "uninformative LEEP");
  t.near(weighted_kendall_tau({{"m1", 3}, {"m2", 1}, {"m3", 2}}, {{"m1", 3}, {"m2", 2}, {"m3", 1}}), 6.0 / 11.0,
         1e-9, "three-model weighted tau");
  note = std::to_string(sets) + " feature sets";
}

void interchange(Tally& t, std::string& note) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const CaseBundle b = testing::random_bundle(rng);
    std::stringstream ss;
    write_case_bundle(b, ss);
    const CaseBundle back = read_case_bundle(ss);
    t.check(testing::bit_equal(b, back), "bundle " + std::to_string(i) + " changed in round trip");
  }
  std::set<std::string> codes;
  const auto violations = testing::invariant_violations();
  for (const auto& [code, mutate] : violations) {
    CaseBundle b = testing::small_bundle();
    mutate(b);
    const auto d = validate_bundle(b);
    t.check(d.size() == 1 && d[0].code == code, "violation " + code + " not reported alone");
    if (!d.empty()) codes.insert(d[0].code);
  }
  std::vector<CaseBundle> depth{testing::small_bundle(), testing::small_bundle()};
  depth[1].scales.push_back(depth[1].scales[0]);
  const auto dd = validate_dataset(depth);
  t.check(!dd.empty() && dd[0].code == diag::kInconsistentScaleCount, "scale count mismatch not reported");
  std::vector<CaseBundle> chans{testing::small_bundle(), testing::small_bundle()};
  chans[1].scales[0].channels = 4;
  const auto dc = validate_dataset(chans);
  t.check(!dc.empty() && dc[0].code == diag::kInconsistentChannels, "channel mismatch not reported");
  if (!dd.empty()) codes.insert(dd[0].code);
  if (!dc.empty()) codes.insert(dc[0].code);
  t.check(codes.size() == violations.size() + 2, "diagnostic codes are not distinct");
  note = "1000 bundles, " + std::to_string(codes.size()) + " distinct codes";
}

}  // namespace

int main() {
  const testing::ScratchDir scratch("acceptance");
  using Criterion = std::pair<std::string, std::function<void(Tally&, std::string&)>>;
  const std::vector<Criterion> criteria{
      {"w2 closed forms and triangle inequality", w2_closed_forms},
      {"spd_sqrt squares back to its input", spd_sqrt_oracle},
      {"hyperspherical energy matches brute force", hse_oracle},
      {"consistency, variety and transferability fixtures", arithmetic_fixtures},
      {"synthetic bank ranked perfectly end to end", [&](Tally& t, std::string& n) { end_to_end(t, n, scratch); }},
      {"w2 ranks noisy bank at least as well as kl", [&](Tally& t, std::string& n) { ablation(t, n, scratch); }},
      {"baseline bounds and hand values", baseline_bounds},
      {"bundle round trip and distinct diagnostics", interchange},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Tally t;
    std::string note;
    try {
      run(t, note);
    } catch (const std::exception& e) {
      t.check(false, std::string("exception: ") + e.what());
    }
    std::cout << (t.ok() ? "PASS " : "FAIL ") << name;
    if (!t.ok()) {
      std::cout << " -- " << t.detail();
    } else if (!note.empty()) {
      std::cout << " (" << note << ")";
    }
    std::cout << "\n";
    failed += !t.ok();
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
