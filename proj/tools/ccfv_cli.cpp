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

// ccfv: command-line front end.
//
//   ccfv synth    --out DIR [...]             synthetic bank + performance.csv
//   ccfv score    --models DIR... [...]       CC-FV score per model (JSON lines)
//   ccfv baseline NAME --models DIR... [...]  leep | logme | gbc | transrate
//   ccfv eval     --scores FILE --perf CSV    weighted tau + Pearson report
//   ccfv validate PATH...                     bundle diagnostics
//
// Exit codes: 0 success, 2 usage/IO/format, 3 estimator-domain errors.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ccfv/baselines.hpp"
#include "ccfv/ccfv.hpp"
#include "ccfv/interchange.hpp"
#include "ccfv/ranking.hpp"
#include "ccfv/report_json.hpp"
#include "ccfv/sampling.hpp"
#include "ccfv/synth.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitEstimator = 3;

struct Options {
  std::vector<std::string> models;
  std::string out;
  std::uint64_t seed = 42;
  std::string metric = "w2";
  std::string scales = "all";
  std::size_t pair_budget = 2016;
  double hse_s = 1.0;
  double eps_floor = 1e-12;
  double shrinkage = ccfv::kDefaultShrinkage;
  double transrate_eps = ccfv::kDefaultTransrateEps;
  double gbc_shrinkage = ccfv::kDefaultShrinkage;
  std::string perf;
  std::string scores;
  std::string estimator;
  std::vector<std::string> paths;
  ccfv::SamplingConfig sampling;
  ccfv::SynthSpec synth;
  std::string channels = "16,32";
  bool no_posteriors = false;
};

std::vector<std::size_t> parse_index_list(const std::string& text, const char* what) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = ccfv::cli::trim(item);
    std::size_t used = 0;
    long long v = -1;
    try {
      v = std::stoll(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || v < 1) {
      throw std::invalid_argument(std::string("bad ") + what + " entry '" + item + "'");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw std::invalid_argument(std::string("empty ") + what + " list");
  return out;
}

ccfv::CcfvConfig ccfv_config(const Options& o) {
  ccfv::CcfvConfig c;
  c.distance_metric = ccfv::parse_distance_metric(o.metric);
  c.pair_budget = o.pair_budget;
  c.hse_exponent = o.hse_s;
  c.epsilon_floor = o.eps_floor;
  c.shrinkage = o.shrinkage;
  c.seed = o.seed;
  if (o.scales != "all") c.scales_used = parse_index_list(o.scales, "--scales");
  c.validate();
  return c;
}

std::vector<ccfv::CaseBundle> load_model_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ccfv::FormatError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".xfb") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.size() < 2) {
    throw ccfv::FormatError(dir.string() + ": need >= 2 case bundles, found " + std::to_string(files.size()));
  }
  std::vector<ccfv::CaseBundle> out;
  for (const auto& f : files) out.push_back(ccfv::read_case_bundle_file(f));
  return out;
}

std::string model_id_of(const fs::path& dir) {
  fs::path p = dir;
  if (p.filename().empty()) p = p.parent_path();
  return p.filename().string();
}

void emit(const Options& o, const std::string& text) {
  if (o.out.empty()) {
    std::cout << text;
  } else {
    ccfv::write_file_atomic(o.out, text);
  }
}

int cmd_score(const Options& o) {
  const ccfv::CcfvConfig config = ccfv_config(o);
  std::string text;
  for (const auto& dir : o.models) {
    const auto bundles = load_model_dir(dir);
    const auto score = ccfv::ccfv_score(model_id_of(dir), bundles, config);
    text += ccfv::to_json(score, config.distance_metric).dump() + "\n";
  }
  emit(o, text);
  return 0;
}

int cmd_baseline(const Options& o) {
  const std::string& name = o.estimator;
  if (name != "leep" && name != "logme" && name != "gbc" && name != "transrate") {
    throw std::invalid_argument("unknown estimator '" + name + "' (leep|logme|gbc|transrate)");
  }
  std::string text;
  for (const auto& dir : o.models) {
    const auto bundles = load_model_dir(dir);
    auto assembled = ccfv::assemble_baseline_set(bundles, 1);
    for (const auto& w : assembled.warnings) std::cerr << "warning: " << w.to_string() << "\n";
    double score = 0.0;
    if (name == "leep") {
      score = ccfv::leep(assembled.set);
    } else if (name == "logme") {
      score = ccfv::logme(assembled.set);
    } else if (name == "gbc") {
      score = ccfv::gbc(assembled.set, o.gbc_shrinkage);
    } else {
      score = ccfv::transrate(assembled.set, o.transrate_eps);
    }
    nlohmann::json j = {{"model_id", model_id_of(dir)}, {"estimator", name}, {"transferability", score}};
    text += j.dump() + "\n";
  }
  emit(o, text);
  return 0;
}

int cmd_eval(const Options& o) {
  std::ifstream scores_in(o.scores);
  if (!scores_in) throw ccfv::FormatError("cannot open scores file " + o.scores);
  const ccfv::ModelValues estimates = ccfv::read_score_lines(scores_in);
  std::ifstream perf_in(o.perf);
  if (!perf_in) throw ccfv::FormatError("cannot open performance table " + o.perf);
  const auto records = ccfv::read_performance_table(perf_in);
  ccfv::ModelValues all_perf;
  for (const auto& r : records) all_perf[r.model_id] = r.dice;
  ccfv::ModelValues perf;
  for (const auto& [id, t] : estimates) {
    auto it = all_perf.find(id);
    if (it == all_perf.end()) throw ccfv::FormatError("model '" + id + "' missing from performance table");
    perf[id] = it->second;
  }
  const auto report = ccfv::correlate(estimates, perf);
  emit(o, ccfv::to_json(report).dump(2) + "\n");
  return 0;
}

int cmd_synth(Options o) {
  if (o.out.empty()) throw std::invalid_argument("synth requires --out DIR");
  o.synth.seed = o.seed;
  o.synth.sampling = o.sampling;
  o.synth.sampling.seed = o.seed;
  o.synth.channels_per_scale = parse_index_list(o.channels, "--channels");
  o.synth.posteriors = !o.no_posteriors;
  const auto bank = ccfv::generate_bank(o.synth);
  const fs::path root(o.out);
  fs::create_directories(root);
  for (const auto& [model_id, cases] : bank.models) {
    fs::create_directories(root / model_id);
    for (const auto& c : cases) ccfv::write_case_bundle_file(c, root / model_id / (c.case_id + ".xfb"));
  }
  ccfv::write_file_atomic(root / "performance.csv", ccfv::format_performance_table(bank.performance));
  std::cout << "wrote " << bank.models.size() << " models x " << o.synth.n_cases << " cases to " << root.string()
            << "\n";
  return 0;
}

int cmd_validate(const Options& o) {
  bool ok = true;
  auto check_file = [&](const fs::path& p) -> std::optional<ccfv::CaseBundle> {
    std::ifstream in(p, std::ios::binary);
    if (!in) {
      std::cout << p.string() << ": cannot open\n";
      ok = false;
      return std::nullopt;
    }
    try {
      auto b = ccfv::read_case_bundle(in);
      std::cout << p.string() << ": ok\n";
      return b;
    } catch (const ccfv::FormatError& e) {
      std::cout << p.string() << ": " << e.what() << "\n";
      ok = false;
      return std::nullopt;
    }
  };
  for (const auto& path : o.paths) {
    if (fs::is_directory(path)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(path)) {
        if (e.is_regular_file() && e.path().extension() == ".xfb") files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      std::vector<ccfv::CaseBundle> bundles;
      for (const auto& f : files) {
        if (auto b = check_file(f)) bundles.push_back(std::move(*b));
      }
      for (const auto& d : ccfv::validate_dataset(bundles)) {
        std::cout << path << ": " << d.to_string() << "\n";
        ok = false;
      }
    } else {
      check_file(path);
    }
  }
  return ok ? 0 : kExitUsage;
}

void add_sampling_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--rate", o.sampling.rate, "fraction of class voxels sampled");
  cmd->add_option("--per-class-max", o.sampling.per_class_max, "per-class sample cap");
  cmd->add_option("--per-class-min", o.sampling.per_class_min, "per-class sample floor");
  cmd->add_option("--global-base", o.sampling.global_base, "global samples at scale 1");
  cmd->add_option("--global-min", o.sampling.global_min, "global sample floor");
}

void add_score_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--metric", o.metric, "class distance: w2 | kl | bha");
  cmd->add_option("--scales", o.scales, "'all' or comma-separated 1-based scale indices");
  cmd->add_option("--pair-budget", o.pair_budget, "max case pairs per class per scale");
  cmd->add_option("--hse-s", o.hse_s, "hyperspherical energy exponent s");
  cmd->add_option("--eps-floor", o.eps_floor, "floor applied to class consistency before log");
  cmd->add_option("--shrinkage", o.shrinkage, "relative covariance ridge");
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Transferability estimation for segmentation models"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_path;
  app.add_option("--config", config_path, "key = value run configuration file");

  auto* synth = app.add_subcommand("synth", "generate a synthetic model bank");
  synth->add_option("--out", o.out, "output directory")->required();
  synth->add_option("--seed", o.seed, "random seed");
  synth->add_option("--n-models", o.synth.n_models, "number of models");
  synth->add_option("--n-cases", o.synth.n_cases, "cases per model");
  synth->add_option("--n-classes", o.synth.n_classes, "foreground classes");
  synth->add_option("--channels", o.channels, "comma-separated channels per scale");
  synth->add_option("--noise-sigma", o.synth.noise_sigma, "class sample noise");
  synth->add_flag("--no-posteriors", o.no_posteriors, "omit source posteriors");
  add_sampling_flags(synth, o);

  auto* score = app.add_subcommand("score", "CC-FV score per model directory");
  score->add_option("--models", o.models, "model directories of .xfb bundles")->required()->expected(1, -1);
  score->add_option("--out", o.out, "output file (default stdout)");
  score->add_option("--seed", o.seed, "pair subsampling seed");
  add_score_flags(score, o);
  add_sampling_flags(score, o);

  auto* baseline = app.add_subcommand("baseline", "baseline estimator per model directory");
  baseline->add_option("estimator", o.estimator, "leep | logme | gbc | transrate")->required();
  baseline->add_option("--models", o.models, "model directories of .xfb bundles")->required()->expected(1, -1);
  baseline->add_option("--out", o.out, "output file (default stdout)");
  baseline->add_option("--transrate-eps", o.transrate_eps, "TransRate distortion eps");
  baseline->add_option("--gbc-shrinkage", o.gbc_shrinkage, "GBC covariance ridge");

  auto* eval = app.add_subcommand("eval", "correlate scores with fine-tuned performance");
  eval->add_option("--scores", o.scores, "JSON-lines scores")->required();
  eval->add_option("--perf", o.perf, "performance CSV (model_id,dice)")->required();
  eval->add_option("--out", o.out, "output file (default stdout)");

  auto* validate = app.add_subcommand("validate", "check bundle files or model directories");
  validate->add_option("paths", o.paths, "bundle files or directories")->required()->expected(1, -1);

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    // --config is resolved before the real parse so its entries can be merged.
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) {
        args = ccfv::cli::merge_config_args(args, ccfv::cli::load_config_file(args[i + 1]));
        break;
      }
      if (args[i].rfind("--config=", 0) == 0) {
        args = ccfv::cli::merge_config_args(args, ccfv::cli::load_config_file(args[i].substr(9)));
        break;
      }
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const ccfv::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(o);
    if (*score) return cmd_score(o);
    if (*baseline) return cmd_baseline(o);
    if (*eval) return cmd_eval(o);
    if (*validate) return cmd_validate(o);
  } catch (const ccfv::EstimatorError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEstimator;
  } catch (const ccfv::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
